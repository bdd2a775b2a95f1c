//! Blocking JSON-over-HTTP helper used by the optional service backends.

use std::time::Duration;

use serde::Serialize;

/// Environment variable holding a bearer token for external services.
pub const API_KEY_ENV: &str = "BINSCENE_API_KEY";

#[derive(Debug)]
pub(crate) enum HttpFailure {
    /// Connection, timeout or non-2xx status.
    Unreachable(String),
    /// The service answered but the body could not be read.
    Body(String),
}

const MAX_BODY: u64 = 256 * 1024 * 1024;

/// POSTs `body` as JSON and returns the raw response bytes.
pub(crate) fn post_json<B: Serialize>(
    url: &str,
    body: &B,
    timeout: Duration,
) -> Result<Vec<u8>, HttpFailure> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into();
    let mut request = agent.post(url);
    if let Ok(key) = std::env::var(API_KEY_ENV) {
        request = request.header("Authorization", &format!("Bearer {key}"));
    }
    let mut response = request
        .send_json(body)
        .map_err(|e| HttpFailure::Unreachable(format!("{url}: {e}")))?;
    response
        .body_mut()
        .with_config()
        .limit(MAX_BODY)
        .read_to_vec()
        .map_err(|e| HttpFailure::Body(e.to_string()))
}
