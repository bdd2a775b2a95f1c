//! Mono source provisioning: corpus lookup, synthetic generators and an
//! optional external text-to-audio service. Every clip leaves this module
//! cut or padded to its event's exact duration.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp;
use crate::http::{self, HttpFailure};
use crate::scene::SceneEvent;
use crate::wav;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("no corpus file for label {label:?} (looked for {file})")]
    LabelNotFound { label: String, file: String },
    #[error("audio service unreachable: {0}")]
    ServiceUnreachable(String),
    #[error("undecodable audio: {0}")]
    BadAudioPayload(String),
    #[error("clip contains a non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("invalid source backend {0:?}; expected corpus:<dir>, synth or service:<url>")]
    BadBackend(String),
}

/// Single-channel audio, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MonoClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl MonoClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, SourceError> {
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SourceError::NonFinite(i));
        }
        Ok(MonoClip { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn scaled(&self, gain: f64) -> MonoClip {
        MonoClip {
            samples: self.samples.iter().map(|v| v * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Number of samples an event of `duration` seconds occupies.
pub fn samples_for(duration: f64, sample_rate: u32) -> usize {
    (duration.max(0.0) * sample_rate as f64).round() as usize
}

const FADE_SECONDS: f64 = 0.005;

/// Truncates or zero-pads the tail to exactly `duration`. A 5 ms linear
/// fade-out is applied at a truncation cut.
pub fn fit_duration(clip: &MonoClip, duration: f64) -> MonoClip {
    let n = samples_for(duration, clip.sample_rate);
    let mut samples = clip.samples.clone();
    if samples.len() > n {
        samples.truncate(n);
        let fade = samples_for(FADE_SECONDS, clip.sample_rate).min(n);
        for i in 0..fade {
            samples[n - fade + i] *= 1.0 - (i + 1) as f64 / fade as f64;
        }
    } else {
        samples.resize(n, 0.0);
    }
    MonoClip { samples, sample_rate: clip.sample_rate }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SignalKind {
    Sine { freq_hz: f64 },
    Noise,
    Chirp,
    Click,
}

const SYNTH_PEAK: f64 = 0.5;

/// Deterministic desk-scale test signals. Sine, noise and chirp peak at 0.5;
/// click is a unit impulse at t=0.
pub fn synth_test_signal(kind: SignalKind, duration: f64, sample_rate: u32, seed: u64) -> MonoClip {
    let n = samples_for(duration, sample_rate);
    let sr = sample_rate as f64;
    let samples = match kind {
        SignalKind::Sine { freq_hz } => (0..n)
            .map(|i| SYNTH_PEAK * (2.0 * PI * freq_hz * i as f64 / sr).sin())
            .collect(),
        SignalKind::Noise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let peak = dsp::peak(&raw);
            if peak > 0.0 {
                raw.iter().map(|v| v * SYNTH_PEAK / peak).collect()
            } else {
                raw
            }
        }
        SignalKind::Chirp => {
            let (f0, f1) = (100.0, 0.45 * sr);
            let span = duration.max(1.0 / sr);
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    SYNTH_PEAK * (2.0 * PI * (f0 * t + (f1 - f0) * t * t / (2.0 * span))).sin()
                })
                .collect()
        }
        SignalKind::Click => {
            let mut v = vec![0.0; n];
            if let Some(first) = v.first_mut() {
                *first = 1.0;
            }
            v
        }
    };
    MonoClip { samples, sample_rate }
}

/// 64-bit FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Maps a free-text label onto a synthetic generator. Labels that name no
/// generator get label-seeded noise, so distinct events stay distinct.
pub fn synth_kind_for_label(label: &str, seed: u64) -> (SignalKind, u64) {
    let lower = label.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let number = words.iter().find_map(|w| w.trim_end_matches("hz").parse::<f64>().ok());
    if words.iter().any(|w| *w == "tone" || *w == "sine") {
        let freq = number.filter(|f| f.is_finite() && *f > 0.0).unwrap_or(440.0);
        return (SignalKind::Sine { freq_hz: freq }, seed);
    }
    if words.contains(&"chirp") || words.contains(&"sweep") {
        return (SignalKind::Chirp, seed);
    }
    if words.contains(&"click") || words.contains(&"impulse") {
        return (SignalKind::Click, seed);
    }
    if words.contains(&"noise") {
        return (SignalKind::Noise, seed);
    }
    (SignalKind::Noise, seed ^ fnv1a(&lower))
}

/// Where mono audio comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SourceBackend {
    /// Directories searched in order for `<normalized label>.wav`.
    Corpus { dirs: Vec<PathBuf> },
    Synth { seed: u64 },
    /// Text-to-audio service: POST {text, duration_s, sample_rate} → WAV.
    Service { endpoint: String, timeout_s: f64 },
}

impl fmt::Display for SourceBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceBackend::Corpus { dirs } => {
                let joined: Vec<String> = dirs.iter().map(|d| d.display().to_string()).collect();
                write!(f, "corpus:{}", joined.join(","))
            }
            SourceBackend::Synth { .. } => write!(f, "synth"),
            SourceBackend::Service { endpoint, .. } => write!(f, "service:{endpoint}"),
        }
    }
}

impl FromStr for SourceBackend {
    type Err = SourceError;

    /// `corpus:<dir>[,<dir>...]`, `synth` or `service:<url>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "synth" {
            return Ok(SourceBackend::Synth { seed: 0 });
        }
        if let Some(dirs) = s.strip_prefix("corpus:") {
            let dirs: Vec<PathBuf> = dirs.split(',').filter(|d| !d.is_empty()).map(PathBuf::from).collect();
            if !dirs.is_empty() {
                return Ok(SourceBackend::Corpus { dirs });
            }
        }
        if let Some(url) = s.strip_prefix("service:") {
            if !url.is_empty() {
                return Ok(SourceBackend::Service { endpoint: url.to_string(), timeout_s: 120.0 });
            }
        }
        Err(SourceError::BadBackend(s.to_string()))
    }
}

/// Lowercase, whitespace runs become underscores.
pub fn corpus_file_name(label: &str) -> String {
    let words: Vec<String> = label.split_whitespace().map(str::to_lowercase).collect();
    format!("{}.wav", words.join("_"))
}

fn clip_from_wav(data: wav::WavData, sample_rate: u32) -> Result<MonoClip, SourceError> {
    let mono = data.to_mono();
    let resampled = dsp::resample(&mono, data.sample_rate, sample_rate);
    MonoClip::new(resampled.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect(), sample_rate)
}

#[derive(Serialize)]
struct TtaRequest<'a> {
    text: &'a str,
    duration_s: f64,
    sample_rate: u32,
}

/// Produces the event's mono clip at `sample_rate`, exactly as long as the
/// event's duration.
pub fn fetch_mono(event: &SceneEvent, backend: &SourceBackend, sample_rate: u32) -> Result<MonoClip, SourceError> {
    let raw = match backend {
        SourceBackend::Synth { seed } => {
            let (kind, seed) = synth_kind_for_label(&event.label, *seed);
            synth_test_signal(kind, event.duration, sample_rate, seed)
        }
        SourceBackend::Corpus { dirs } => {
            let file = corpus_file_name(&event.label);
            let path = dirs
                .iter()
                .map(|d| d.join(&file))
                .find(|p| p.is_file())
                .ok_or_else(|| SourceError::LabelNotFound { label: event.label.clone(), file: file.clone() })?;
            let data = wav::read_wav(&path)
                .map_err(|e| SourceError::BadAudioPayload(format!("{}: {e}", path.display())))?;
            clip_from_wav(data, sample_rate)?
        }
        SourceBackend::Service { endpoint, timeout_s } => {
            let request = TtaRequest { text: &event.label, duration_s: event.duration, sample_rate };
            let bytes = http::post_json(endpoint, &request, Duration::from_secs_f64(timeout_s.max(0.001)))
                .map_err(|e| match e {
                    HttpFailure::Unreachable(m) => SourceError::ServiceUnreachable(m),
                    HttpFailure::Body(m) => SourceError::BadAudioPayload(m),
                })?;
            let data = wav::read_wav_bytes(&bytes).map_err(|e| SourceError::BadAudioPayload(e.to_string()))?;
            clip_from_wav(data, sample_rate)?
        }
    };
    Ok(fit_duration(&raw, event.duration))
}
