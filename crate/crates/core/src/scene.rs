//! Scene data model and the `@`-record text format.
//!
//! One record per line:
//!
//! ```text
//! <label>@<duration s>@<azimuth deg>, <elevation deg>@<distance m>@<start s>
//! ```
//!
//! Angles are listener-centric: azimuth 0 is straight ahead, positive to the
//! right, elevation positive upwards. Files may start with an `sr=<Hz>` header
//! and may contain blank lines and `#` comments.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("line {line}: expected {expected} `{field}` fields, found {found}")]
    FieldCount {
        line: usize,
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: field `{field}` is not a decimal number: {value:?}")]
    NumberParse {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: field `{field}` = {value} out of range ({reason})")]
    RangeViolation {
        line: usize,
        field: &'static str,
        value: String,
        reason: &'static str,
    },
    #[error("scene contains no events")]
    EmptyScene,
    #[error("line {line}: bad sample-rate header {value:?}")]
    Header { line: usize, value: String },
    #[error("invalid scene JSON: {0}")]
    Json(String),
}

impl SceneError {
    /// Line number the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            SceneError::FieldCount { line, .. }
            | SceneError::NumberParse { line, .. }
            | SceneError::RangeViolation { line, .. }
            | SceneError::Header { line, .. } => Some(*line),
            SceneError::EmptyScene | SceneError::Json(_) => None,
        }
    }

    fn at_line(self, n: usize) -> Self {
        match self {
            SceneError::FieldCount { field, expected, found, .. } => {
                SceneError::FieldCount { line: n, field, expected, found }
            }
            SceneError::NumberParse { field, value, .. } => {
                SceneError::NumberParse { line: n, field, value }
            }
            SceneError::RangeViolation { field, value, reason, .. } => {
                SceneError::RangeViolation { line: n, field, value, reason }
            }
            SceneError::Header { value, .. } => SceneError::Header { line: n, value },
            other => other,
        }
    }
}

/// A single sound source in a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvent {
    pub label: String,
    /// Seconds, > 0.
    pub duration: f64,
    /// Degrees in [-180, 180).
    pub azimuth: f64,
    /// Degrees in [-90, 90].
    pub elevation: f64,
    /// Meters, > 0.
    pub distance: f64,
    /// Seconds, >= 0.
    pub start_time: f64,
}

impl SceneEvent {
    /// Builds a validated event. Azimuth is wrapped into [-180, 180); every
    /// other out-of-range value is an error.
    pub fn new(
        label: impl Into<String>,
        duration: f64,
        azimuth: f64,
        elevation: f64,
        distance: f64,
        start_time: f64,
    ) -> Result<Self, SceneError> {
        let event = SceneEvent {
            label: label.into().trim().to_string(),
            duration,
            azimuth,
            elevation,
            distance,
            start_time,
        };
        event.validated(0)
    }

    fn validated(mut self, line: usize) -> Result<Self, SceneError> {
        let range = |field, value: f64, reason| SceneError::RangeViolation {
            line,
            field,
            value: value.to_string(),
            reason,
        };
        if self.label.is_empty() {
            return Err(SceneError::RangeViolation {
                line,
                field: "label",
                value: String::new(),
                reason: "label must be non-empty",
            });
        }
        if self.label.contains(['@', '\n', '\r']) {
            return Err(SceneError::RangeViolation {
                line,
                field: "label",
                value: self.label.clone(),
                reason: "label must not contain '@' or line breaks",
            });
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(range("duration", self.duration, "must be finite and > 0"));
        }
        if !self.azimuth.is_finite() {
            return Err(range("azimuth", self.azimuth, "must be finite"));
        }
        if !(self.elevation.is_finite() && (-90.0..=90.0).contains(&self.elevation)) {
            return Err(range("elevation", self.elevation, "must lie in [-90, 90]"));
        }
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(range("distance", self.distance, "must be finite and > 0"));
        }
        if !(self.start_time.is_finite() && self.start_time >= 0.0) {
            return Err(range("start_time", self.start_time, "must be finite and >= 0"));
        }
        self.azimuth = normalize_azimuth(self.azimuth);
        Ok(self)
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }

    /// Serializes back into the `@`-record form.
    pub fn to_record(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SceneEvent {
    // f64's Display never switches to exponent notation and prints the
    // shortest string that round-trips, so records reparse losslessly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}@{}@{}, {}@{}@{}",
            self.label, self.duration, self.azimuth, self.elevation, self.distance, self.start_time
        )
    }
}

/// Wraps an azimuth in degrees into [-180, 180).
pub fn normalize_azimuth(deg: f64) -> f64 {
    if (-180.0..180.0).contains(&deg) {
        return deg;
    }
    let wrapped = (deg + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if wrapped >= 180.0 {
        wrapped - 360.0
    } else {
        wrapped
    }
}

fn parse_decimal(field: &'static str, raw: &str) -> Result<f64, SceneError> {
    let s = raw.trim();
    let err = || SceneError::NumberParse { line: 0, field, value: s.to_string() };
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    let valid = !digits.is_empty()
        && digits.chars().all(|c| c.is_ascii_digit() || c == '.')
        && digits.chars().filter(|&c| c == '.').count() <= 1
        && digits.chars().any(|c| c.is_ascii_digit());
    if !valid {
        return Err(err());
    }
    s.parse::<f64>().map_err(|_| err())
}

/// Parses one `@`-record.
pub fn parse_scene_line(line: &str) -> Result<SceneEvent, SceneError> {
    parse_record(line, 1)
}

fn parse_record(line: &str, n: usize) -> Result<SceneEvent, SceneError> {
    let fields: Vec<&str> = line.split('@').collect();
    if fields.len() != 5 {
        return Err(SceneError::FieldCount {
            line: n,
            field: "record",
            expected: 5,
            found: fields.len(),
        });
    }
    let position: Vec<&str> = fields[2].split(',').collect();
    if position.len() != 2 {
        return Err(SceneError::FieldCount {
            line: n,
            field: "azimuth, elevation",
            expected: 2,
            found: position.len(),
        });
    }
    let parsed = (|| {
        Ok(SceneEvent {
            label: fields[0].trim().to_string(),
            duration: parse_decimal("duration", fields[1])?,
            azimuth: parse_decimal("azimuth", position[0])?,
            elevation: parse_decimal("elevation", position[1])?,
            distance: parse_decimal("distance", fields[3])?,
            start_time: parse_decimal("start_time", fields[4])?,
        })
    })();
    parsed.map_err(|e: SceneError| e.at_line(n))?.validated(n)
}

/// An ordered, non-empty list of events plus the render sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub events: Vec<SceneEvent>,
    pub sample_rate: u32,
}

impl Scene {
    pub fn new(events: Vec<SceneEvent>, sample_rate: u32) -> Result<Self, SceneError> {
        if events.is_empty() {
            return Err(SceneError::EmptyScene);
        }
        if sample_rate == 0 {
            return Err(SceneError::Header { line: 0, value: "0".into() });
        }
        Ok(Scene { events, sample_rate })
    }

    /// Seconds from t=0 to the end of the last-ending event.
    pub fn timeline_length(&self) -> f64 {
        self.events.iter().map(SceneEvent::end_time).fold(0.0, f64::max)
    }

    /// Emits the text form, including an `sr=` header when the rate is not
    /// the default.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.sample_rate != DEFAULT_SAMPLE_RATE {
            out.push_str(&format!("sr={}\n", self.sample_rate));
        }
        for e in &self.events {
            out.push_str(&e.to_record());
            out.push('\n');
        }
        out
    }

    /// Parses the JSON array form. Each object is validated like a text record.
    pub fn from_json(text: &str, sample_rate: u32) -> Result<Self, SceneError> {
        let raw: Vec<SceneEvent> =
            serde_json::from_str(text).map_err(|e| SceneError::Json(e.to_string()))?;
        let events = raw
            .into_iter()
            .enumerate()
            .map(|(i, e)| e.validated(i + 1))
            .collect::<Result<Vec<_>, _>>()?;
        Scene::new(events, sample_rate)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.events).expect("events serialize")
    }
}

/// Parses a multi-line scene file.
pub fn parse_scene(text: &str) -> Result<Scene, SceneError> {
    let mut sample_rate = DEFAULT_SAMPLE_RATE;
    let mut events = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_content {
            seen_content = true;
            if let Some(value) = line.strip_prefix("sr=") {
                sample_rate = value
                    .trim()
                    .parse::<u32>()
                    .ok()
                    .filter(|&sr| sr > 0)
                    .ok_or_else(|| SceneError::Header { line: n, value: value.to_string() })?;
                continue;
            }
        }
        events.push(parse_record(line, n)?);
    }
    Scene::new(events, sample_rate)
}

/// Static source placement relative to the listener at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePose {
    /// x front, y right, z up; meters.
    pub position: [f64; 3],
    /// Unit quaternion (w, x, y, z).
    pub orientation: [f64; 4],
}

impl SourcePose {
    pub const IDENTITY_ORIENTATION: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

    pub fn from_spherical(azimuth_deg: f64, elevation_deg: f64, distance: f64) -> Self {
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        SourcePose {
            position: [
                distance * el.cos() * az.cos(),
                distance * el.cos() * az.sin(),
                distance * el.sin(),
            ],
            orientation: Self::IDENTITY_ORIENTATION,
        }
    }

    pub fn distance(&self) -> f64 {
        let [x, y, z] = self.position;
        (x * x + y * y + z * z).sqrt()
    }

    /// Azimuth in degrees, [-180, 180).
    pub fn azimuth_deg(&self) -> f64 {
        normalize_azimuth(self.position[1].atan2(self.position[0]).to_degrees())
    }

    pub fn elevation_deg(&self) -> f64 {
        let d = self.distance();
        if d == 0.0 {
            0.0
        } else {
            (self.position[2] / d).clamp(-1.0, 1.0).asin().to_degrees()
        }
    }
}

pub fn event_pose(e: &SceneEvent) -> SourcePose {
    SourcePose::from_spherical(e.azimuth, e.elevation, e.distance)
}
