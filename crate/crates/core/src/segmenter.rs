//! Prose → scene segmentation.
//!
//! With an endpoint configured, the prose goes to an external language-model
//! service that must answer with `@`-records. Offline, a small keyword
//! grammar extracts events, explicit numbers and direction words, and a
//! defaults table supplies positions for sources the prose leaves unplaced.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{self, HttpFailure};
use crate::scene::{parse_scene, Scene, SceneError, SceneEvent, DEFAULT_SAMPLE_RATE};

/// Environment override for the segmentation service URL.
pub const ENDPOINT_ENV: &str = "BINSCENE_SEGMENTER_URL";

pub const DEFAULT_PROMPT: &str = include_str!("prompt.txt");

const DEFAULT_DURATION: f64 = 5.0;
const DEFAULT_DISTANCE: f64 = 1.5;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("segmentation service unreachable: {0}")]
    ServiceUnreachable(String),
    #[error("segmentation reply is not a valid scene ({source}); raw reply: {raw:?}")]
    MalformedServiceReply { raw: String, source: SceneError },
    #[error("no sound events found in the text")]
    NoEventsFound,
    #[error("extracted event is invalid: {0}")]
    InvalidEvent(#[from] SceneError),
    #[error("defaults table line {line}: {reason}")]
    DefaultsTable { line: usize, reason: String },
    #[error("reading defaults table: {0}")]
    Io(#[from] std::io::Error),
}

/// Fallback placement for one keyword.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefaultPosition {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
}

/// Keyword → position heuristics, consulted in order; first match wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultsTable {
    pub entries: Vec<(String, DefaultPosition)>,
}

impl Default for DefaultsTable {
    /// Built-in heuristics: dogs low, birds high, thunder far overhead-behind,
    /// footsteps below.
    fn default() -> Self {
        let e = |k: &str, azimuth, elevation, distance| {
            (k.to_string(), DefaultPosition { azimuth, elevation, distance })
        };
        DefaultsTable {
            entries: vec![
                e("dog", 0.0, -30.0, 2.0),
                e("bird", 0.0, 45.0, 3.0),
                e("thunder", 180.0, 30.0, 50.0),
                e("footsteps", 0.0, -40.0, 1.0),
            ],
        }
    }
}

impl DefaultsTable {
    /// Parses `keyword = az, el, dist` lines; `#` comments and blank lines
    /// are skipped.
    pub fn parse(text: &str) -> Result<Self, SegmentError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| SegmentError::DefaultsTable { line: i + 1, reason: reason.to_string() };
            let (key, values) = line.split_once('=').ok_or_else(|| bad("expected `keyword = az, el, dist`"))?;
            let nums: Vec<f64> = values
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("non-numeric value"))?;
            let [azimuth, elevation, distance] = nums[..] else {
                return Err(bad("expected three values"));
            };
            let key = key.trim().to_lowercase();
            if key.is_empty() {
                return Err(bad("empty keyword"));
            }
            if !(-90.0..=90.0).contains(&elevation) || distance.is_nan() || distance <= 0.0 || !azimuth.is_finite() {
                return Err(bad("position out of range"));
            }
            entries.push((key, DefaultPosition { azimuth, elevation, distance }));
        }
        Ok(DefaultsTable { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SegmentError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// First entry whose keyword prefixes one of the label's words
    /// ("dog" matches "dogs").
    pub fn lookup(&self, label: &str) -> Option<DefaultPosition> {
        let words: Vec<&str> = label.split_whitespace().collect();
        self.entries
            .iter()
            .find(|(k, _)| {
                let kw: Vec<&str> = k.split_whitespace().collect();
                match kw.as_slice() {
                    [single] => words.iter().any(|w| w.starts_with(single)),
                    _ => label.contains(k.as_str()),
                }
            })
            .map(|(_, p)| *p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SegmenterEndpoint {
    Offline,
    Service { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub endpoint: SegmenterEndpoint,
    pub prompt_template: String,
    pub timeout_s: f64,
    pub defaults_table: DefaultsTable,
    pub sample_rate: u32,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            endpoint: SegmenterEndpoint::Offline,
            prompt_template: DEFAULT_PROMPT.to_string(),
            timeout_s: 60.0,
            defaults_table: DefaultsTable::default(),
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

#[derive(Serialize)]
struct PromptRequest {
    prompt: String,
}

#[derive(Deserialize)]
struct PromptReply {
    text: String,
}

pub fn segment_text(prose: &str, cfg: &SegmenterConfig) -> Result<Scene, SegmentError> {
    match &cfg.endpoint {
        SegmenterEndpoint::Offline => {
            let mut scene = rule_fallback(prose, &cfg.defaults_table)?;
            scene.sample_rate = cfg.sample_rate;
            Ok(scene)
        }
        SegmenterEndpoint::Service { url } => {
            if prose.trim().is_empty() {
                return Err(SegmentError::NoEventsFound);
            }
            let prompt = PromptRequest { prompt: format!("{}{}", cfg.prompt_template, prose) };
            let bytes = http::post_json(url, &prompt, Duration::from_secs_f64(cfg.timeout_s.max(0.001)))
                .map_err(|e| match e {
                    HttpFailure::Unreachable(m) | HttpFailure::Body(m) => SegmentError::ServiceUnreachable(m),
                })?;
            let raw = String::from_utf8_lossy(&bytes).into_owned();
            let reply: PromptReply = serde_json::from_str(&raw).map_err(|e| SegmentError::MalformedServiceReply {
                raw: raw.clone(),
                source: SceneError::Json(e.to_string()),
            })?;
            let mut scene = parse_scene(&reply.text)
                .map_err(|source| SegmentError::MalformedServiceReply { raw: reply.text.clone(), source })?;
            if !reply.text.lines().any(|l| l.trim_start().starts_with("sr=")) {
                scene.sample_rate = cfg.sample_rate;
            }
            Ok(scene)
        }
    }
}

// ---------------------------------------------------------------------------
// Offline grammar

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Number(f64),
}

fn tokenize(clause: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for raw in clause.split(|c: char| c.is_whitespace() || matches!(c, ',' | ':' | '(' | ')' | '"' | '=')) {
        let piece: String = raw
            .trim_matches(|c: char| !(c.is_alphanumeric() || c == '-' || c == '.' || c == '+'))
            .trim_end_matches('.')
            .to_lowercase();
        if piece.is_empty() {
            continue;
        }
        // split "4s", "2.5m", "30deg" into number + unit
        let split = piece
            .char_indices()
            .find(|(_, c)| c.is_alphabetic())
            .map(|(i, _)| i)
            .unwrap_or(piece.len());
        let (num, unit) = piece.split_at(split);
        let numeric = !num.is_empty()
            && num.chars().any(|c| c.is_ascii_digit())
            && num.trim_start_matches(['-', '+']).chars().all(|c| c.is_ascii_digit() || c == '.');
        match num.parse::<f64>() {
            Ok(v) if numeric && v.is_finite() => {
                out.push(Token::Number(v));
                if !unit.is_empty() {
                    out.push(Token::Word(unit.to_string()));
                }
            }
            _ => {
                let word: String = piece.chars().filter(|c| c.is_alphanumeric() || *c == '-' || *c == '\'').collect();
                let word = word.trim_matches('-').to_string();
                if !word.is_empty() {
                    out.push(Token::Word(word));
                }
            }
        }
    }
    out
}

/// Splits on sentence punctuation and on the word "then".
fn clauses(prose: &str) -> Vec<String> {
    let chars: Vec<char> = prose.chars().collect();
    let mut pieces = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let boundary = match c {
            '!' | '?' | ';' | '\n' => true,
            // a period between digits is a decimal point
            '.' => !(i > 0
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())),
            _ => false,
        };
        if boundary {
            pieces.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    pieces.push(cur);
    let mut out = Vec::new();
    for piece in pieces {
        let mut cur: Vec<&str> = Vec::new();
        for w in piece.split_whitespace() {
            let bare = w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
            if bare == "then" {
                out.push(cur.join(" "));
                cur.clear();
            } else {
                cur.push(w);
            }
        }
        out.push(cur.join(" "));
    }
    out.into_iter().filter(|c| !c.trim().is_empty()).collect()
}

const SECONDS: &[&str] = &["s", "sec", "secs", "second", "seconds"];
const METERS: &[&str] = &["m", "meter", "meters", "metre", "metres"];
const START_WORDS: &[&str] = &["start", "starts", "starting", "begin", "begins", "beginning", "after", "from"];
const AZIMUTH_WORDS: &[&str] = &["azimuth", "az"];
const ELEVATION_WORDS: &[&str] = &["elevation", "el", "elev"];
const DISTANCE_WORDS: &[&str] = &["distance", "dist"];

/// Words that never form part of an event label.
const STOPWORDS: &[&str] = &[
    "a", "an", "the", "on", "to", "for", "at", "from", "of", "in", "and", "with", "is", "are", "it", "its", "side",
    "away", "about", "around", "while", "lasting", "seconds", "second", "sec", "secs", "s", "meters", "meter",
    "metres", "metre", "m", "degrees", "degree", "deg", "azimuth", "az", "elevation", "el", "elev", "distance",
    "dist", "start", "starts", "starting", "begin", "begins", "beginning", "after", "someone", "somewhere",
    "there", "here", "far", "near", "close", "by", "me", "us", "you", "listener", "position", "located", "coming",
    "comes", "sound", "sounds", "of", "up", "down", "over", "under", "overhead", "direction", "then", "also",
    "finally", "first", "next", "later", "meanwhile", "hear", "heard", "can", "be", "we", "i", "distant",
];

#[derive(Debug, Default, Clone, Copy)]
struct Cues {
    lateral: Option<f64>,
    longitudinal: Option<f64>,
    vertical: Option<f64>,
}

fn direction_cue(word: &str, cues: &mut Cues) -> bool {
    match word {
        "left" | "leftside" => cues.lateral = Some(-90.0),
        "right" | "rightside" => cues.lateral = Some(90.0),
        "front" | "ahead" | "forward" => cues.longitudinal = Some(0.0),
        "behind" | "rear" | "back" | "backwards" => cues.longitudinal = Some(180.0),
        "above" | "upper" | "overhead" | "up" | "high" => cues.vertical = Some(45.0),
        "below" | "lower" | "beneath" | "down" | "low" | "under" | "underneath" => cues.vertical = Some(-45.0),
        _ => return false,
    }
    true
}

fn cue_azimuth(c: &Cues) -> Option<f64> {
    match (c.lateral, c.longitudinal) {
        (Some(lat), Some(0.0)) => Some(lat / 2.0),
        (Some(lat), Some(_)) => Some(lat.signum() * 135.0),
        (Some(lat), None) => Some(lat),
        (None, Some(lon)) => Some(lon),
        (None, None) => None,
    }
}

#[derive(Debug, Default)]
struct ClauseParse {
    label_words: Vec<String>,
    duration: Option<f64>,
    start: Option<f64>,
    distance: Option<f64>,
    azimuth: Option<f64>,
    elevation: Option<f64>,
    cues: Cues,
}

fn word_at(tokens: &[Token], i: usize) -> Option<&str> {
    match tokens.get(i) {
        Some(Token::Word(w)) => Some(w.as_str()),
        _ => None,
    }
}

fn parse_clause(clause: &str) -> ClauseParse {
    let tokens = tokenize(clause);
    let mut out = ClauseParse::default();
    for (i, tok) in tokens.iter().enumerate() {
        match tok {
            Token::Number(v) => {
                let prev: Vec<&str> = (i.saturating_sub(3)..i).filter_map(|j| word_at(&tokens, j)).collect();
                let next = word_at(&tokens, i + 1);
                let prev_has = |set: &[&str]| prev.iter().any(|w| set.contains(w));
                // keyword directly before the number, allowing one linking word
                let nearest_is = |set: &[&str]| match i.checked_sub(1).and_then(|j| word_at(&tokens, j)) {
                    Some(w) if set.contains(&w) => true,
                    Some("of" | "is" | "at" | "to") => {
                        i.checked_sub(2).and_then(|j| word_at(&tokens, j)).is_some_and(|w| set.contains(&w))
                    }
                    _ => false,
                };
                if nearest_is(AZIMUTH_WORDS) {
                    out.azimuth = Some(*v);
                } else if nearest_is(ELEVATION_WORDS) {
                    out.elevation = Some(*v);
                } else if next.is_some_and(|w| SECONDS.contains(&w)) {
                    if prev_has(START_WORDS) {
                        out.start = Some(*v);
                    } else {
                        out.duration = Some(*v);
                    }
                } else if next.is_some_and(|w| METERS.contains(&w)) || nearest_is(DISTANCE_WORDS) {
                    out.distance = Some(*v);
                }
            }
            Token::Word(w) => {
                if direction_cue(w, &mut out.cues) || STOPWORDS.contains(&w.as_str()) {
                    continue;
                }
                if w.chars().any(|c| c.is_alphabetic()) {
                    out.label_words.push(w.clone());
                }
            }
        }
    }
    out
}

/// Deterministic offline segmentation.
pub fn rule_fallback(prose: &str, defaults: &DefaultsTable) -> Result<Scene, SegmentError> {
    let mut events: Vec<SceneEvent> = Vec::new();
    for clause in clauses(prose) {
        let parsed = parse_clause(&clause);
        if parsed.label_words.is_empty() {
            continue;
        }
        let label = parsed.label_words.join(" ");
        let table = defaults.lookup(&label);
        let has_cue = parsed.azimuth.is_some()
            || parsed.elevation.is_some()
            || parsed.cues.lateral.is_some()
            || parsed.cues.longitudinal.is_some()
            || parsed.cues.vertical.is_some();
        let (azimuth, elevation) = if has_cue {
            (
                parsed.azimuth.or(cue_azimuth(&parsed.cues)).unwrap_or(0.0),
                parsed.elevation.or(parsed.cues.vertical).unwrap_or(0.0),
            )
        } else {
            table.map_or((0.0, 0.0), |p| (p.azimuth, p.elevation))
        };
        let distance = parsed.distance.or(table.map(|p| p.distance)).unwrap_or(DEFAULT_DISTANCE);
        let duration = parsed.duration.unwrap_or(DEFAULT_DURATION);
        let start = parsed.start.unwrap_or_else(|| events.last().map_or(0.0, SceneEvent::end_time));
        events.push(SceneEvent::new(label, duration, azimuth, elevation, distance, start)?);
    }
    if events.is_empty() {
        return Err(SegmentError::NoEventsFound);
    }
    Ok(Scene::new(events, DEFAULT_SAMPLE_RATE)?)
}
