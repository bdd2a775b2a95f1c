//! End-to-end render: scene or prose in, stereo WAV and JSON report out.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{MetricConfig, MetricError};
use crate::mixer::{mix, MixError, MixReport, Timeline};
use crate::renderer::{BinauralClip, FramePlan, RenderError, Renderer};
use crate::scene::{event_pose, parse_scene, Scene, SceneError, SceneEvent};
use crate::segmenter::{segment_text, DefaultsTable, SegmentError, SegmenterConfig, SegmenterEndpoint, ENDPOINT_ENV};
use crate::source::{fetch_mono, SourceBackend, SourceError};
use crate::spatializer::{HrirSet, SpatialConfig, SpatialError, Spatializer};
use crate::wav::{self, WavEncoding, WavError};

/// Read when `--source service` is given without a URL.
pub const SOURCE_ENDPOINT_ENV: &str = "BINSCENE_SOURCE_URL";

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    SceneCore,
    Segmenter,
    SourceProvider,
    Spatializer,
    Renderer,
    Mixer,
    Metrics,
    Cli,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error("event {label:?}: {source}")]
    Source { label: String, source: SourceError },
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Wav { path: PathBuf, source: WavError },
    #[error("config: {0}")]
    Config(String),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Scene(_) => Stage::SceneCore,
            PipelineError::Segment(_) => Stage::Segmenter,
            PipelineError::Source { .. } => Stage::SourceProvider,
            PipelineError::Spatial(_) => Stage::Spatializer,
            PipelineError::Render(_) => Stage::Renderer,
            PipelineError::Mix(_) => Stage::Mixer,
            PipelineError::Metric(_) => Stage::Metrics,
            PipelineError::Io { .. } | PipelineError::Wav { .. } | PipelineError::Config(_) => Stage::Cli,
        }
    }

    /// `{"error": ..., "stage": ...}`
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.to_string(), "stage": self.stage() }).to_string()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Where the scene comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneInput {
    /// A scene file (`@` records, or a JSON array when the name ends in `.json`).
    Scene(PathBuf),
    Prose(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SpatializerChoice {
    Parametric,
    Hrir { dir: PathBuf },
}

impl FromStr for SpatializerChoice {
    type Err = PipelineError;

    /// `parametric` or `hrir:<dir>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("hrir:") {
            _ if s == "parametric" => Ok(SpatializerChoice::Parametric),
            Some(dir) if !dir.is_empty() => Ok(SpatializerChoice::Hrir { dir: dir.into() }),
            _ => Err(PipelineError::Config(format!("spatializer {s:?}; expected parametric or hrir:<dir>"))),
        }
    }
}

/// `offline`, a URL, or `service` to read the URL from the environment.
pub fn parse_segmenter(s: &str) -> Result<SegmenterEndpoint, PipelineError> {
    match s {
        "offline" => Ok(SegmenterEndpoint::Offline),
        "service" | "url" => std::env::var(ENDPOINT_ENV)
            .map(|url| SegmenterEndpoint::Service { url })
            .map_err(|_| PipelineError::Config(format!("--segmenter {s} needs {ENDPOINT_ENV}"))),
        url if url.contains("://") => Ok(SegmenterEndpoint::Service { url: url.to_string() }),
        other => Err(PipelineError::Config(format!("segmenter {other:?}; expected offline or a URL"))),
    }
}

/// Source backend flag; `service` alone reads the URL from the environment.
pub fn parse_source(s: &str) -> Result<SourceBackend, PipelineError> {
    if s == "service" {
        let url = std::env::var(SOURCE_ENDPOINT_ENV)
            .map_err(|_| PipelineError::Config(format!("--source service needs {SOURCE_ENDPOINT_ENV}")))?;
        return Ok(SourceBackend::Service { endpoint: url, timeout_s: 120.0 });
    }
    s.parse().map_err(|e: SourceError| PipelineError::Config(e.to_string()))
}

/// Everything a render depends on. Saved to JSON, it reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: Option<SceneInput>,
    pub segmenter: SegmenterEndpoint,
    pub segmenter_timeout_s: f64,
    /// Replaces the built-in keyword position table.
    pub defaults_table: Option<PathBuf>,
    pub source: SourceBackend,
    pub spatializer: SpatializerChoice,
    pub spatial: SpatialConfig,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub encoding: WavEncoding,
    pub fft_size: usize,
    /// Frame length is twice the hop.
    pub hop: usize,
    /// 0 uses every available core.
    pub workers: usize,
    /// Seeds synthesized sources; the DSP path uses no randomness.
    pub seed: u64,
    pub metrics: MetricConfig,
    /// Per-frame spectra as CSV, one file per event (`<dir>/event_<i>.csv`).
    pub dump_spectra: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let plan = FramePlan::default();
        RunConfig {
            input: None,
            segmenter: SegmenterEndpoint::Offline,
            segmenter_timeout_s: 60.0,
            defaults_table: None,
            source: SourceBackend::Synth { seed: 0 },
            spatializer: SpatializerChoice::Parametric,
            spatial: SpatialConfig::default(),
            out: None,
            report: None,
            encoding: WavEncoding::Float32,
            fft_size: plan.fft_size,
            hop: plan.hop,
            workers: 0,
            seed: 0,
            metrics: MetricConfig::default(),
            dump_spectra: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn frame_plan(&self) -> Result<FramePlan, PipelineError> {
        let plan = FramePlan { fft_size: self.fft_size, frame_length: self.hop * 2, hop: self.hop, pad: 0 };
        plan.validate()?;
        Ok(plan)
    }

    fn source_backend(&self) -> SourceBackend {
        match &self.source {
            SourceBackend::Synth { .. } => SourceBackend::Synth { seed: self.seed },
            other => other.clone(),
        }
    }
}

/// Loads the scene named by the config, segmenting prose when needed.
pub fn load_scene(cfg: &RunConfig) -> Result<Scene, PipelineError> {
    match &cfg.input {
        None => Err(PipelineError::Config("either a scene file or prose is required".into())),
        Some(SceneInput::Scene(path)) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            if path.extension().is_some_and(|e| e == "json") {
                Ok(Scene::from_json(&text, crate::scene::DEFAULT_SAMPLE_RATE)?)
            } else {
                Ok(parse_scene(&text)?)
            }
        }
        Some(SceneInput::Prose(text)) => {
            let defaults_table = match &cfg.defaults_table {
                Some(p) => DefaultsTable::load(p)?,
                None => DefaultsTable::default(),
            };
            let seg = SegmenterConfig {
                endpoint: cfg.segmenter.clone(),
                timeout_s: cfg.segmenter_timeout_s,
                defaults_table,
                ..SegmenterConfig::default()
            };
            Ok(segment_text(text, &seg)?)
        }
    }
}

pub fn build_spatializer(cfg: &RunConfig) -> Result<Spatializer, PipelineError> {
    Ok(match &cfg.spatializer {
        SpatializerChoice::Parametric => Spatializer::Parametric(cfg.spatial),
        SpatializerChoice::Hrir { dir } => {
            Spatializer::Hrir { set: Arc::new(HrirSet::load_dir(dir)?), config: cfg.spatial }
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EventReport {
    pub label: String,
    pub start_time: f64,
    pub duration: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    /// Rendered length including delay padding.
    pub samples: usize,
    pub peak: f64,
}

/// Wall-clock milliseconds per stage; per-event stages are summed over events.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StageTimings {
    pub scene_ms: f64,
    pub source_ms: f64,
    pub spatializer_ms: f64,
    pub renderer_ms: f64,
    pub mixer_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RenderReport {
    pub sample_rate: u32,
    pub events: Vec<EventReport>,
    pub mix: MixReport,
    pub timings: StageTimings,
}

pub struct RenderOutcome {
    pub scene: Scene,
    pub clip: BinauralClip,
    pub report: RenderReport,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

struct EventOutput {
    clip: BinauralClip,
    times: [Duration; 3],
}

fn render_one(
    index: usize,
    event: &SceneEvent,
    sample_rate: u32,
    cfg: &RunConfig,
    backend: &SourceBackend,
    spatializer: &Spatializer,
    plan: FramePlan,
) -> Result<EventOutput, PipelineError> {
    let t0 = Instant::now();
    let mono = fetch_mono(event, backend, sample_rate)
        .map_err(|source| PipelineError::Source { label: event.label.clone(), source })?;
    let t1 = Instant::now();
    let field = spatializer.field(&event_pose(event), plan.frame_count(mono.len()), plan.fft_size, sample_rate)?;
    let t2 = Instant::now();
    let renderer = Renderer::new(plan.padded_for(&field))?;
    let clip = match &cfg.dump_spectra {
        None => renderer.render(&mono, &field)?,
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join(format!("event_{index}.csv"));
            let file = std::fs::File::create(&path).map_err(io_err(&path))?;
            let mut w = std::io::BufWriter::new(file);
            renderer.render_with_dump(&mono, &field, &mut w)?
        }
    };
    Ok(EventOutput { clip, times: [t1 - t0, t2 - t1, t2.elapsed()] })
}

/// Renders a scene that is already in memory.
pub fn render_scene(scene: &Scene, cfg: &RunConfig) -> Result<(BinauralClip, RenderReport), PipelineError> {
    let start = Instant::now();
    let plan = cfg.frame_plan()?;
    let spatializer = build_spatializer(cfg)?;
    let backend = cfg.source_backend();
    let sr = scene.sample_rate;
    let work = || -> Result<Vec<EventOutput>, PipelineError> {
        scene
            .events
            .par_iter()
            .enumerate()
            .map(|(i, e)| render_one(i, e, sr, cfg, &backend, &spatializer, plan))
            .collect()
    };
    let outputs = if cfg.workers == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?
            .install(work)?
    };

    let mut timings = StageTimings::default();
    for o in &outputs {
        timings.source_ms += ms(o.times[0]);
        timings.spatializer_ms += ms(o.times[1]);
        timings.renderer_ms += ms(o.times[2]);
    }
    let t_mix = Instant::now();
    let mut timeline = Timeline::new(sr);
    let mut events = Vec::with_capacity(outputs.len());
    for (e, o) in scene.events.iter().zip(outputs) {
        events.push(EventReport {
            label: e.label.clone(),
            start_time: e.start_time,
            duration: e.duration,
            azimuth: e.azimuth,
            elevation: e.elevation,
            distance: e.distance,
            samples: o.clip.len(),
            peak: o.clip.peak(),
        });
        timeline.place(o.clip, e.start_time)?;
    }
    let (clip, mix_report) = mix(&timeline)?;
    timings.mixer_ms = ms(t_mix.elapsed());
    timings.total_ms = ms(start.elapsed());
    log::info!(
        "rendered {} events: source {:.1} ms, spatializer {:.1} ms, renderer {:.1} ms, mixer {:.1} ms",
        events.len(),
        timings.source_ms,
        timings.spatializer_ms,
        timings.renderer_ms,
        timings.mixer_ms
    );
    Ok((clip, RenderReport { sample_rate: sr, events, mix: mix_report, timings }))
}

/// Full run: load or segment the scene, render it, and write the configured
/// artifacts.
pub fn run_render(cfg: &RunConfig) -> Result<RenderOutcome, PipelineError> {
    let t0 = Instant::now();
    let scene = load_scene(cfg)?;
    let scene_ms = ms(t0.elapsed());
    log::info!("scene: {} events at {} Hz ({scene_ms:.1} ms)", scene.events.len(), scene.sample_rate);
    let (clip, mut report) = render_scene(&scene, cfg)?;
    report.timings.scene_ms = scene_ms;
    report.timings.total_ms += scene_ms;
    if let Some(path) = &cfg.out {
        write_binaural(path, &clip, cfg.encoding)?;
    }
    if let Some(path) = &cfg.report {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, json).map_err(io_err(path))?;
    }
    Ok(RenderOutcome { scene, clip, report })
}

pub fn write_binaural(path: &Path, clip: &BinauralClip, encoding: WavEncoding) -> Result<(), PipelineError> {
    wav::write_wav(path, &[&clip.left, &clip.right], clip.sample_rate, encoding)
        .map_err(|source| PipelineError::Wav { path: path.to_path_buf(), source })
}

/// Reads a stereo WAV; mono files are duplicated to both ears.
pub fn read_binaural(path: &Path) -> Result<BinauralClip, PipelineError> {
    let data = wav::read_wav(path).map_err(|source| PipelineError::Wav { path: path.to_path_buf(), source })?;
    let mut ch = data.channels.into_iter();
    let left = ch.next().unwrap_or_default();
    let right = ch.next().unwrap_or_else(|| left.clone());
    Ok(BinauralClip::new(left, right, data.sample_rate))
}
