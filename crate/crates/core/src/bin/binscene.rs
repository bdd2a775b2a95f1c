use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use binaural_scene::metrics::{eval_pair, estimate_direction, MetricConfig, Templates};
use binaural_scene::pipeline::{
    load_scene, parse_segmenter, parse_source, read_binaural, run_render, PipelineError, RunConfig, SceneInput,
    SpatializerChoice,
};
use binaural_scene::renderer::{wola_roundtrip, FramePlan};
use binaural_scene::source::{synth_test_signal, SignalKind};
use binaural_scene::spatializer::HrirSet;
use binaural_scene::wav::WavEncoding;

#[derive(Parser)]
#[command(name = "binscene", version, about = "Render text-described sound scenes to binaural audio")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene file or prose to a stereo WAV.
    Render(Box<RenderArgs>),
    /// Parse a scene file or segment prose; print the events.
    Parse(ParseArgs),
    /// Compare a rendered WAV against a reference WAV.
    Eval(EvalArgs),
    /// Estimate the direction of each binaural WAV.
    Localize(LocalizeArgs),
    /// Check that analysis and synthesis reconstruct white noise.
    RoundtripSelftest(SelftestArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Scene file (`@` records, or a JSON array with a .json extension).
    #[arg(long, conflicts_with = "prose")]
    scene: Option<PathBuf>,
    /// Free-form description to segment.
    #[arg(long)]
    prose: Option<String>,
    /// `offline`, a service URL, or `service` to use the URL in the environment.
    #[arg(long)]
    segmenter: Option<String>,
    /// Keyword position table replacing the built-in one.
    #[arg(long)]
    defaults_table: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    input: InputArgs,
    /// JSON run config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `corpus:<dir>`, `synth` or `service:<url>`.
    #[arg(long)]
    source: Option<String>,
    /// `parametric` or `hrir:<dir>`.
    #[arg(long)]
    spatializer: Option<String>,
    /// Output WAV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// FFT size K, a power of two.
    #[arg(long)]
    fft: Option<usize>,
    /// Hop in samples; must be half the frame length.
    #[arg(long)]
    hop: Option<usize>,
    /// Event render threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for synthesized sources.
    #[arg(long)]
    seed: Option<u64>,
    /// Write 16-bit PCM instead of float32.
    #[arg(long)]
    pcm16: bool,
    /// Directory for per-frame spectra CSV dumps.
    #[arg(long)]
    dump_spectra: Option<PathBuf>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ParseArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Print `@` records instead of JSON.
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Append a CSV row (header written when the file is new).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Trim both clips to the shorter length instead of failing.
    #[arg(long)]
    trim: bool,
}

#[derive(Args)]
struct LocalizeArgs {
    #[arg(required = true)]
    clips: Vec<PathBuf>,
    /// HRIR directory supplying front/rear and elevation templates.
    #[arg(long)]
    hrir: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1.0)]
    seconds: f64,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    #[arg(long, default_value_t = 2048)]
    fft: usize,
    #[arg(long, default_value_t = 512)]
    hop: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn apply_input(cfg: &mut RunConfig, input: InputArgs) -> Result<(), PipelineError> {
    if let Some(path) = input.scene {
        cfg.input = Some(SceneInput::Scene(path));
    }
    if let Some(text) = input.prose {
        cfg.input = Some(SceneInput::Prose(text));
    }
    if let Some(s) = input.segmenter {
        cfg.segmenter = parse_segmenter(&s)?;
    }
    if input.defaults_table.is_some() {
        cfg.defaults_table = input.defaults_table;
    }
    Ok(())
}

fn render(args: RenderArgs) -> Result<(), PipelineError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply_input(&mut cfg, args.input)?;
    if let Some(s) = &args.source {
        cfg.source = parse_source(s)?;
    }
    if let Some(s) = &args.spatializer {
        cfg.spatializer = s.parse::<SpatializerChoice>()?;
    }
    cfg.out = args.out.or(cfg.out);
    cfg.report = args.report.or(cfg.report);
    cfg.fft_size = args.fft.unwrap_or(cfg.fft_size);
    cfg.hop = args.hop.unwrap_or(cfg.hop);
    cfg.workers = args.workers.unwrap_or(cfg.workers);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.dump_spectra = args.dump_spectra.or(cfg.dump_spectra);
    if args.pcm16 {
        cfg.encoding = WavEncoding::Pcm16;
    }
    if args.print_config {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    if cfg.out.is_none() {
        return Err(PipelineError::Config("--out is required".into()));
    }
    let outcome = run_render(&cfg)?;
    let r = &outcome.report;
    println!(
        "{}",
        json!({
            "out": cfg.out,
            "events": r.events.len(),
            "samples": outcome.clip.len(),
            "sample_rate": r.sample_rate,
            "gain": r.mix.gain,
            "total_ms": r.timings.total_ms,
        })
    );
    Ok(())
}

fn parse(args: ParseArgs) -> Result<(), PipelineError> {
    let mut cfg = RunConfig::default();
    let text = args.text;
    apply_input(&mut cfg, args.input)?;
    let scene = load_scene(&cfg)?;
    if text {
        print!("{}", scene.to_text());
    } else {
        println!("{}", json!({ "sample_rate": scene.sample_rate, "events": scene.events }));
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), PipelineError> {
    let mut pred = read_binaural(&args.pred)?;
    let mut reference = read_binaural(&args.reference)?;
    if args.trim {
        let n = pred.len().min(reference.len());
        pred = pred.resized(n);
        reference = reference.resized(n);
    }
    let report = eval_pair(&pred, &reference, &MetricConfig::default())?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    if let Some(path) = &args.csv {
        let fresh = !path.exists();
        let io = |source| PipelineError::Io { path: path.clone(), source };
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if fresh {
            writeln!(f, "pred,ref,{}", binaural_scene::metrics::MetricReport::CSV_HEADER).map_err(io)?;
        }
        writeln!(f, "{},{},{}", args.pred.display(), args.reference.display(), report.csv_row()).map_err(io)?;
    }
    Ok(())
}

fn localize(args: LocalizeArgs) -> Result<(), PipelineError> {
    let templates = match &args.hrir {
        Some(dir) => Some(Templates::from_hrir_set(&HrirSet::load_dir(dir)?)),
        None => None,
    };
    for path in &args.clips {
        let clip = read_binaural(path)?;
        let est = estimate_direction(&clip, templates.as_ref())?;
        println!("{}", json!({ "clip": path, "direction": est }));
    }
    Ok(())
}

fn selftest(args: SelftestArgs) -> Result<(), PipelineError> {
    let plan = FramePlan { fft_size: args.fft, frame_length: args.hop * 2, hop: args.hop, pad: 0 };
    let clip = synth_test_signal(SignalKind::Noise, args.seconds, args.sample_rate, args.seed);
    let start = Instant::now();
    let back = wola_roundtrip(&clip, &plan)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let err = back.samples.iter().zip(&clip.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let pass = err < 1e-6;
    println!("{}", json!({ "max_abs_error": err, "elapsed_ms": elapsed_ms, "pass": pass }));
    if pass {
        Ok(())
    } else {
        Err(PipelineError::Config(format!("round-trip error {err:e} exceeds 1e-6")))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Render(a) => render(*a),
        Command::Parse(a) => parse(a),
        Command::Eval(a) => eval(a),
        Command::Localize(a) => localize(a),
        Command::RoundtripSelftest(a) => selftest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
