//! `veinpulse` command line: `synth`, `extract` and `monitor`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::export;
use crate::frame::VideoSequence;
use crate::ingest::{load_sequence, SequenceManifest};
use crate::pgm;
use crate::pipeline::{self, method_name, Preset};
use crate::synth::{Phantom, PhantomSpec};
use crate::veinmap::Method;

pub const THREADS_ENV: &str = "VEINPULSE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "veinpulse", version, about = "Vein maps and heart rate from finger transillumination video")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic phantom to a frame directory with ground truth.
    Synth(SynthArgs),
    /// Write raw and post-processed vein maps for every frame.
    Extract(RunArgs),
    /// Track a vessel's width and report the heart rate.
    Monitor(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Phantom spec file (`key = value`); defaults apply when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Maxcurv,
    Rlt,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Maxcurv => Method::MaxCurvature,
            MethodArg::Rlt => Method::RepeatedLineTracking,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    PaperMc,
    PaperRlt,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::PaperMc => Preset::PaperMc,
            PresetArg::PaperRlt => Preset::PaperRlt,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub fps: f64,
    #[arg(long, value_enum, default_value = "maxcurv")]
    pub method: MethodArg,
    /// Post-processing preset; follows the method when omitted.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// `key = value` config file, or a previous run's report.json.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Single override, `key=value`; repeatable, applied after `--config`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Frame file glob inside the frames directory.
    #[arg(long, default_value = "*")]
    pub pattern: String,
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let outcome = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Monitor(a) => cmd_monitor(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config {
            key: THREADS_ENV.into(),
            message: format!("expected a positive integer, got {raw:?}"),
        })?;
    // Fails only if a pool already exists, e.g. a second run in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => PhantomSpec::parse(&read_to_string(p)?)?,
        None => PhantomSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    spec.validate()?;
    let phantom = Phantom::new(spec.clone())?;
    let frames_dir = args.out.join("frames");
    fs::create_dir_all(&frames_dir)?;
    use rayon::prelude::*;
    (0..phantom.frame_count()).into_par_iter().try_for_each(|i| {
        let f = phantom.render_frame(i);
        pgm::write(&frame_path(&frames_dir, i), f.width(), f.height(), &f.denormalize())
    })?;

    let truth = phantom.truth();
    let mut csv = String::from("frame_index,time_s,offset_px");
    for k in 0..spec.vessels.len() {
        csv.push_str(&format!(",width_px_{k}"));
    }
    csv.push('\n');
    for (i, (o, ws)) in truth.offsets.iter().zip(&truth.widths).enumerate() {
        csv.push_str(&format!("{i},{:.6},{o:.6}", i as f64 / spec.fps));
        for w in ws {
            csv.push_str(&format!(",{w:.6}"));
        }
        csv.push('\n');
    }
    export::write_text(&args.out.join("truth.csv"), &csv)?;
    for k in 0..spec.vessels.len() {
        let m = truth.centerline_mask(0, k);
        pgm::write(&args.out.join(format!("centerline_{k}.pgm")), m.width(), m.height(), &m.to_gray())?;
    }
    export::write_text(&args.out.join("spec.txt"), &spec.to_key_values())?;
    println!(
        "wrote {} frames ({}x{}, {} fps) to {}",
        phantom.frame_count(),
        spec.width,
        spec.height,
        spec.fps,
        frames_dir.display()
    );
    Ok(())
}

fn frame_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("frame_{i:05}.pgm"))
}

fn read_to_string(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(p.display().to_string()),
        _ => Error::Io(e),
    })
}

/// Effective config: defaults, then `--config`, then `--set`, then `--seed`.
pub fn effective_config(args: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::parse(&read_to_string(p)?)?,
        None => PipelineConfig::default(),
    };
    if !args.set.is_empty() {
        cfg = cfg.with_overrides(&args.set.join("\n"))?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Prepared {
    cfg: PipelineConfig,
    method: Method,
    preset: Preset,
    seq: VideoSequence,
    load_ms: f64,
}

fn prepare(args: &RunArgs) -> Result<Prepared> {
    let cfg = effective_config(args)?;
    let method: Method = args.method.into();
    let preset = args.preset.map(Preset::from).unwrap_or_else(|| Preset::for_method(method));
    let t = Instant::now();
    let seq = load_sequence(&SequenceManifest::new(&args.frames, args.fps).with_pattern(args.pattern.clone()))?;
    Ok(Prepared {
        cfg,
        method,
        preset,
        seq,
        load_ms: t.elapsed().as_secs_f64() * 1e3,
    })
}

fn report_base(command: &str, args: &RunArgs, p: &Prepared) -> serde_json::Value {
    json!({
        "command": command,
        "frames_dir": args.frames.display().to_string(),
        "pattern": args.pattern,
        "fps": args.fps,
        "frame_count": p.seq.len(),
        "method": method_name(p.method),
        "preset": p.preset.name(),
        "config": p.cfg.to_json(),
    })
}

fn write_report(out: &Path, mut report: serde_json::Value, outputs: serde_json::Value) -> Result<()> {
    report["outputs"] = outputs;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    export::write_text(&out.join("report.json"), &(text + "\n"))
}

pub fn cmd_extract(args: &RunArgs) -> Result<()> {
    let p = prepare(args)?;
    let t = Instant::now();
    let frames = pipeline::process_sequence(&p.seq, p.method, p.preset, &p.cfg)?;
    let extract_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let raw_dir = args.out.join("raw");
    let post_dir = args.out.join("post");
    let score_dir = args.out.join("scores");
    fs::create_dir_all(&score_dir)?;
    fs::create_dir_all(&raw_dir)?;
    fs::create_dir_all(&post_dir)?;
    for (i, f) in frames.iter().enumerate() {
        pgm::write(&frame_path(&score_dir, i), f.raw.width(), f.raw.height(), &f.scores)?;
        pgm::write(&frame_path(&raw_dir, i), f.raw.width(), f.raw.height(), &f.raw.to_gray())?;
        pgm::write(&frame_path(&post_dir, i), f.post.width(), f.post.height(), &f.post.to_gray())?;
    }
    export::write_text(&args.out.join("config.txt"), &p.cfg.to_key_values())?;
    let write_ms = t.elapsed().as_secs_f64() * 1e3;

    let mut report = report_base("extract", args, &p);
    report["timings_ms"] = json!({ "load": p.load_ms, "extract": extract_ms, "write": write_ms });
    let outputs = json!({
        "scores": score_dir.display().to_string(),
        "raw_maps": raw_dir.display().to_string(),
        "post_maps": post_dir.display().to_string(),
        "map_count": frames.len(),
        "config": args.out.join("config.txt").display().to_string(),
    });
    write_report(&args.out, report, outputs)?;
    println!("wrote {} raw and {} post-processed maps to {}", frames.len(), frames.len(), args.out.display());
    Ok(())
}

pub fn cmd_monitor(args: &RunArgs) -> Result<()> {
    let p = prepare(args)?;
    let out = pipeline::monitor(&p.seq, p.method, p.preset, &p.cfg)?;
    let a = &out.analysis;

    let path = |name: &str| args.out.join(name);
    export::write_text(&path("widths.csv"), &export::widths_csv(&out.widths))?;
    let mut stage_paths = serde_json::Map::new();
    for s in a.stages.all() {
        let name = format!("stage_{}.csv", s.stage.name());
        export::write_text(&path(&name), &export::stage_csv(s))?;
        stage_paths.insert(s.stage.name().into(), json!(path(&name).display().to_string()));
    }
    export::write_text(&path("peaks.csv"), &export::peaks_csv(&a.result))?;
    let summary = export::summary_line(&a.result);
    export::write_text(&path("summary.txt"), &format!("{summary}\n"))?;
    let traced = match p.cfg.peak_series {
        crate::config::PeakSeries::Derivative => &a.stages.derivative,
        crate::config::PeakSeries::Sg => &a.stages.sg,
    };
    export::write_text(&path("trace.svg"), &export::trace_svg(traced, &a.result))?;
    export::write_text(&path("config.txt"), &p.cfg.to_key_values())?;

    let mut report = report_base("monitor", args, &p);
    report["heart_rate"] = json!(a.result);
    report["prominence_threshold"] = json!(a.prominence_threshold);
    report["warnings"] = json!(a.warnings);
    report["tracking"] = json!({
        "reference": out.widths.reference,
        "gap_count": out.widths.gap_count(),
        "frames_total": out.widths.frames_total(),
    });
    report["timings_ms"] = json!({
        "load": p.load_ms,
        "extract": out.timings.extract_ms,
        "track": out.timings.track_ms,
        "hr": out.timings.hr_ms,
    });
    let outputs = json!({
        "widths": path("widths.csv").display().to_string(),
        "stages": stage_paths,
        "peaks": path("peaks.csv").display().to_string(),
        "summary": path("summary.txt").display().to_string(),
        "trace_svg": path("trace.svg").display().to_string(),
        "config": path("config.txt").display().to_string(),
    });
    write_report(&args.out, report, outputs)?;
    for w in &a.warnings {
        eprintln!("warning: {w}");
    }
    println!("{summary}");
    Ok(())
}
