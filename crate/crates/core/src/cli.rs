//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::error::{EvalError, IoError};
use crate::evaluation::{evaluate_trajectory, make_synthetic_sequence, run_protocol, track_sequence, Preset};
use crate::motion_sampling::LabelMode;
use crate::planted::{recovery_table, PlantedConfig};
use crate::sequence_io::{
    fmt_num, load_sequence, metrics_summary, parse_ground_truth, per_frame_csv, read_trajectory, report_summary,
    summary_text, trajectory_csv, write_frame, write_outputs, write_text, OutputPaths, RunConfig,
};

#[derive(Debug, Parser)]
#[command(name = "sparsetrack", version, about = "Part-based online boosting tracker with sparse classifier selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track an object through a directory of frames.
    Track(TrackArgs),
    /// Score a trajectory CSV against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic sequence, track it and report metrics.
    Bench(BenchArgs),
    /// Planted-pool selection experiment under label noise.
    Selectbench(SelectArgs),
}

/// Tracker and protocol settings shared by `track` and `bench`.
#[derive(Debug, Args)]
struct TrackerOpts {
    /// key=value settings applied before the flags below.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Number of seeded runs (seeds seed, seed+1, ...).
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of parts K.
    #[arg(long, value_name = "K")]
    parts: Option<usize>,
    /// Selectors per part N.
    #[arg(long, value_name = "N")]
    selectors: Option<usize>,
    /// Pool size M.
    #[arg(long, value_name = "M")]
    pool: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Search radius in pixels.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, value_name = "MODE")]
    label_mode: Option<LabelMode>,
    /// One pool per selector instead of one per part.
    #[arg(long)]
    per_selector_pools: bool,
    /// Replace the worst unselected pool member after each update.
    #[arg(long)]
    feature_replacement: bool,
    /// Selection rule: sparse or error.
    #[arg(long, value_name = "RULE", value_parser = ["sparse", "error"])]
    selection: Option<String>,
    /// Report squared center distances.
    #[arg(long)]
    squared_error: bool,
    /// Write every sparse solve as CSV below this directory.
    #[arg(long, value_name = "DIR")]
    dump_sparse: Option<PathBuf>,
}

impl TrackerOpts {
    fn settings(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut put = |k: &'static str, s: Option<String>| {
            if let Some(s) = s {
                v.push((k, s));
            }
        };
        put("runs", self.runs.map(|x| x.to_string()));
        put("seed", self.seed.map(|x| x.to_string()));
        put("parts", self.parts.map(|x| x.to_string()));
        put("selectors", self.selectors.map(|x| x.to_string()));
        put("pool", self.pool.map(|x| x.to_string()));
        put("lambda", self.lambda.map(|x| x.to_string()));
        put("radius", self.radius.map(|x| x.to_string()));
        put("stride", self.stride.map(|x| x.to_string()));
        put("label_mode", self.label_mode.map(|x| x.to_string()));
        put("selection", self.selection.clone());
        put("per_selector_pools", self.per_selector_pools.then(|| "true".into()));
        put("feature_replacement", self.feature_replacement.then(|| "true".into()));
        put("squared_error", self.squared_error.then(|| "true".into()));
        v
    }

    /// Defaults, then the config file, then flags.
    fn resolve(&self, extra: &[(&'static str, String)]) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path).map_err(|e| Failure::Runtime(e.to_string()))?;
        }
        for (k, v) in self.settings().iter().chain(extra) {
            cfg.set(k, v).map_err(|e| Failure::Usage(format!("--{}: {e}", k.replace('_', "-"))))?;
        }
        cfg.tracker.dump_dir.clone_from(&self.dump_sparse);
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct TrackArgs {
    /// Directory of frame images.
    #[arg(long, value_name = "DIR")]
    seq: PathBuf,
    /// Initial box x,y,w,h on the first frame (0-based pixels).
    #[arg(long, value_name = "X,Y,W,H")]
    init: Option<String>,
    /// Trajectory CSV of the first run.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Ground truth; enables the multi-run protocol and metrics.
    #[arg(long, value_name = "FILE")]
    gt: Option<PathBuf>,
    /// Summary file; printed to stdout when omitted.
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
    /// Per-frame median metrics CSV.
    #[arg(long, value_name = "FILE")]
    per_frame: Option<PathBuf>,
    #[command(flatten)]
    opts: TrackerOpts,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    traj: PathBuf,
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    /// Summary file; printed to stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    per_frame: Option<PathBuf>,
    #[arg(long)]
    squared_error: bool,
    /// Overlap needed for a frame to count as a success.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value = "motion", value_name = "NAME")]
    preset: Preset,
    /// Output directory for trajectory.csv, summary.txt and per_frame.csv.
    #[arg(long, value_name = "DIR", default_value = "bench-out")]
    out: PathBuf,
    /// Also write the generated frames and ground truth here.
    #[arg(long, value_name = "DIR")]
    frames_dir: Option<PathBuf>,
    #[command(flatten)]
    opts: TrackerOpts,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Label flip rates.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3])]
    rates: Vec<f64>,
    /// Samples per instance L.
    #[arg(long, default_value_t = 50)]
    samples: usize,
    /// Pool size M.
    #[arg(long, default_value_t = 200)]
    pool: usize,
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// Error rate of the planted member.
    #[arg(long, default_value_t = 0.05)]
    planted_error: f64,
    /// Error range lo,hi of the other members.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.3, 0.5])]
    rest_error: Vec<f64>,
    /// Table CSV; printed to stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: Into<EvalError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into().to_string())
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_text(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| Failure::Runtime(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn track(args: &TrackArgs) -> Result<(), Failure> {
    let extra: Vec<_> = args.init.iter().map(|s| ("init", s.clone())).collect();
    let cfg = args.opts.resolve(&extra)?;
    let init = cfg
        .init
        .ok_or_else(|| Failure::Usage("an initial box is required: --init x,y,w,h or init= in --config".into()))?;
    let source = load_sequence(&args.seq)?;
    match &args.gt {
        None => {
            log::info!("tracking {} frames with seed {}", source.files.len(), cfg.tracker.seed);
            let traj = track_sequence(&source, init, &cfg.tracker, |_| {})?;
            write_text(&args.out, &trajectory_csv(&traj))?;
        }
        Some(gt_path) => {
            let gt = parse_ground_truth(gt_path)?;
            log::info!("running {} seeded runs over {} frames", cfg.runs, source.files.len());
            let report = run_protocol(&source, &gt, &cfg.tracker, cfg.runs, &cfg.metric)?;
            let paths = OutputPaths {
                trajectory: Some(args.out.clone()),
                summary: args.summary.clone(),
                per_frame: args.per_frame.clone(),
            };
            write_outputs(Some(&report), &report.runs[0].trajectory, &paths)?;
            if args.summary.is_none() {
                emit(None, &summary_text(&report_summary(&report)))?;
            }
        }
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let mut cfg = RunConfig::default();
    cfg.set("squared_error", if args.squared_error { "true" } else { "false" })
        .and_then(|()| cfg.set("success_threshold", &args.threshold.to_string()))
        .map_err(Failure::Usage)?;
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let traj = read_trajectory(&args.traj)?;
    let gt = parse_ground_truth(&args.gt)?;
    let metrics = evaluate_trajectory(&traj, &gt, &cfg.metric)?;
    emit(args.out.as_deref(), &summary_text(&metrics_summary(&metrics, &cfg.metric)))?;
    if let Some(p) = &args.per_frame {
        write_text(p, &per_frame_csv(&traj, &metrics))?;
    }
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<(), Failure> {
    let cfg = args.opts.resolve(&[])?;
    let seq = make_synthetic_sequence(&args.preset.spec(cfg.tracker.seed));
    if let Some(dir) = &args.frames_dir {
        let width = seq.frames.len().saturating_sub(1).to_string().len();
        for (i, f) in seq.frames.iter().enumerate() {
            let path = dir.join(format!("frame{i:0width$}.png"));
            if i == 0 {
                std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
                    path: dir.clone(),
                    source,
                })?;
            }
            write_frame(f, &path)?;
        }
        let gt: String = seq
            .ground_truth
            .iter()
            .map(|r| format!("{},{},{},{}\n", r.x, r.y, r.w, r.h))
            .collect();
        write_text(&dir.join("groundtruth.txt"), &gt)?;
    }
    log::info!("bench {}: {} runs", args.preset, cfg.runs);
    let report = run_protocol(&seq.frames, &seq.ground_truth, &cfg.tracker, cfg.runs, &cfg.metric)?;
    let paths = OutputPaths {
        trajectory: Some(args.out.join("trajectory.csv")),
        summary: Some(args.out.join("summary.txt")),
        per_frame: Some(args.out.join("per_frame.csv")),
    };
    write_outputs(Some(&report), &report.runs[0].trajectory, &paths)?;
    emit(None, &summary_text(&report_summary(&report)))
}

fn selectbench(args: &SelectArgs) -> Result<(), Failure> {
    let (lo, hi) = (args.rest_error[0], args.rest_error[1]);
    let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
    if !(rate_ok(lo) && rate_ok(hi) && lo <= hi && rate_ok(args.planted_error)) || !args.rates.iter().all(|&r| rate_ok(r)) {
        return Err(Failure::Usage("error and flip rates must lie in [0, 1] with lo <= hi".into()));
    }
    if args.samples == 0 || args.pool == 0 {
        return Err(Failure::Usage("--samples and --pool must be positive".into()));
    }
    let cfg = PlantedConfig {
        samples: args.samples,
        pool_size: args.pool,
        planted_error: args.planted_error,
        rest_error: (lo, hi),
        lambda: args.lambda,
        ..Default::default()
    };
    let rows = recovery_table(&cfg, &args.rates, args.trials, args.seed)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut text = String::from("flip_rate,trials,sparse_recovery,error_recovery,fallbacks\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_num(r.flip_rate),
            r.trials,
            fmt_num(r.sparse_recovery),
            fmt_num(r.error_recovery),
            r.fallbacks
        ));
    }
    emit(args.out.as_deref(), &text)
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 1 on usage errors, 2 on runtime failures.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match &cli.command {
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Selectbench(a) => selectbench(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
