//! Tracking metrics, the multi-run protocol and synthetic benchmarks.

mod synthetic;

pub use synthetic::{make_synthetic_sequence, MotionPath, Occlusion, Preset, SyntheticSequence, SyntheticSpec};

use crate::error::{EvalError, IoError};
use crate::imaging::{Frame, Rect};
use crate::motion_sampling::{TrackStep, Tracker, TrackerConfig};

pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 0.5;

/// Distance between box centers.
pub fn center_error(gt: &Rect, tr: &Rect) -> f64 {
    center_error_squared(gt, tr).sqrt()
}

/// Squared distance between box centers.
pub fn center_error_squared(gt: &Rect, tr: &Rect) -> f64 {
    let (gx, gy) = gt.center();
    let (tx, ty) = tr.center();
    (gx - tx).powi(2) + (gy - ty).powi(2)
}

/// Intersection over union.
pub fn overlap(gt: &Rect, tr: &Rect) -> f64 {
    let inter = gt.intersect(tr).map_or(0.0, |r| r.area());
    let union = gt.area() + tr.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Fraction of overlaps strictly above `threshold`.
pub fn success_rate(overlaps: &[f64], threshold: f64) -> Result<f64, EvalError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(EvalError::Threshold(threshold));
    }
    if overlaps.is_empty() {
        return Ok(0.0);
    }
    Ok(overlaps.iter().filter(|&&o| o > threshold).count() as f64 / overlaps.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ErrorMetric {
    #[default]
    Euclidean,
    Squared,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricOptions {
    pub threshold: f64,
    pub error: ErrorMetric,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_SUCCESS_THRESHOLD,
            error: ErrorMetric::Euclidean,
        }
    }
}

/// Per-frame tracker output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub frame: usize,
    pub rect: Rect,
    pub confidence: f64,
}

/// Metrics of one trajectory against ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub center_errors: Vec<f64>,
    pub overlaps: Vec<f64>,
    pub mean_error: f64,
    pub success_rate: f64,
}

/// Scores `trajectory` against `gt`, indexed by frame number.
pub fn evaluate_trajectory(
    trajectory: &[TrajectoryPoint],
    gt: &[Rect],
    options: &MetricOptions,
) -> Result<RunMetrics, EvalError> {
    let missing: Vec<usize> = trajectory.iter().map(|p| p.frame).filter(|&f| f >= gt.len()).collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingGroundTruth { missing });
    }
    let center_errors: Vec<f64> = trajectory
        .iter()
        .map(|p| match options.error {
            ErrorMetric::Euclidean => center_error(&gt[p.frame], &p.rect),
            ErrorMetric::Squared => center_error_squared(&gt[p.frame], &p.rect),
        })
        .collect();
    let overlaps: Vec<f64> = trajectory.iter().map(|p| overlap(&gt[p.frame], &p.rect)).collect();
    let mean_error = mean(&center_errors);
    let success_rate = success_rate(&overlaps, options.threshold)?;
    Ok(RunMetrics {
        center_errors,
        overlaps,
        mean_error,
        success_rate,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Ordered frames that can be fetched by index.
pub trait FrameSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn frame(&self, index: usize) -> Result<Frame, IoError>;
}

impl FrameSource for [Frame] {
    fn len(&self) -> usize {
        <[Frame]>::len(self)
    }

    fn frame(&self, index: usize) -> Result<Frame, IoError> {
        Ok(self[index].clone())
    }
}

impl FrameSource for Vec<Frame> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn frame(&self, index: usize) -> Result<Frame, IoError> {
        Ok(self[index].clone())
    }
}

/// Tracks every frame of `source` from `init` on frame 0, calling `on_step`
/// after each tracked frame. Frame 0 is reported with the initial box.
pub fn track_sequence<S: FrameSource + ?Sized>(
    source: &S,
    init: Rect,
    config: &TrackerConfig,
    mut on_step: impl FnMut(&TrackStep),
) -> Result<Vec<TrajectoryPoint>, EvalError> {
    if source.is_empty() {
        return Ok(Vec::new());
    }
    let first = source.frame(0)?;
    let mut tracker = Tracker::init(config.clone(), &first, init)?;
    let ii = crate::imaging::IntegralImage::new(&first);
    let confidence = tracker.ensemble().confidence(&ii, &init).map_err(crate::error::TrackError::from)?;
    let mut out = Vec::with_capacity(source.len());
    out.push(TrajectoryPoint {
        frame: 0,
        rect: init,
        confidence,
    });
    for i in 1..source.len() {
        let frame = source.frame(i)?;
        let step = tracker.track_frame(&frame)?;
        on_step(&step);
        out.push(TrajectoryPoint {
            frame: i,
            rect: step.location,
            confidence: step.confidence,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub trajectory: Vec<TrajectoryPoint>,
    pub metrics: RunMetrics,
    /// Mean per-frame disagreement of training labels with sampling regions.
    pub mean_label_noise: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub runs: Vec<RunReport>,
    /// Arithmetic mean of the per-run mean errors.
    pub mean_error: f64,
    /// Arithmetic mean of the per-run success rates.
    pub success_rate: f64,
    /// Per-frame medians across runs.
    pub median_center_errors: Vec<f64>,
    pub median_overlaps: Vec<f64>,
    pub options: MetricOptions,
}

impl EvalReport {
    pub fn from_runs(runs: Vec<RunReport>, options: MetricOptions) -> Self {
        let per_run_errors: Vec<f64> = runs.iter().map(|r| r.metrics.mean_error).collect();
        let per_run_success: Vec<f64> = runs.iter().map(|r| r.metrics.success_rate).collect();
        let frames = runs.iter().map(|r| r.metrics.overlaps.len()).min().unwrap_or(0);
        let column = |f: usize, get: &dyn Fn(&RunMetrics) -> &[f64]| {
            let mut v: Vec<f64> = runs.iter().map(|r| get(&r.metrics)[f]).collect();
            median(&mut v)
        };
        let median_center_errors = (0..frames).map(|f| column(f, &|m| &m.center_errors)).collect();
        let median_overlaps = (0..frames).map(|f| column(f, &|m| &m.overlaps)).collect();
        Self {
            mean_error: mean(&per_run_errors),
            success_rate: mean(&per_run_success),
            median_center_errors,
            median_overlaps,
            runs,
            options,
        }
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }
}

/// Runs the tracker `n_runs` times with seeds `config.seed ..` and scores
/// each run against `gt`.
pub fn run_protocol<S: FrameSource + ?Sized>(
    source: &S,
    gt: &[Rect],
    config: &TrackerConfig,
    n_runs: usize,
    options: &MetricOptions,
) -> Result<EvalReport, EvalError> {
    if source.len() > gt.len() {
        return Err(EvalError::MissingGroundTruth {
            missing: (gt.len()..source.len()).collect(),
        });
    }
    if !(options.threshold > 0.0 && options.threshold < 1.0) {
        return Err(EvalError::Threshold(options.threshold));
    }
    let mut runs = Vec::with_capacity(n_runs);
    for r in 0..n_runs {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(r as u64);
        let mut noise = Vec::new();
        let trajectory = track_sequence(source, gt[0], &cfg, |s| noise.push(s.label_noise))?;
        let metrics = evaluate_trajectory(&trajectory, gt, options)?;
        log::info!(
            "run {r} (seed {}): mean error {:.3}, success {:.3}",
            cfg.seed,
            metrics.mean_error,
            metrics.success_rate
        );
        runs.push(RunReport {
            seed: cfg.seed,
            trajectory,
            metrics,
            mean_label_noise: mean(&noise),
        });
    }
    Ok(EvalReport::from_runs(runs, *options))
}
