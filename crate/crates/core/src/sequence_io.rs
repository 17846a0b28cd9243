//! Frame loading, ground-truth and trajectory files, run configuration and
//! report output.
//!
//! All coordinates are 0-based pixels with `(x, y)` the top-left corner.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ensemble::{Exclusion, PartBox, PartLayout, SelectionRule};
use crate::error::IoError;
use crate::evaluation::{ErrorMetric, EvalReport, FrameSource, MetricOptions, RunMetrics, TrajectoryPoint};
use crate::imaging::{Frame, Rect};
use crate::motion_sampling::{LabelMode, TrackerConfig};

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "pgm", "ppm", "pnm", "jpg", "jpeg"];

pub const TRAJECTORY_HEADER: &str = "frame,x,y,w,h,confidence";

/// An ordered list of same-sized image files, decoded on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSource {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, PartialEq, Eq)]
enum Chunk<'a> {
    Digits(&'a str),
    Text(&'a str),
}

fn chunks(s: &str) -> Vec<Chunk<'_>> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = s.as_bytes();
    while start < bytes.len() {
        let digit = bytes[start].is_ascii_digit();
        let end = bytes[start..]
            .iter()
            .position(|b| b.is_ascii_digit() != digit)
            .map_or(bytes.len(), |p| start + p);
        let piece = &s[start..end];
        out.push(if digit { Chunk::Digits(piece) } else { Chunk::Text(piece) });
        start = end;
    }
    out
}

/// Orders names so that embedded numbers compare by value: `img2 < img10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (ca, cb) = (chunks(a), chunks(b));
    for (x, y) in ca.iter().zip(&cb) {
        let ord = match (x, y) {
            (Chunk::Digits(x), Chunk::Digits(y)) => {
                let (tx, ty) = (x.trim_start_matches('0'), y.trim_start_matches('0'));
                tx.len().cmp(&ty.len()).then_with(|| tx.cmp(ty)).then_with(|| x.len().cmp(&y.len()))
            }
            (Chunk::Digits(_), Chunk::Text(_)) => Ordering::Less,
            (Chunk::Text(_), Chunk::Digits(_)) => Ordering::Greater,
            (Chunk::Text(x), Chunk::Text(y)) => x.cmp(y),
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Lists the image files of `dir` in frame order and checks that they share
/// one size. Pixels are decoded only when a frame is requested.
pub fn load_sequence(dir: &Path) -> Result<SequenceSource, IoError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && is_image(&path) {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(IoError::EmptySequence { path: dir.to_path_buf() });
    }
    files.sort_by(|a, b| {
        let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        natural_cmp(&name(a), &name(b))
    });
    let dims = |p: &Path| {
        image::image_dimensions(p).map_err(|e| IoError::Decode {
            path: p.to_path_buf(),
            message: e.to_string(),
        })
    };
    let (width, height) = dims(&files[0])?;
    for f in &files[1..] {
        let d = dims(f)?;
        if d != (width, height) {
            return Err(IoError::MixedDimensions {
                path: f.clone(),
                expected: (width, height),
                actual: d,
            });
        }
    }
    Ok(SequenceSource {
        dir: dir.to_path_buf(),
        files,
        width,
        height,
    })
}

/// Decodes one image file to grayscale in `[0, 1]`.
pub fn read_frame(path: &Path) -> Result<Frame, IoError> {
    let img = image::open(path).map_err(|e| IoError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let gray = img.to_luma16();
    let (w, h) = gray.dimensions();
    let pixels = gray.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect();
    Ok(Frame::new(w as usize, h as usize, pixels)?)
}

/// Writes a frame as an 8-bit grayscale image; the format follows the
/// file extension.
pub fn write_frame(frame: &Frame, path: &Path) -> Result<(), IoError> {
    let bytes: Vec<u8> = frame
        .pixels()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(frame.width() as u32, frame.height() as u32, bytes)
        .expect("buffer matches frame size");
    img.save(path).map_err(|e| IoError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

impl FrameSource for SequenceSource {
    fn len(&self) -> usize {
        self.files.len()
    }

    fn frame(&self, index: usize) -> Result<Frame, IoError> {
        let path = &self.files[index];
        let frame = read_frame(path)?;
        if (frame.width() as u32, frame.height() as u32) != (self.width, self.height) {
            return Err(IoError::MixedDimensions {
                path: path.clone(),
                expected: (self.width, self.height),
                actual: (frame.width() as u32, frame.height() as u32),
            });
        }
        Ok(frame)
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses `x,y,w,h` (comma or whitespace separated). Non-integer values are
/// rounded to the nearest pixel.
pub fn parse_rect(text: &str) -> Result<Rect, String> {
    let fields = split_fields(text);
    if fields.len() != 4 {
        return Err(format!("expected 4 values x,y,w,h, got {}", fields.len()));
    }
    let mut v = [0i64; 4];
    for (slot, f) in v.iter_mut().zip(&fields) {
        let x: f64 = f.parse().map_err(|_| format!("'{f}' is not a number"))?;
        if !x.is_finite() || x.abs() > f64::from(i32::MAX) {
            return Err(format!("'{f}' is out of range"));
        }
        *slot = x.round() as i64;
    }
    Ok(Rect::new(v[0] as i32, v[1] as i32, v[2] as i32, v[3] as i32))
}

/// One rect per non-blank, non-comment line.
pub fn parse_ground_truth_str(text: &str, path: &Path) -> Result<Vec<Rect>, IoError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let r = parse_rect(line).map_err(|message| IoError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        if r.w <= 0 || r.h <= 0 {
            return Err(IoError::Value {
                path: path.to_path_buf(),
                line: i + 1,
                w: i64::from(r.w),
                h: i64::from(r.h),
            });
        }
        out.push(r);
    }
    Ok(out)
}

pub fn parse_ground_truth(path: &Path) -> Result<Vec<Rect>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_ground_truth_str(&text, path)
}

/// Formats a number with 6 significant digits, shortest form.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn trajectory_csv(trajectory: &[TrajectoryPoint]) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for p in trajectory {
        let r = p.rect;
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.frame,
            r.x,
            r.y,
            r.w,
            r.h,
            fmt_num(p.confidence)
        ));
    }
    s
}

pub fn parse_trajectory_str(text: &str, path: &Path) -> Result<Vec<TrajectoryPoint>, IoError> {
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, message: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    match lines.next() {
        Some((_, h)) if h.trim() == TRAJECTORY_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header '{TRAJECTORY_HEADER}'"))),
    }
    let mut out = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(parse_err(i + 1, format!("expected 6 fields, got {}", f.len())));
        }
        let int = |s: &str| s.parse::<i32>().map_err(|_| parse_err(i + 1, format!("'{s}' is not an integer")));
        let frame = f[0]
            .parse::<usize>()
            .map_err(|_| parse_err(i + 1, format!("'{}' is not a frame index", f[0])))?;
        let rect = Rect::new(int(f[1])?, int(f[2])?, int(f[3])?, int(f[4])?);
        let confidence = f[5]
            .parse::<f64>()
            .map_err(|_| parse_err(i + 1, format!("'{}' is not a number", f[5])))?;
        out.push(TrajectoryPoint { frame, rect, confidence });
    }
    Ok(out)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryPoint>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_trajectory_str(&text, path)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// `key=value` lines sorted by key.
pub fn summary_text(entries: &BTreeMap<String, String>) -> String {
    entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn metric_name(options: &MetricOptions) -> &'static str {
    match options.error {
        ErrorMetric::Euclidean => "euclidean",
        ErrorMetric::Squared => "squared",
    }
}

/// Summary of a single scored trajectory.
pub fn metrics_summary(metrics: &RunMetrics, options: &MetricOptions) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("error_metric".into(), metric_name(options).into());
    m.insert("frames".into(), metrics.overlaps.len().to_string());
    m.insert("mean_position_error".into(), fmt_num(metrics.mean_error));
    m.insert("success_rate".into(), fmt_num(metrics.success_rate));
    m.insert("success_threshold".into(), fmt_num(options.threshold));
    m
}

/// Summary of a multi-run report, with per-run values under `run<r>_` keys.
pub fn report_summary(report: &EvalReport) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("error_metric".into(), metric_name(&report.options).into());
    m.insert(
        "frames".into(),
        report.runs.first().map_or(0, |r| r.metrics.overlaps.len()).to_string(),
    );
    m.insert("mean_position_error".into(), fmt_num(report.mean_error));
    m.insert("runs".into(), report.runs.len().to_string());
    m.insert("success_rate".into(), fmt_num(report.success_rate));
    m.insert("success_threshold".into(), fmt_num(report.options.threshold));
    let width = report.runs.len().saturating_sub(1).to_string().len();
    for (r, run) in report.runs.iter().enumerate() {
        let key = |name: &str| format!("run{r:0width$}_{name}");
        m.insert(key("label_noise"), fmt_num(run.mean_label_noise));
        m.insert(key("mean_position_error"), fmt_num(run.metrics.mean_error));
        m.insert(key("seed"), run.seed.to_string());
        m.insert(key("success_rate"), fmt_num(run.metrics.success_rate));
    }
    m
}

/// `frame,center_error,overlap` rows of one run.
pub fn per_frame_csv(trajectory: &[TrajectoryPoint], metrics: &RunMetrics) -> String {
    let mut s = String::from("frame,center_error,overlap\n");
    for ((p, e), o) in trajectory.iter().zip(&metrics.center_errors).zip(&metrics.overlaps) {
        s.push_str(&format!("{},{},{}\n", p.frame, fmt_num(*e), fmt_num(*o)));
    }
    s
}

/// `frame,median_center_error,median_overlap` rows across runs.
pub fn median_csv(report: &EvalReport) -> String {
    let mut s = String::from("frame,median_center_error,median_overlap\n");
    for (f, (e, o)) in report.median_center_errors.iter().zip(&report.median_overlaps).enumerate() {
        s.push_str(&format!("{f},{},{}\n", fmt_num(*e), fmt_num(*o)));
    }
    s
}

/// Output locations; `None` skips that file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputPaths {
    pub trajectory: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub per_frame: Option<PathBuf>,
}

/// Writes the trajectory CSV, the sorted summary and the per-frame medians.
pub fn write_outputs(
    report: Option<&EvalReport>,
    trajectory: &[TrajectoryPoint],
    paths: &OutputPaths,
) -> Result<(), IoError> {
    if let Some(p) = &paths.trajectory {
        write_text(p, &trajectory_csv(trajectory))?;
    }
    if let Some(report) = report {
        if let Some(p) = &paths.summary {
            write_text(p, &summary_text(&report_summary(report)))?;
        }
        if let Some(p) = &paths.per_frame {
            write_text(p, &median_csv(report))?;
        }
    }
    Ok(())
}

/// Everything a `track` or `bench` run needs besides its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub init: Option<Rect>,
    pub tracker: TrackerConfig,
    pub runs: usize,
    pub metric: MetricOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            init: None,
            tracker: TrackerConfig::default(),
            runs: 5,
            metric: MetricOptions::default(),
        }
    }
}

/// Keys accepted by [`RunConfig::set`] and config files.
pub const CONFIG_KEYS: [&str; 26] = [
    "exclusion",
    "feature_replacement",
    "init",
    "init_rounds",
    "label_mode",
    "label_threshold",
    "lambda",
    "layout",
    "logistic_scale",
    "min_feature_size",
    "neg_count",
    "neg_inner",
    "neg_outer",
    "parts",
    "per_selector_pools",
    "pool",
    "pos_radius",
    "radius",
    "runs",
    "seed",
    "selection",
    "selectors",
    "solver",
    "squared_error",
    "stride",
    "success_threshold",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value '{value}' for {key}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("invalid value '{value}' for {key}, expected true or false")),
    }
}

/// Parses `x0:y0:x1:y1;...` fractions of the object box.
pub fn parse_layout(value: &str) -> Result<PartLayout, String> {
    let mut parts = Vec::new();
    for item in value.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let v: Vec<f64> = item
            .split(':')
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("invalid layout value '{s}'")))
            .collect::<Result<_, _>>()?;
        if v.len() != 4 {
            return Err(format!("layout part '{item}' needs x0:y0:x1:y1"));
        }
        parts.push(PartBox::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())?);
    }
    PartLayout::custom(parts).map_err(|e| e.to_string())
}

impl RunConfig {
    /// Applies one setting; later calls override earlier ones.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let t = &mut self.tracker;
        let e = &mut t.ensemble;
        match key {
            "init" => self.init = Some(parse_rect(value)?),
            "runs" => self.runs = parse_value(key, value)?,
            "seed" => t.seed = parse_value(key, value)?,
            "parts" => e.layout = PartLayout::first(parse_value(key, value)?).map_err(|e| e.to_string())?,
            "layout" => e.layout = parse_layout(value)?,
            "selectors" => e.selectors = parse_value(key, value)?,
            "pool" => e.pool_size = parse_value(key, value)?,
            "lambda" => e.lambda = parse_value(key, value)?,
            "logistic_scale" => e.logistic_scale = parse_value(key, value)?,
            "min_feature_size" => e.min_feature_size = parse_value(key, value)?,
            "per_selector_pools" => e.per_selector_pools = parse_bool(key, value)?,
            "feature_replacement" => e.feature_replacement = parse_bool(key, value)?,
            "selection" => {
                e.selection = match value {
                    "sparse" => SelectionRule::Sparse,
                    "error" => SelectionRule::AccumulatedError,
                    _ => return Err(format!("invalid value '{value}' for {key}, expected sparse or error")),
                }
            }
            "exclusion" => {
                e.exclusion = match value {
                    "argmax" => Exclusion::InArgmax,
                    "program" => Exclusion::InProgram,
                    _ => return Err(format!("invalid value '{value}' for {key}, expected argmax or program")),
                }
            }
            "solver" => {
                e.solver.method = match value {
                    "active-set" => crate::sparse_select::SolverMethod::ActiveSet,
                    "cd" => crate::sparse_select::SolverMethod::CoordinateDescent,
                    _ => return Err(format!("invalid value '{value}' for {key}, expected active-set or cd")),
                }
            }
            "radius" => t.search_radius = parse_value(key, value)?,
            "stride" => t.stride = parse_value(key, value)?,
            "pos_radius" => t.pos_radius = parse_value(key, value)?,
            "neg_inner" => t.neg_inner = parse_value(key, value)?,
            "neg_outer" => t.neg_outer = parse_value(key, value)?,
            "neg_count" => t.neg_count = parse_value(key, value)?,
            "label_mode" => t.label_mode = value.parse::<LabelMode>()?,
            "label_threshold" => t.label_threshold = parse_value(key, value)?,
            "init_rounds" => t.init_rounds = parse_value(key, value)?,
            "squared_error" => {
                self.metric.error = if parse_bool(key, value)? {
                    ErrorMetric::Squared
                } else {
                    ErrorMetric::Euclidean
                }
            }
            "success_threshold" => self.metric.threshold = parse_value(key, value)?,
            _ => return Err(format!("unknown config key '{key}'")),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file_str(&mut self, text: &str, path: &Path) -> Result<(), IoError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| IoError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got '{line}'")))?;
            self.set(key.trim(), value).map_err(err)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), IoError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        self.apply_file_str(&text, path)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        if self.runs == 0 {
            return Err(IoError::Config("runs must be at least 1".into()));
        }
        if !(self.metric.threshold > 0.0 && self.metric.threshold < 1.0) {
            return Err(IoError::Config(format!(
                "success threshold must lie in (0, 1), got {}",
                self.metric.threshold
            )));
        }
        self.tracker.validate().map_err(|e| IoError::Config(e.to_string()))
    }
}
