use std::path::PathBuf;

use thiserror::Error;

use crate::imaging::Rect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("frame must be non-empty, got {width}x{height}")]
    EmptyFrame { width: usize, height: usize },
    #[error("expected {expected} pixels, got {actual}")]
    PixelCount { expected: usize, actual: usize },
    #[error("pixel {index} is not finite")]
    NonFinite { index: usize },
    #[error("rect {rect:?} is outside the {width}x{height} image")]
    OutOfBounds { rect: Rect, width: usize, height: usize },
    #[error("feature degenerates to an empty cell on a {patch_w}x{patch_h} patch")]
    DegenerateFeature { patch_w: usize, patch_h: usize },
    #[error("feature scaled for {expected:?} patches evaluated on {actual:?}")]
    PatchSize { expected: (usize, usize), actual: (usize, usize) },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("prediction vector {index} has length {actual}, expected {expected}")]
    Ragged { index: usize, expected: usize, actual: usize },
    #[error("label matrix has no columns")]
    NoColumns,
    #[error("label vector has length {actual}, label matrix has {expected} rows")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("label {index} is {value}, expected -1 or +1")]
    NotALabel { index: usize, value: f64 },
    #[error("regularization weight must be positive and finite, got {0}")]
    Lambda(f64),
    #[error("every pool index is excluded")]
    Exhausted,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("invalid ensemble config: {0}")]
    Config(String),
    #[error("confidence {0} is outside [0, 1]")]
    Domain(f64),
    #[error("training batch needs at least one positive and one negative sample")]
    OneSidedBatch,
    #[error("{path}: cannot write solver dump: {message}")]
    Dump { path: PathBuf, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("location {rect:?} is outside the {width}x{height} frame")]
    State { rect: Rect, width: usize, height: usize },
    #[error("no candidate locations")]
    NoCandidates,
    #[error("negative sampling annulus ({inner}, {outer}] has no in-frame positions")]
    EmptyAnnulus { inner: f64, outer: f64 },
    #[error("invalid tracker config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: no image frames found")]
    EmptySequence { path: PathBuf },
    #[error("{path}: frame is {actual:?}, sequence frames are {expected:?}")]
    MixedDimensions {
        path: PathBuf,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: width and height must be positive, got {w}x{h}")]
    Value { path: PathBuf, line: usize, w: i64, h: i64 },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ground truth is missing frames {missing:?}")]
    MissingGroundTruth { missing: Vec<usize> },
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
}
