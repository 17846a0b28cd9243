//! Part-based online boosting tracker whose weak-classifier selection is
//! robust to label noise in self-generated training data.
//!
//! The observed labels of a training batch are split into a sparse
//! combination of pool predictions plus a sparse noise term, found by a
//! non-negative ℓ1 program ([`sparse_select`]). The pool member carrying
//! the largest coefficient is selected into the strong classifier of each
//! object part ([`ensemble`]), and parts are fused with Noisy-OR to localize
//! the object frame by frame ([`motion_sampling`]).

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod motion_sampling;
pub mod planted;
pub mod sequence_io;
pub mod sparse_select;
pub mod weak_learn;

pub use error::{EnsembleError, EvalError, ImagingError, IoError, SparseError, TrackError};
pub use imaging::{Frame, IntegralImage, Rect};
pub use weak_learn::Label;
