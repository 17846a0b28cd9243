//! Gaussian-response weak classifiers with scalar Kalman updates.

use std::fmt;
use std::ops::Neg;

/// Binary class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn from_sign(v: f64) -> Option<Label> {
        if v == 1.0 {
            Some(Label::Pos)
        } else if v == -1.0 {
            Some(Label::Neg)
        } else {
            None
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }
}

impl Neg for Label {
    type Output = Label;

    fn neg(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Pos => f.write_str("+1"),
            Label::Neg => f.write_str("-1"),
        }
    }
}

/// Filter constants for weak-classifier updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KalmanParams {
    /// Measurement variance `R`.
    pub measurement_var: f64,
    /// Process variance `Q`, added after every update.
    pub process_var: f64,
    /// Initial state variance `P`.
    pub initial_var: f64,
    pub sigma_min: f64,
    /// Untrained means sit at `±init_offset`.
    pub init_offset: f64,
    pub init_sigma: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            measurement_var: 0.01,
            process_var: 1e-4,
            initial_var: 1.0,
            sigma_min: 1e-3,
            init_offset: 1e-2,
            init_sigma: 1.0,
        }
    }
}

/// Response models for the positive and negative class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPair {
    pub mu_pos: f64,
    pub sigma_pos: f64,
    pub mu_neg: f64,
    pub sigma_neg: f64,
    pub p_var_pos: f64,
    pub p_var_neg: f64,
}

impl GaussianPair {
    pub fn new(params: &KalmanParams) -> Self {
        Self {
            mu_pos: params.init_offset,
            sigma_pos: params.init_sigma,
            mu_neg: -params.init_offset,
            sigma_neg: params.init_sigma,
            p_var_pos: params.initial_var,
            p_var_neg: params.initial_var,
        }
    }

    /// Swaps the two class models.
    pub fn swapped(&self) -> Self {
        Self {
            mu_pos: self.mu_neg,
            sigma_pos: self.sigma_neg,
            mu_neg: self.mu_pos,
            sigma_neg: self.sigma_pos,
            p_var_pos: self.p_var_neg,
            p_var_neg: self.p_var_pos,
        }
    }

    fn is_finite(&self) -> bool {
        [
            self.mu_pos,
            self.sigma_pos,
            self.mu_neg,
            self.sigma_neg,
            self.p_var_pos,
            self.p_var_neg,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Log of the normal density up to the shared `-ln sqrt(2π)` term.
#[inline]
fn log_density(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -sigma.ln() - 0.5 * z * z
}

/// One Haar feature plus its class-conditional response models.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakClassifier {
    pub feature_index: usize,
    pub model: GaussianPair,
}

impl WeakClassifier {
    pub fn new(feature_index: usize, params: &KalmanParams) -> Self {
        Self {
            feature_index,
            model: GaussianPair::new(params),
        }
    }

    /// `+1` iff the positive density is at least the negative one (equal priors).
    #[inline]
    pub fn predict(&self, response: f64) -> Label {
        let m = &self.model;
        if log_density(response, m.mu_pos, m.sigma_pos) >= log_density(response, m.mu_neg, m.sigma_neg) {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    /// Scalar Kalman step on the model of `label`'s class. Returns the gain used.
    pub fn update(&mut self, response: f64, label: Label, params: &KalmanParams) -> f64 {
        let m = &mut self.model;
        let (mu, sigma, p) = match label {
            Label::Pos => (&mut m.mu_pos, &mut m.sigma_pos, &mut m.p_var_pos),
            Label::Neg => (&mut m.mu_neg, &mut m.sigma_neg, &mut m.p_var_neg),
        };
        let gain = *p / (*p + params.measurement_var);
        *mu += gain * (response - *mu);
        *p = (1.0 - gain) * *p + params.process_var;
        let dev = response - *mu;
        let var = (1.0 - gain) * *sigma * *sigma + gain * dev * dev;
        *sigma = var.sqrt().max(params.sigma_min);
        debug_assert!(m.is_finite());
        gain
    }

    /// Value-returning form of [`WeakClassifier::update`].
    pub fn updated(mut self, response: f64, label: Label, params: &KalmanParams) -> Self {
        self.update(response, label, params);
        self
    }
}

/// Accumulated correct/wrong counts of one pool member as seen by one selector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectorStats {
    pub lambda_wrong: f64,
    pub lambda_correct: f64,
}

impl Default for SelectorStats {
    /// One pseudo-count on each side.
    fn default() -> Self {
        Self {
            lambda_wrong: 1.0,
            lambda_correct: 1.0,
        }
    }
}

impl SelectorStats {
    pub fn record(&mut self, predicted: Label, truth: Label) {
        if predicted == truth {
            self.lambda_correct += 1.0;
        } else {
            self.lambda_wrong += 1.0;
        }
    }

    pub fn add_counts(&mut self, wrong: usize, correct: usize) {
        self.lambda_wrong += wrong as f64;
        self.lambda_correct += correct as f64;
    }

    pub fn error_rate(&self) -> f64 {
        self.lambda_wrong / (self.lambda_wrong + self.lambda_correct)
    }

    pub fn total(&self) -> f64 {
        self.lambda_wrong + self.lambda_correct
    }
}

pub fn record_outcome(mut stats: SelectorStats, predicted: Label, truth: Label) -> SelectorStats {
    stats.record(predicted, truth);
    stats
}
