//! Planted-pool selection experiment.
//!
//! A batch of `L` samples with known true labels is scored by a pool of `M`
//! synthetic classifiers. One pool member (the planted one) disagrees with
//! the truth on a small fraction of samples and the rest disagree on a large
//! fraction. A fraction of the observed labels is then flipped, and the
//! ℓ1 selection rule is compared with the accumulated-error rule on how often
//! each recovers the planted member.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::SparseError;
use crate::sparse_select::{
    select_by_error, select_classifier, LabelMatrix, LabelVector, NnL1Solver, SolverOptions, SparseProblem,
};
use crate::weak_learn::{Label, SelectorStats};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedConfig {
    pub samples: usize,
    pub pool_size: usize,
    /// Disagreement rate of the planted member with the true labels.
    pub planted_error: f64,
    /// Disagreement rates of the other members are uniform on this range.
    pub rest_error: (f64, f64),
    pub lambda: f64,
    pub solver: SolverOptions,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            samples: 50,
            pool_size: 200,
            planted_error: 0.05,
            rest_error: (0.3, 0.5),
            lambda: 0.01,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedInstance {
    pub truth: Vec<Label>,
    pub observed: Vec<Label>,
    /// `predictions[m][i]` is pool member `m`'s label for sample `i`.
    pub predictions: Vec<Vec<Label>>,
    pub planted: usize,
}

/// Flips exactly `round(rate · len)` distinct entries.
fn flip_fraction(labels: &[Label], rate: f64, rng: &mut ChaCha8Rng) -> Vec<Label> {
    let mut out = labels.to_vec();
    let count = ((rate * labels.len() as f64).round() as usize).min(labels.len());
    for i in sample(rng, labels.len(), count) {
        out[i] = -out[i];
    }
    out
}

pub fn generate_instance(config: &PlantedConfig, flip_rate: f64, seed: u64) -> PlantedInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<Label> = (0..config.samples)
        .map(|_| if rng.gen::<bool>() { Label::Pos } else { Label::Neg })
        .collect();
    let planted = rng.gen_range(0..config.pool_size);
    let (lo, hi) = config.rest_error;
    let predictions = (0..config.pool_size)
        .map(|m| {
            let err = if m == planted { config.planted_error } else { rng.gen_range(lo..=hi) };
            flip_fraction(&truth, err, &mut rng)
        })
        .collect();
    let observed = flip_fraction(&truth, flip_rate, &mut rng);
    PlantedInstance {
        truth,
        observed,
        predictions,
        planted,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub sparse_pick: usize,
    pub error_pick: usize,
    /// The ℓ1 rule could not decide and fell back to the error rule.
    pub fell_back: bool,
}

pub fn run_trial(config: &PlantedConfig, instance: &PlantedInstance) -> Result<TrialOutcome, SparseError> {
    let errors: Vec<f64> = instance
        .predictions
        .iter()
        .map(|col| {
            let mut stats = SelectorStats::default();
            for (&p, &y) in col.iter().zip(&instance.observed) {
                stats.record(p, y);
            }
            stats.error_rate()
        })
        .collect();
    let error_pick = select_by_error(&errors, &[])?;

    let l = instance.observed.len();
    let phi = LabelMatrix::from_fn(l, instance.predictions.len(), |i, m| instance.predictions[m][i]);
    let problem = SparseProblem::assemble(phi, LabelVector::from_labels(&instance.observed), config.lambda)?;
    let solution = NnL1Solver::new(&problem).options(config.solver).solve();
    let pick = select_classifier(&solution, &[])?;
    let (sparse_pick, fell_back) = if solution.converged && solution.beta[pick] > 0.0 {
        (pick, false)
    } else {
        (error_pick, true)
    };
    Ok(TrialOutcome {
        sparse_pick,
        error_pick,
        fell_back,
    })
}

/// Recovery rates of both rules at one flip rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryRow {
    pub flip_rate: f64,
    pub trials: usize,
    pub sparse_recovery: f64,
    pub error_recovery: f64,
    pub fallbacks: usize,
}

/// Runs `trials` instances per flip rate with seeds `seed, seed + 1, ...`.
pub fn recovery_table(
    config: &PlantedConfig,
    flip_rates: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<RecoveryRow>, SparseError> {
    flip_rates
        .iter()
        .map(|&rate| {
            let (mut sparse, mut error, mut fallbacks) = (0usize, 0usize, 0usize);
            for t in 0..trials {
                let inst = generate_instance(config, rate, seed.wrapping_add(t as u64));
                let out = run_trial(config, &inst)?;
                sparse += usize::from(out.sparse_pick == inst.planted);
                error += usize::from(out.error_pick == inst.planted);
                fallbacks += usize::from(out.fell_back);
            }
            let n = trials.max(1) as f64;
            Ok(RecoveryRow {
                flip_rate: rate,
                trials,
                sparse_recovery: sparse as f64 / n,
                error_recovery: error as f64 / n,
                fallbacks,
            })
        })
        .collect()
}
