//! Label-noise-tolerant classifier selection.
//!
//! Observed labels `y` are decomposed as `y ≈ Φβ + e⁺ − e⁻` where column `m`
//! of the label matrix `Φ` holds pool member `m`'s predictions on the batch.
//! All coefficients are non-negative and found by minimizing
//!
//! ```text
//! ‖W c − y‖² + λ ‖c‖₁   subject to c ≥ 0,   W = [Φ  I  −I],  c = (β, e⁺, e⁻)
//! ```
//!
//! The pool member with the largest `β` is selected; mislabeled samples are
//! meant to be absorbed by the noise coefficients `e⁺`, `e⁻`.
//!
//! The identity blocks of `W` are never materialized: a noise coordinate
//! touches exactly one residual entry, so a full coordinate sweep costs
//! `O(L·M + L)`.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::error::SparseError;
use crate::weak_learn::Label;

mod active_set;

pub use active_set::DualActiveSet;

/// `L × M` matrix of ±1 pool predictions, stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl LabelMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Label) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for m in 0..cols {
            for i in 0..rows {
                data.push(f(i, m).value());
            }
        }
        Self { rows, cols, data }
    }

    /// Samples (`L`).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Pool size (`M`).
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn column(&self, m: usize) -> &[f64] {
        &self.data[m * self.rows..(m + 1) * self.rows]
    }

    #[inline]
    pub fn get(&self, i: usize, m: usize) -> f64 {
        self.data[m * self.rows + i]
    }

    /// Reorders columns so that new column `j` is old column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.cols);
        let mut data = Vec::with_capacity(self.data.len());
        for &m in perm {
            data.extend_from_slice(self.column(m));
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

/// Builds `Φ` from per-classifier prediction vectors (one vector per column).
pub fn build_label_matrix(predictions: &[Vec<Label>]) -> Result<LabelMatrix, SparseError> {
    let first = predictions.first().ok_or(SparseError::NoColumns)?;
    let rows = first.len();
    for (index, col) in predictions.iter().enumerate() {
        if col.len() != rows {
            return Err(SparseError::Ragged {
                index,
                expected: rows,
                actual: col.len(),
            });
        }
    }
    Ok(LabelMatrix::from_fn(rows, predictions.len(), |i, m| predictions[m][i]))
}

/// Observed ±1 labels of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVector(Vec<f64>);

impl LabelVector {
    pub fn from_labels(labels: &[Label]) -> Self {
        Self(labels.iter().map(|l| l.value()).collect())
    }

    /// Rejects anything other than exactly `-1.0` or `+1.0`.
    pub fn from_values(values: &[f64]) -> Result<Self, SparseError> {
        for (index, &value) in values.iter().enumerate() {
            if Label::from_sign(value).is_none() {
                return Err(SparseError::NotALabel { index, value });
            }
        }
        Ok(Self(values.to_vec()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Which block of `c = (β, e⁺, e⁻)` a flat coordinate falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Beta(usize),
    NoisePos(usize),
    NoiseNeg(usize),
}

/// The system `y = W c` with `W = [Φ I −I]` and its ℓ1 weight.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseProblem {
    phi: LabelMatrix,
    y: LabelVector,
    lambda: f64,
}

impl SparseProblem {
    pub fn assemble(phi: LabelMatrix, y: LabelVector, lambda: f64) -> Result<Self, SparseError> {
        if y.len() != phi.rows() {
            return Err(SparseError::LengthMismatch {
                expected: phi.rows(),
                actual: y.len(),
            });
        }
        if phi.cols() == 0 {
            return Err(SparseError::NoColumns);
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(SparseError::Lambda(lambda));
        }
        if phi.rows() >= phi.cols() {
            log::debug!(
                "label matrix has {} samples for {} classifiers; expected fewer samples than classifiers",
                phi.rows(),
                phi.cols()
            );
        }
        Ok(Self { phi, y, lambda })
    }

    pub fn phi(&self) -> &LabelMatrix {
        &self.phi
    }

    pub fn y(&self) -> &LabelVector {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples(&self) -> usize {
        self.phi.rows()
    }

    pub fn pool_size(&self) -> usize {
        self.phi.cols()
    }

    /// Length of `c`, `M + 2L`.
    pub fn n_coords(&self) -> usize {
        self.pool_size() + 2 * self.samples()
    }

    pub fn block(&self, j: usize) -> Block {
        let (m, l) = (self.pool_size(), self.samples());
        if j < m {
            Block::Beta(j)
        } else if j < m + l {
            Block::NoisePos(j - m)
        } else {
            Block::NoiseNeg(j - m - l)
        }
    }

    /// Column `j` of `W`, materialized.
    pub fn w_column(&self, j: usize) -> Vec<f64> {
        let mut col = vec![0.0; self.samples()];
        match self.block(j) {
            Block::Beta(m) => col.copy_from_slice(self.phi.column(m)),
            Block::NoisePos(i) => col[i] = 1.0,
            Block::NoiseNeg(i) => col[i] = -1.0,
        }
        col
    }

    /// `W c` for a flat coefficient vector.
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.n_coords());
        let (m, l) = (self.pool_size(), self.samples());
        let mut out = vec![0.0; l];
        for (j, &cj) in c[..m].iter().enumerate() {
            if cj != 0.0 {
                for (o, &p) in out.iter_mut().zip(self.phi.column(j)) {
                    *o += cj * p;
                }
            }
        }
        for i in 0..l {
            out[i] += c[m + i] - c[m + l + i];
        }
        out
    }

    /// `‖W c − y‖² + λ‖c‖₁`.
    pub fn objective(&self, c: &[f64]) -> f64 {
        let wc = self.apply(c);
        let fit: f64 = wc.iter().zip(self.y.values()).map(|(a, b)| (a - b) * (a - b)).sum();
        fit + self.lambda * c.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Largest violation of the optimality conditions of the constrained program:
    /// `g_j ≥ 0` and `c_j g_j ≤ 0` with `g = 2Wᵀ(Wc − y) + λ`. Coordinates in
    /// `frozen` are held at zero and not checked.
    pub fn kkt_residual(&self, c: &[f64], frozen: &[bool]) -> f64 {
        let wc = self.apply(c);
        let diff: Vec<f64> = wc.iter().zip(self.y.values()).map(|(a, b)| a - b).collect();
        let (m, l) = (self.pool_size(), self.samples());
        let mut worst = 0.0f64;
        let mut check = |g: f64, cj: f64| {
            worst = worst.max(-g).max(cj * g);
        };
        for j in 0..m {
            if frozen.get(j).copied().unwrap_or(false) {
                continue;
            }
            let dot: f64 = self.phi.column(j).iter().zip(&diff).map(|(a, b)| a * b).sum();
            check(2.0 * dot + self.lambda, c[j]);
        }
        for i in 0..l {
            check(2.0 * diff[i] + self.lambda, c[m + i]);
            check(-2.0 * diff[i] + self.lambda, c[m + l + i]);
        }
        worst
    }
}

/// Convenience form of [`SparseProblem::assemble`].
pub fn assemble(phi: LabelMatrix, y: LabelVector, lambda: f64) -> Result<SparseProblem, SparseError> {
    SparseProblem::assemble(phi, y, lambda)
}

/// Algorithm used by [`NnL1Solver`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Exact dual active-set projection (see [`DualActiveSet`]).
    #[default]
    ActiveSet,
    /// Cyclic coordinate descent.
    CoordinateDescent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub method: SolverMethod,
    /// Coordinate descent: stop when no coordinate moves more than this in a
    /// full sweep. Active set: feasibility tolerance of the dual constraints.
    pub tol: f64,
    /// Required optimality residual for `converged`.
    pub tol_kkt: f64,
    /// Cap on coordinate sweeps or active-set steps.
    pub max_iter: usize,
    /// Keep the objective after every sweep in [`SparseSolution::trace`]
    /// (coordinate descent only).
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: SolverMethod::default(),
            tol: 1e-8,
            tol_kkt: 1e-6,
            max_iter: 10_000,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseSolution {
    pub beta: Vec<f64>,
    pub e_pos: Vec<f64>,
    pub e_neg: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub trace: Vec<f64>,
}

impl SparseSolution {
    /// Flat `c = (β, e⁺, e⁻)`.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.beta.len() + 2 * self.e_pos.len());
        c.extend_from_slice(&self.beta);
        c.extend_from_slice(&self.e_pos);
        c.extend_from_slice(&self.e_neg);
        c
    }

    /// Net noise estimate `e⁺ − e⁻` per sample.
    pub fn noise(&self) -> Vec<f64> {
        self.e_pos.iter().zip(&self.e_neg).map(|(p, n)| p - n).collect()
    }
}

/// Solver for one instance of the program, optionally with excluded columns.
///
/// With [`SolverMethod::CoordinateDescent`] every outer pass is a full sweep over all coordinates; between full sweeps
/// only the non-zero `β` (plus the cheap noise coordinates) are swept until
/// they settle. The solve stops after a full sweep whose largest coordinate
/// change is at most `tol` and whose optimality residual is at most `tol_kkt`.
#[derive(Clone, Debug)]
pub struct NnL1Solver<'a> {
    problem: &'a SparseProblem,
    options: SolverOptions,
    frozen: Vec<bool>,
    warm: Option<&'a SparseSolution>,
}

impl<'a> NnL1Solver<'a> {
    pub fn new(problem: &'a SparseProblem) -> Self {
        Self {
            problem,
            options: SolverOptions::default(),
            frozen: vec![false; problem.pool_size()],
            warm: None,
        }
    }

    pub fn options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    /// Pins `β_m = 0`, which is the same as deleting column `m` from `Φ`.
    pub fn exclude(mut self, indices: &[usize]) -> Self {
        for &m in indices {
            self.frozen[m] = true;
        }
        self
    }

    /// Starts coordinate descent from a previous solution of a problem with
    /// the same shape. The active-set method always starts cold; keep a
    /// [`DualActiveSet`] alive to reuse its factorization instead.
    pub fn warm_start(mut self, previous: &'a SparseSolution) -> Self {
        if previous.beta.len() == self.problem.pool_size() && previous.e_pos.len() == self.problem.samples() {
            self.warm = Some(previous);
        }
        self
    }

    pub fn solve(&self) -> SparseSolution {
        match self.options.method {
            SolverMethod::ActiveSet => {
                let mut session = DualActiveSet::new(self.problem, self.options);
                for (m, &f) in self.frozen.iter().enumerate() {
                    if f {
                        session.exclude(m);
                    }
                }
                session.solve()
            }
            SolverMethod::CoordinateDescent => self.solve_cd(),
        }
    }

    fn solve_cd(&self) -> SparseSolution {
        let p = self.problem;
        let (m, l) = (p.pool_size(), p.samples());
        let lambda = p.lambda;
        let half_lambda = 0.5 * lambda;
        let opts = &self.options;

        let (mut beta, mut e_pos, mut e_neg) = match self.warm {
            Some(w) => (w.beta.clone(), w.e_pos.clone(), w.e_neg.clone()),
            None => (vec![0.0; m], vec![0.0; l], vec![0.0; l]),
        };
        for (b, &f) in beta.iter_mut().zip(&self.frozen) {
            if f {
                *b = 0.0;
            }
        }
        let col_sq: Vec<f64> = (0..m)
            .map(|j| p.phi.column(j).iter().map(|v| v * v).sum())
            .collect();

        let mut resid = vec![0.0; l];
        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        let mut kkt = f64::INFINITY;
        let all: Vec<usize> = (0..m).filter(|&j| !self.frozen[j]).collect();
        let mut active: Vec<usize> = Vec::with_capacity(m);

        'outer: while iterations < opts.max_iter {
            // refresh the residual from scratch once per full sweep
            recompute_residual(p, &beta, &e_pos, &e_neg, &mut resid);
            let delta = sweep(p, &all, &col_sq, half_lambda, &mut beta, &mut e_pos, &mut e_neg, &mut resid);
            iterations += 1;
            if opts.record_trace {
                trace.push(objective_from_residual(&resid, &beta, &e_pos, &e_neg, lambda));
            }
            if delta <= opts.tol {
                kkt = p.kkt_residual(&concat(&beta, &e_pos, &e_neg), &self.frozen);
                if kkt <= opts.tol_kkt {
                    converged = true;
                    break 'outer;
                }
                continue;
            }
            active.clear();
            active.extend(all.iter().copied().filter(|&j| beta[j] > 0.0));
            while iterations < opts.max_iter {
                let delta = sweep(p, &active, &col_sq, half_lambda, &mut beta, &mut e_pos, &mut e_neg, &mut resid);
                iterations += 1;
                if opts.record_trace {
                    trace.push(objective_from_residual(&resid, &beta, &e_pos, &e_neg, lambda));
                }
                if delta <= opts.tol {
                    break;
                }
            }
        }

        let c = concat(&beta, &e_pos, &e_neg);
        if !converged {
            kkt = p.kkt_residual(&c, &self.frozen);
        }
        let objective = p.objective(&c);
        SparseSolution {
            beta,
            e_pos,
            e_neg,
            objective,
            iterations,
            converged,
            kkt_residual: kkt,
            trace,
        }
    }
}

/// Solves the non-negative ℓ1 program with no excluded columns and a cold start.
pub fn solve_nn_l1(problem: &SparseProblem, options: &SolverOptions) -> SparseSolution {
    NnL1Solver::new(problem).options(*options).solve()
}

fn concat(beta: &[f64], e_pos: &[f64], e_neg: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(beta.len() + e_pos.len() + e_neg.len());
    c.extend_from_slice(beta);
    c.extend_from_slice(e_pos);
    c.extend_from_slice(e_neg);
    c
}

/// `r = y − Φβ − e⁺ + e⁻`.
fn recompute_residual(p: &SparseProblem, beta: &[f64], e_pos: &[f64], e_neg: &[f64], resid: &mut [f64]) {
    let y = p.y.values();
    for i in 0..resid.len() {
        resid[i] = y[i] - e_pos[i] + e_neg[i];
    }
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (r, &v) in resid.iter_mut().zip(p.phi.column(j)) {
                *r -= b * v;
            }
        }
    }
}

fn objective_from_residual(resid: &[f64], beta: &[f64], e_pos: &[f64], e_neg: &[f64], lambda: f64) -> f64 {
    let fit: f64 = resid.iter().map(|r| r * r).sum();
    let mass: f64 = beta.iter().sum::<f64>() + e_pos.iter().sum::<f64>() + e_neg.iter().sum::<f64>();
    fit + lambda * mass
}

/// One pass over the listed `β` coordinates followed by every noise coordinate.
/// Returns the largest absolute coordinate change.
#[allow(clippy::too_many_arguments)]
fn sweep(
    p: &SparseProblem,
    betas: &[usize],
    col_sq: &[f64],
    half_lambda: f64,
    beta: &mut [f64],
    e_pos: &mut [f64],
    e_neg: &mut [f64],
    resid: &mut [f64],
) -> f64 {
    let mut delta = 0.0f64;
    for &j in betas {
        let col = p.phi.column(j);
        let old = beta[j];
        let dot: f64 = col.iter().zip(resid.iter()).map(|(a, b)| a * b).sum();
        let new = ((dot + col_sq[j] * old - half_lambda) / col_sq[j]).max(0.0);
        let step = new - old;
        if step != 0.0 {
            for (r, &v) in resid.iter_mut().zip(col) {
                *r -= step * v;
            }
            beta[j] = new;
            delta = delta.max(step.abs());
        }
    }
    for i in 0..resid.len() {
        // e⁺_i: column +e_i
        let old = e_pos[i];
        let base = resid[i] + old;
        let new = (base - half_lambda).max(0.0);
        resid[i] = base - new;
        e_pos[i] = new;
        delta = delta.max((new - old).abs());

        // e⁻_i: column −e_i
        let old = e_neg[i];
        let base = resid[i] - old;
        let new = (-base - half_lambda).max(0.0);
        resid[i] = base + new;
        e_neg[i] = new;
        delta = delta.max((new - old).abs());
    }
    delta
}

/// Index of the largest `β` among non-excluded pool members; ties go to the lowest index.
pub fn select_classifier(solution: &SparseSolution, excluded: &[usize]) -> Result<usize, SparseError> {
    argbest(&solution.beta, excluded, |cand, best| cand > best)
}

/// The classic rule: lowest accumulated error among non-excluded pool members.
pub fn select_by_error(errors: &[f64], excluded: &[usize]) -> Result<usize, SparseError> {
    argbest(errors, excluded, |cand, best| cand < best)
}

fn argbest(values: &[f64], excluded: &[usize], better: impl Fn(f64, f64) -> bool) -> Result<usize, SparseError> {
    let mut best: Option<usize> = None;
    for (m, &v) in values.iter().enumerate() {
        if excluded.contains(&m) {
            continue;
        }
        match best {
            Some(b) if !better(v, values[b]) => {}
            _ => best = Some(m),
        }
    }
    best.ok_or(SparseError::Exhausted)
}

/// Writes `block,index,value` rows for every coefficient of a solution.
pub fn write_solution_csv(path: &Path, solution: &SparseSolution) -> io::Result<()> {
    let mut out = String::from("block,index,value\n");
    for (name, values) in [
        ("beta", &solution.beta),
        ("e_pos", &solution.e_pos),
        ("e_neg", &solution.e_neg),
    ] {
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{name},{i},{v:e}");
        }
    }
    std::fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lbl(v: f64) -> Label {
        Label::from_sign(v).unwrap()
    }

    fn random_label(rng: &mut ChaCha8Rng) -> Label {
        if rng.gen::<bool>() {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    #[test]
    fn single_constant_column() {
        let phi = build_label_matrix(&[vec![Label::Pos; 3]]).unwrap();
        assert_eq!(phi.column(0), &[1.0, 1.0, 1.0]);
        assert_eq!((phi.rows(), phi.cols()), (3, 1));
    }

    #[test]
    fn label_matrix_entries_follow_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let preds: Vec<Vec<Label>> = (0..7).map(|_| (0..5).map(|_| random_label(&mut rng)).collect()).collect();
        let phi = build_label_matrix(&preds).unwrap();
        assert_eq!((phi.rows(), phi.cols()), (5, 7));
        for m in 0..7 {
            for i in 0..5 {
                assert_eq!(phi.get(i, m), preds[m][i].value());
            }
        }
    }

    #[test]
    fn ragged_predictions_rejected() {
        let err = build_label_matrix(&[vec![Label::Pos; 3], vec![Label::Neg; 2]]).unwrap_err();
        assert_eq!(err, SparseError::Ragged { index: 1, expected: 3, actual: 2 });
    }

    #[test]
    fn w_layout_for_two_samples_one_classifier() {
        let phi = build_label_matrix(&[vec![Label::Pos, Label::Neg]]).unwrap();
        let y = LabelVector::from_values(&[1.0, -1.0]).unwrap();
        let p = assemble(phi, y, 0.01).unwrap();
        assert_eq!(p.n_coords(), 5);
        let cols: Vec<Vec<f64>> = (0..5).map(|j| p.w_column(j)).collect();
        assert_eq!(
            cols,
            vec![
                vec![1.0, -1.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0]
            ]
        );
    }

    #[test]
    fn identity_blocks_reproduce_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = 6;
        let labels: Vec<Label> = (0..l).map(|_| random_label(&mut rng)).collect();
        let phi = LabelMatrix::from_fn(l, 4, |_, _| random_label(&mut rng));
        let y = LabelVector::from_labels(&labels);
        let p = assemble(phi, y.clone(), 0.1).unwrap();
        let mut c = vec![0.0; p.n_coords()];
        for (i, v) in y.values().iter().enumerate() {
            if *v > 0.0 {
                c[4 + i] = *v;
            } else {
                c[4 + l + i] = -*v;
            }
        }
        assert_eq!(p.apply(&c), y.values());
    }

    #[test]
    fn unit_vectors_pick_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = LabelMatrix::from_fn(5, 9, |_, _| random_label(&mut rng));
        let y = LabelVector::from_labels(&[Label::Pos; 5]);
        let p = assemble(phi, y, 0.1).unwrap();
        for j in 0..p.n_coords() {
            let mut e = vec![0.0; p.n_coords()];
            e[j] = 1.0;
            // oracle: dense matrix-vector product against the materialized column
            let col = p.w_column(j);
            assert_eq!(p.apply(&e), col);
        }
    }

    #[test]
    fn assemble_validates() {
        let phi = build_label_matrix(&[vec![Label::Pos; 3]]).unwrap();
        let y = LabelVector::from_values(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            assemble(phi.clone(), y, 0.01),
            Err(SparseError::LengthMismatch { .. })
        ));
        let y = LabelVector::from_values(&[1.0, 1.0, -1.0]).unwrap();
        assert_eq!(assemble(phi, y, 0.0).unwrap_err(), SparseError::Lambda(0.0));
        assert!(matches!(
            LabelVector::from_values(&[1.0, 0.5]),
            Err(SparseError::NotALabel { index: 1, .. })
        ));
        assert!(LabelVector::from_values(&[2.0]).is_err());
    }

    #[test]
    fn zero_labels_give_zero_solution() {
        // y = 0 cannot be built from ±1 labels, so exercise the solver core directly
        let phi = LabelMatrix::from_fn(4, 3, |i, m| lbl(if (i + m) % 2 == 0 { 1.0 } else { -1.0 }));
        let p = SparseProblem {
            phi,
            y: LabelVector(vec![0.0; 4]),
            lambda: 0.01,
        };
        let s = solve_nn_l1(&p, &SolverOptions::default());
        assert!(s.converged);
        assert!(s.coefficients().iter().all(|&c| c == 0.0));
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn large_lambda_gives_zero_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = LabelMatrix::from_fn(6, 5, |_, _| random_label(&mut rng));
        let labels: Vec<Label> = (0..6).map(|_| random_label(&mut rng)).collect();
        let y = LabelVector::from_labels(&labels);
        // λ at least 2·max_j w_jᵀy: the origin satisfies the optimality conditions
        let max_dot = (0..5)
            .map(|j| phi.column(j).iter().zip(y.values()).map(|(a, b)| a * b).sum::<f64>())
            .fold(1.0f64, f64::max);
        let p = assemble(phi, y, 2.0 * max_dot).unwrap();
        let s = solve_nn_l1(&p, &SolverOptions::default());
        assert!(s.converged);
        assert!(s.coefficients().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn exact_column_outweighs_random_column() {
        let y_vals = [1.0, -1.0, 1.0, 1.0];
        let phi = LabelMatrix::from_fn(4, 2, |i, m| {
            if m == 0 {
                lbl(y_vals[i])
            } else {
                lbl([1.0, 1.0, -1.0, 1.0][i])
            }
        });
        let p = assemble(phi, LabelVector::from_values(&y_vals).unwrap(), 0.01).unwrap();
        let s = solve_nn_l1(&p, &SolverOptions::default());
        assert!(s.converged);
        assert!(s.beta[0] > s.beta[1]);
        // objective of the exact-fit optimum: β₀ = 1 − λ/(2L), rest zero
        let b = 1.0 - 0.01 / 8.0;
        let expected = 4.0 * (1.0 - b) * (1.0 - b) + 0.01 * b;
        assert!((s.objective - expected).abs() < 1e-9);
    }

    #[test]
    fn selection_rules() {
        let sol = |beta: Vec<f64>| SparseSolution {
            beta,
            e_pos: vec![],
            e_neg: vec![],
            objective: 0.0,
            iterations: 0,
            converged: true,
            kkt_residual: 0.0,
            trace: vec![],
        };
        assert_eq!(select_classifier(&sol(vec![0.1, 0.9, 0.3]), &[]).unwrap(), 1);
        assert_eq!(select_classifier(&sol(vec![0.5, 0.5]), &[]).unwrap(), 0);
        assert_eq!(select_classifier(&sol(vec![0.1, 0.9, 0.3]), &[1]).unwrap(), 2);
        assert_eq!(
            select_classifier(&sol(vec![0.1, 0.9]), &[0, 1]).unwrap_err(),
            SparseError::Exhausted
        );
        assert_eq!(select_by_error(&[0.3, 0.1, 0.1], &[]).unwrap(), 1);
        assert_eq!(select_by_error(&[0.3, 0.1, 0.1], &[1]).unwrap(), 2);
    }

    #[test]
    fn excluded_columns_stay_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let labels: Vec<Label> = (0..12).map(|_| random_label(&mut rng)).collect();
        let phi = LabelMatrix::from_fn(12, 30, |i, m| if m < 3 { labels[i] } else { random_label(&mut rng) });
        let p = assemble(phi, LabelVector::from_labels(&labels), 0.01).unwrap();
        let full = solve_nn_l1(&p, &SolverOptions::default());
        let first = select_classifier(&full, &[]).unwrap();
        assert!(first < 3);
        let restricted = NnL1Solver::new(&p).exclude(&[first]).warm_start(&full).solve();
        assert!(restricted.converged);
        assert_eq!(restricted.beta[first], 0.0);
        let second = select_classifier(&restricted, &[first]).unwrap();
        assert!(second < 3 && second != first);
        // cold start reaches the same optimum value
        let cold = NnL1Solver::new(&p).exclude(&[first]).solve();
        assert!((cold.objective - restricted.objective).abs() < 1e-9);
    }

    #[test]
    fn trace_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let labels: Vec<Label> = (0..16).map(|_| random_label(&mut rng)).collect();
        let phi = LabelMatrix::from_fn(16, 48, |_, _| random_label(&mut rng));
        let p = assemble(phi, LabelVector::from_labels(&labels), 0.01).unwrap();
        let s = NnL1Solver::new(&p)
            .options(SolverOptions {
                method: SolverMethod::CoordinateDescent,
                record_trace: true,
                max_iter: 100_000,
                ..Default::default()
            })
            .solve();
        assert!(s.converged, "{} sweeps, kkt {}", s.iterations, s.kkt_residual);
        assert_eq!(s.trace.len(), s.iterations);
        for w in s.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        assert!(s.kkt_residual <= 1e-6);
        assert!(s.coefficients().iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn solution_csv_has_every_coefficient() {
        let phi = build_label_matrix(&[vec![Label::Pos, Label::Neg]]).unwrap();
        let p = assemble(phi, LabelVector::from_values(&[1.0, 1.0]).unwrap(), 0.01).unwrap();
        let s = solve_nn_l1(&p, &SolverOptions::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_solution_csv(&path, &s).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 5);
        assert!(text.starts_with("block,index,value\nbeta,0,"));
    }
}
