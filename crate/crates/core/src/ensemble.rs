//! Part-based strong classifiers and their online update.
//!
//! Each object part owns a pool of weak classifiers (one shared pool, or one
//! pool per selector), accumulated error statistics per `(selector, pool
//! member)`, and a strong classifier made of `N` weighted selections. Part
//! confidences are fused with Noisy-OR.

use std::fs;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::EnsembleError;
use crate::imaging::{draw_scaled, HaarFeature, IntegralImage, Rect, ScaledHaar};
use crate::sparse_select::{
    select_by_error, select_classifier, write_solution_csv, DualActiveSet, LabelMatrix, LabelVector, NnL1Solver,
    SolverMethod, SolverOptions, SparseProblem, SparseSolution,
};
use crate::weak_learn::{KalmanParams, Label, SelectorStats, WeakClassifier};

const ERROR_CLAMP: f64 = 1e-4;

/// `α = ½ ln((1 − e) / e)` with `e` clamped to `[1e-4, 1 − 1e-4]`.
pub fn alpha_from_error(e: f64) -> f64 {
    let e = e.clamp(ERROR_CLAMP, 1.0 - ERROR_CLAMP);
    0.5 * ((1.0 - e) / e).ln()
}

/// Logistic map of a strong-classifier margin onto `(0, 1)`.
pub fn strong_confidence(margin: f64, scale: f64) -> f64 {
    1.0 / (1.0 + (-scale * margin).exp())
}

/// `1 − ∏(1 − c_k)`.
pub fn combine_noisy_or(confidences: &[f64]) -> Result<f64, EnsembleError> {
    let mut miss = 1.0;
    for &c in confidences {
        if !(0.0..=1.0).contains(&c) {
            return Err(EnsembleError::Domain(c));
        }
        miss *= 1.0 - c;
    }
    Ok(1.0 - miss)
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `−ln(1 − fused)` for logistic part confidences. Strictly increasing in the
/// fused confidence, and still ordered once the fused value rounds to 1.
pub fn noisy_or_log_miss(margins: &[f64], scale: f64) -> f64 {
    margins.iter().map(|&m| softplus(scale * m)).sum()
}

/// One part as fractions of the object box: `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PartBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, EnsembleError> {
        let ok = |a: f64, b: f64| a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= 1.0;
        if !ok(x0, x1) || !ok(y0, y1) {
            return Err(EnsembleError::Config(format!(
                "part box ({x0}, {y0}, {x1}, {y1}) must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Sub-rect of `object`; always contained in it and at least 1×1.
    pub fn apply(&self, object: &Rect) -> Rect {
        let span = |lo: f64, hi: f64, len: i32| {
            let a = ((lo * len as f64).round() as i32).min(len - 1);
            let b = ((hi * len as f64).round() as i32).clamp(a + 1, len);
            (a, b - a)
        };
        let (dx, w) = span(self.x0, self.x1, object.w);
        let (dy, h) = span(self.y0, self.y1, object.h);
        Rect::new(object.x + dx, object.y + dy, w, h)
    }
}

/// The part transforms applied to an object box.
#[derive(Clone, Debug, PartialEq)]
pub struct PartLayout {
    parts: Vec<PartBox>,
}

impl PartLayout {
    /// Whole object, then top, bottom, left and right halves.
    pub fn halves() -> Self {
        Self {
            parts: vec![
                PartBox { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 },
                PartBox { x0: 0.0, y0: 0.0, x1: 1.0, y1: 0.5 },
                PartBox { x0: 0.0, y0: 0.5, x1: 1.0, y1: 1.0 },
                PartBox { x0: 0.0, y0: 0.0, x1: 0.5, y1: 1.0 },
                PartBox { x0: 0.5, y0: 0.0, x1: 1.0, y1: 1.0 },
            ],
        }
    }

    /// The first `k` parts of [`PartLayout::halves`].
    pub fn first(k: usize) -> Result<Self, EnsembleError> {
        let mut all = Self::halves();
        if k == 0 || k > all.parts.len() {
            return Err(EnsembleError::Config(format!(
                "built-in layout has 1 to {} parts, got {k}",
                all.parts.len()
            )));
        }
        all.parts.truncate(k);
        Ok(all)
    }

    pub fn custom(parts: Vec<PartBox>) -> Result<Self, EnsembleError> {
        if parts.is_empty() {
            return Err(EnsembleError::Config("layout needs at least one part".into()));
        }
        Ok(Self { parts })
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn parts(&self) -> &[PartBox] {
        &self.parts
    }

    pub fn apply(&self, k: usize, object: &Rect) -> Rect {
        self.parts[k].apply(object)
    }
}

impl Default for PartLayout {
    fn default() -> Self {
        Self::halves()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub layout: PartLayout,
    /// Selectors per part (`N`).
    pub selectors: usize,
    /// Pool size (`M`).
    pub pool_size: usize,
    pub lambda: f64,
    pub logistic_scale: f64,
    /// Smallest feature side as a fraction of the part.
    pub min_feature_size: f64,
    /// One pool per selector instead of one per part.
    pub per_selector_pools: bool,
    pub selection: SelectionRule,
    pub exclusion: Exclusion,
    /// Swap the worst unselected pool member for a fresh random one after each update.
    pub feature_replacement: bool,
    pub kalman: KalmanParams,
    pub solver: SolverOptions,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            layout: PartLayout::halves(),
            selectors: 20,
            pool_size: 200,
            lambda: 0.01,
            logistic_scale: 1.0,
            min_feature_size: 0.2,
            per_selector_pools: false,
            selection: SelectionRule::Sparse,
            exclusion: Exclusion::InArgmax,
            feature_replacement: false,
            kalman: KalmanParams::default(),
            solver: SolverOptions::default(),
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        let fail = |msg: String| Err(EnsembleError::Config(msg));
        if self.layout.is_empty() {
            return fail("layout needs at least one part".into());
        }
        if self.selectors == 0 {
            return fail("selectors must be at least 1".into());
        }
        if self.pool_size <= self.selectors {
            return fail(format!(
                "pool size {} must exceed the selector count {}",
                self.pool_size, self.selectors
            ));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.logistic_scale > 0.0 && self.logistic_scale.is_finite()) {
            return fail(format!("logistic scale must be positive, got {}", self.logistic_scale));
        }
        if !(self.min_feature_size > 0.0 && self.min_feature_size <= 1.0) {
            return fail(format!("min feature size must lie in (0, 1], got {}", self.min_feature_size));
        }
        Ok(())
    }

    fn pools_per_part(&self) -> usize {
        if self.per_selector_pools {
            self.selectors
        } else {
            1
        }
    }
}

/// Rule each selector uses to pick a pool member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SelectionRule {
    /// Largest coefficient of the non-negative ℓ1 decomposition.
    #[default]
    Sparse,
    /// Lowest accumulated error, without solving.
    AccumulatedError,
}

/// When earlier selections are removed from a later selector's choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Exclusion {
    /// One solve per pool; earlier picks are skipped in the argmax only.
    #[default]
    InArgmax,
    /// Earlier picks are removed from the program before each selector's
    /// solve, so every selector takes the argmax of its own solution.
    InProgram,
}

/// Solves the program of one pool for successive selectors.
enum Solver<'a> {
    /// Warm active-set session with earlier picks removed.
    Session {
        session: DualActiveSet<'a>,
        last: Option<SparseSolution>,
    },
    /// Fresh solve per selector with earlier picks removed.
    Fresh {
        problem: &'a SparseProblem,
        options: SolverOptions,
        last: Option<SparseSolution>,
    },
    /// A single solve reused by every selector.
    Once {
        problem: &'a SparseProblem,
        options: SolverOptions,
        last: Option<SparseSolution>,
    },
}

impl<'a> Solver<'a> {
    fn new(problem: &'a SparseProblem, options: SolverOptions, exclusion: Exclusion) -> Self {
        match (exclusion, options.method) {
            (Exclusion::InArgmax, _) => Solver::Once { problem, options, last: None },
            (Exclusion::InProgram, SolverMethod::ActiveSet) => Solver::Session {
                session: DualActiveSet::new(problem, options),
                last: None,
            },
            (Exclusion::InProgram, SolverMethod::CoordinateDescent) => Solver::Fresh { problem, options, last: None },
        }
    }

    /// Solution with `excluded` pinned to zero where the mode asks for it,
    /// and whether a solve ran.
    fn solve_excluding(&mut self, excluded: &[usize]) -> (&SparseSolution, bool) {
        match self {
            Solver::Session { session, last } => {
                for &m in excluded {
                    session.exclude(m);
                }
                *last = Some(session.solve());
                (last.as_ref().expect("just solved"), true)
            }
            Solver::Fresh { problem, options, last } => {
                let s = {
                    let mut b = NnL1Solver::new(problem).options(*options).exclude(excluded);
                    if let Some(prev) = last.as_ref() {
                        b = b.warm_start(prev);
                    }
                    b.solve()
                };
                *last = Some(s);
                (last.as_ref().expect("just solved"), true)
            }
            Solver::Once { problem, options, last } => {
                let fresh = last.is_none();
                if fresh {
                    *last = Some(NnL1Solver::new(problem).options(*options).solve());
                }
                (last.as_ref().expect("solved once"), fresh)
            }
        }
    }
}

/// One selector's pick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub pool_index: usize,
    pub alpha: f64,
}

/// Weighted vote over the selected weak classifiers of one part.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct StrongClassifier {
    pub part: usize,
    /// Entry `n` belongs to selector `n`.
    pub entries: Vec<Selection>,
}

impl StrongClassifier {
    pub fn is_trained(&self) -> bool {
        !self.entries.is_empty()
    }

    pub fn alpha_sum(&self) -> f64 {
        self.entries.iter().map(|s| s.alpha).sum()
    }
}

/// `Σ α_n · h_n`; `votes[n]` is selector `n`'s weak prediction.
pub fn strong_margin(sc: &StrongClassifier, votes: &[Label]) -> f64 {
    sc.entries.iter().zip(votes).map(|(s, v)| s.alpha * v.value()).sum()
}

/// Why a selector did not take the ℓ1 pick.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fallback {
    NotConverged,
    NoPositiveWeight,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PartUpdate {
    pub fallbacks: Vec<(usize, Fallback)>,
    pub solves: usize,
}

/// Feature responses of a batch for one pool, sample-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseBatch {
    pub samples: usize,
    pub pool_size: usize,
    pub values: Vec<f64>,
}

impl ResponseBatch {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.pool_size..(i + 1) * self.pool_size]
    }
}

/// Weak classifiers, error statistics and selections of one part, without
/// any image geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct PartLearner {
    part: usize,
    selectors: usize,
    lambda: f64,
    selection: SelectionRule,
    exclusion: Exclusion,
    kalman: KalmanParams,
    solver: SolverOptions,
    pools: Vec<Vec<WeakClassifier>>,
    /// `stats[n][m]`.
    stats: Vec<Vec<SelectorStats>>,
    strong: StrongClassifier,
}

impl PartLearner {
    pub fn new(part: usize, config: &EnsembleConfig) -> Self {
        let m = config.pool_size;
        Self {
            part,
            selectors: config.selectors,
            lambda: config.lambda,
            selection: config.selection,
            exclusion: config.exclusion,
            kalman: config.kalman,
            solver: config.solver,
            pools: (0..config.pools_per_part())
                .map(|_| (0..m).map(|j| WeakClassifier::new(j, &config.kalman)).collect())
                .collect(),
            stats: vec![vec![SelectorStats::default(); m]; config.selectors],
            strong: StrongClassifier { part, entries: Vec::new() },
        }
    }

    pub fn strong(&self) -> &StrongClassifier {
        &self.strong
    }

    pub fn pool(&self, p: usize) -> &[WeakClassifier] {
        &self.pools[p]
    }

    pub fn stats(&self, selector: usize) -> &[SelectorStats] {
        &self.stats[selector]
    }

    /// Pool serving selector `n`.
    pub fn pool_of(&self, n: usize) -> usize {
        if self.pools.len() == 1 {
            0
        } else {
            n
        }
    }

    /// Weak vote of selector `n`'s classifier for one response.
    pub fn vote(&self, n: usize, response: f64) -> Label {
        let sel = &self.strong.entries[n];
        self.pools[self.pool_of(n)][sel.pool_index].predict(response)
    }

    /// Resets pool member `m` of pool `p` and its statistics.
    pub fn reset_member(&mut self, p: usize, m: usize) {
        self.pools[p][m] = WeakClassifier::new(m, &self.kalman);
        for n in 0..self.selectors {
            if self.pool_of(n) == p {
                self.stats[n][m] = SelectorStats::default();
            }
        }
    }

    /// One round of the update: every pool member learns from every sample,
    /// the error statistics absorb the batch, and each selector picks anew.
    /// `batches[p]` holds the responses of pool `p`.
    pub fn train(
        &mut self,
        batches: &[ResponseBatch],
        labels: &[Label],
        mut dump: Option<&mut dyn FnMut(usize, &SparseSolution) -> Result<(), EnsembleError>>,
    ) -> Result<PartUpdate, EnsembleError> {
        if !labels.contains(&Label::Pos) || !labels.contains(&Label::Neg) {
            return Err(EnsembleError::OneSidedBatch);
        }
        assert_eq!(batches.len(), self.pools.len());
        let l = labels.len();

        let mut predictions: Vec<Vec<Label>> = Vec::with_capacity(self.pools.len());
        for (pool, batch) in self.pools.iter_mut().zip(batches) {
            assert_eq!(batch.samples, l);
            for (i, &y) in labels.iter().enumerate() {
                for (wc, &r) in pool.iter_mut().zip(batch.row(i)) {
                    wc.update(r, y, &self.kalman);
                }
            }
            // column-major, matching the label matrix
            let mut pred = Vec::with_capacity(l * pool.len());
            for (m, wc) in pool.iter().enumerate() {
                pred.extend((0..l).map(|i| wc.predict(batch.values[i * batch.pool_size + m])));
            }
            predictions.push(pred);
        }

        for n in 0..self.selectors {
            let pred = &predictions[self.pool_of(n)];
            for (m, s) in self.stats[n].iter_mut().enumerate() {
                let wrong = pred[m * l..(m + 1) * l].iter().zip(labels).filter(|(p, y)| p != y).count();
                s.add_counts(wrong, l - wrong);
            }
        }

        let y = LabelVector::from_labels(labels);
        let problems: Vec<SparseProblem> = if self.selection == SelectionRule::AccumulatedError {
            Vec::new()
        } else {
            predictions
                .iter()
                .map(|pred| {
                    let phi = LabelMatrix::from_fn(l, pred.len() / l, |i, j| pred[j * l + i]);
                    SparseProblem::assemble(phi, y.clone(), self.lambda)
                })
                .collect::<Result<_, _>>()?
        };
        let mut solvers: Vec<Option<Solver<'_>>> = problems
            .iter()
            .map(|p| Some(Solver::new(p, self.solver, self.exclusion)))
            .collect();

        let mut report = PartUpdate::default();
        let mut chosen: Vec<usize> = Vec::with_capacity(self.selectors);
        let mut entries = Vec::with_capacity(self.selectors);
        for n in 0..self.selectors {
            let errors: Vec<f64> = self.stats[n].iter().map(SelectorStats::error_rate).collect();
            let pick = match solvers.get_mut(self.pool_of(n)).and_then(Option::as_mut) {
                None => select_by_error(&errors, &chosen)?,
                Some(solver) => {
                    let (solution, fresh) = solver.solve_excluding(&chosen);
                    if fresh {
                        report.solves += 1;
                        if let Some(f) = dump.as_mut() {
                            f(n, solution)?;
                        }
                    }
                    let pick = select_classifier(solution, &chosen)?;
                    if !solution.converged {
                        report.fallbacks.push((n, Fallback::NotConverged));
                        log::debug!(
                            "part {} selector {n}: solver stopped at kkt {:.3e}, using accumulated error",
                            self.part,
                            solution.kkt_residual
                        );
                        select_by_error(&errors, &chosen)?
                    } else if solution.beta[pick] <= 0.0 {
                        report.fallbacks.push((n, Fallback::NoPositiveWeight));
                        log::debug!("part {} selector {n}: no positive weight left, using accumulated error", self.part);
                        select_by_error(&errors, &chosen)?
                    } else {
                        pick
                    }
                }
            };
            chosen.push(pick);
            entries.push(Selection {
                pool_index: pick,
                alpha: alpha_from_error(errors[pick]),
            });
        }
        self.strong.entries = entries;
        Ok(report)
    }

    /// Pool member with the highest accumulated error among those no
    /// selector currently uses.
    fn worst_unselected(&self, p: usize) -> Option<usize> {
        let n = (0..self.selectors).find(|&n| self.pool_of(n) == p)?;
        let used: Vec<usize> = self.strong.entries.iter().map(|s| s.pool_index).collect();
        let mut worst: Option<(usize, f64)> = None;
        for (m, s) in self.stats[n].iter().enumerate() {
            let e = s.error_rate();
            if !used.contains(&m) && worst.map_or(true, |(_, w)| e > w) {
                worst = Some((m, e));
            }
        }
        worst.map(|(m, _)| m)
    }
}

/// A part learner plus the Haar features its pools are evaluated on.
#[derive(Clone, Debug)]
pub struct PartModel {
    pub learner: PartLearner,
    /// `features[p][m]`.
    features: Vec<Vec<HaarFeature>>,
    scaled: Vec<Vec<ScaledHaar>>,
    size: (usize, usize),
    rng: ChaCha8Rng,
    min_feature_size: f64,
}

impl PartModel {
    fn new(part: usize, config: &EnsembleConfig, size: (usize, usize)) -> Result<Self, EnsembleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(part as u64 + 1)));
        let mut features = Vec::new();
        let mut scaled = Vec::new();
        for _ in 0..config.pools_per_part() {
            let mut f = Vec::with_capacity(config.pool_size);
            let mut s = Vec::with_capacity(config.pool_size);
            for _ in 0..config.pool_size {
                let (hf, sh) = draw_scaled(&mut rng, config.min_feature_size, size.0, size.1)?;
                f.push(hf);
                s.push(sh);
            }
            features.push(f);
            scaled.push(s);
        }
        Ok(Self {
            learner: PartLearner::new(part, config),
            features,
            scaled,
            size,
            rng,
            min_feature_size: config.min_feature_size,
        })
    }

    pub fn features(&self, p: usize) -> &[HaarFeature] {
        &self.features[p]
    }

    pub fn patch_size(&self) -> (usize, usize) {
        self.size
    }

    fn responses(&self, ii: &IntegralImage, patches: &[Rect]) -> Result<Vec<ResponseBatch>, EnsembleError> {
        for r in patches {
            check_patch(ii, r, self.size)?;
        }
        Ok(self
            .scaled
            .iter()
            .map(|pool| {
                let mut values = Vec::with_capacity(patches.len() * pool.len());
                for r in patches {
                    values.extend(pool.iter().map(|f| f.eval_at(ii, r.x as usize, r.y as usize)));
                }
                ResponseBatch {
                    samples: patches.len(),
                    pool_size: pool.len(),
                    values,
                }
            })
            .collect())
    }

    /// Strong-classifier margin on one in-bounds patch; zero while untrained.
    pub fn margin(&self, ii: &IntegralImage, patch: &Rect) -> f64 {
        let (x, y) = (patch.x as usize, patch.y as usize);
        let l = &self.learner;
        l.strong
            .entries
            .iter()
            .enumerate()
            .map(|(n, s)| {
                let r = self.scaled[l.pool_of(n)][s.pool_index].eval_at(ii, x, y);
                s.alpha * l.vote(n, r).value()
            })
            .sum()
    }

    fn replace_worst(&mut self) -> Result<(), EnsembleError> {
        for p in 0..self.features.len() {
            if let Some(m) = self.learner.worst_unselected(p) {
                let (f, s) = draw_scaled(&mut self.rng, self.min_feature_size, self.size.0, self.size.1)?;
                self.features[p][m] = f;
                self.scaled[p][m] = s;
                self.learner.reset_member(p, m);
            }
        }
        Ok(())
    }
}

fn check_patch(ii: &IntegralImage, r: &Rect, size: (usize, usize)) -> Result<(), EnsembleError> {
    if !r.inside(ii.width(), ii.height()) {
        return Err(crate::error::ImagingError::OutOfBounds {
            rect: *r,
            width: ii.width(),
            height: ii.height(),
        }
        .into());
    }
    if (r.w as usize, r.h as usize) != size {
        return Err(crate::error::ImagingError::PatchSize {
            expected: size,
            actual: (r.w as usize, r.h as usize),
        }
        .into());
    }
    Ok(())
}

/// Summary of one ensemble update.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct UpdateReport {
    pub parts: Vec<PartUpdate>,
}

impl UpdateReport {
    pub fn fallback_count(&self) -> usize {
        self.parts.iter().map(|p| p.fallbacks.len()).sum()
    }
}

/// The `K` part models of one tracked object.
#[derive(Clone, Debug)]
pub struct Ensemble {
    config: EnsembleConfig,
    object_size: (i32, i32),
    parts: Vec<PartModel>,
    dump_dir: Option<PathBuf>,
    updates: usize,
}

impl Ensemble {
    pub fn new(config: EnsembleConfig, object_w: i32, object_h: i32) -> Result<Self, EnsembleError> {
        config.validate()?;
        if object_w < 1 || object_h < 1 {
            return Err(EnsembleError::Config(format!("object size {object_w}x{object_h} is empty")));
        }
        let probe = Rect::new(0, 0, object_w, object_h);
        let parts = (0..config.layout.len())
            .map(|k| {
                let r = config.layout.apply(k, &probe);
                PartModel::new(k, &config, (r.w as usize, r.h as usize))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            config,
            object_size: (object_w, object_h),
            parts,
            dump_dir: None,
            updates: 0,
        })
    }

    /// Writes every solve of later updates as CSV under `dir`.
    pub fn set_dump_dir(&mut self, dir: Option<PathBuf>) {
        self.dump_dir = dir;
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn parts(&self) -> &[PartModel] {
        &self.parts
    }

    pub fn is_trained(&self) -> bool {
        self.parts.iter().all(|p| p.learner.strong.is_trained())
    }

    fn check_object(&self, ii: &IntegralImage, object: &Rect) -> Result<(), EnsembleError> {
        check_patch(
            ii,
            object,
            (self.object_size.0 as usize, self.object_size.1 as usize),
        )
    }

    /// Per-part margins of an object placement.
    pub fn part_margins(&self, ii: &IntegralImage, object: &Rect) -> Result<Vec<f64>, EnsembleError> {
        self.check_object(ii, object)?;
        Ok(self.margins_unchecked(ii, object))
    }

    fn margins_unchecked(&self, ii: &IntegralImage, object: &Rect) -> Vec<f64> {
        self.parts
            .iter()
            .enumerate()
            .map(|(k, part)| part.margin(ii, &self.config.layout.apply(k, object)))
            .collect()
    }

    /// Fused Noisy-OR confidence of an object placement.
    pub fn confidence(&self, ii: &IntegralImage, object: &Rect) -> Result<f64, EnsembleError> {
        let scale = self.config.logistic_scale;
        let c: Vec<f64> = self
            .part_margins(ii, object)?
            .into_iter()
            .map(|m| strong_confidence(m, scale))
            .collect();
        combine_noisy_or(&c)
    }

    /// Ranking key and fused confidence; the key orders placements exactly
    /// as the confidence does.
    pub fn score(&self, ii: &IntegralImage, object: &Rect) -> Result<(f64, f64), EnsembleError> {
        let margins = self.part_margins(ii, object)?;
        let key = noisy_or_log_miss(&margins, self.config.logistic_scale);
        Ok((key, -(-key).exp_m1()))
    }

    /// One update from labelled object placements.
    pub fn update(&mut self, ii: &IntegralImage, samples: &[(Rect, Label)]) -> Result<UpdateReport, EnsembleError> {
        let labels: Vec<Label> = samples.iter().map(|s| s.1).collect();
        if !labels.contains(&Label::Pos) || !labels.contains(&Label::Neg) {
            return Err(EnsembleError::OneSidedBatch);
        }
        for (r, _) in samples {
            self.check_object(ii, r)?;
        }
        let update_index = self.updates;
        self.updates += 1;
        let mut report = UpdateReport::default();
        for k in 0..self.parts.len() {
            let patches: Vec<Rect> = samples.iter().map(|(r, _)| self.config.layout.apply(k, r)).collect();
            let batches = self.parts[k].responses(ii, &patches)?;
            let part_report = match &self.dump_dir {
                Some(dir) => {
                    let dir = dir.clone();
                    let mut write = |n: usize, s: &SparseSolution| -> Result<(), EnsembleError> {
                        let path = dir.join(format!("update{update_index:05}_part{k}_sel{n:02}.csv"));
                        write_solution_csv(&path, s).map_err(|e| EnsembleError::Dump {
                            path: path.clone(),
                            message: e.to_string(),
                        })
                    };
                    if let Err(e) = fs::create_dir_all(&dir) {
                        return Err(EnsembleError::Dump { path: dir, message: e.to_string() });
                    }
                    self.parts[k].learner.train(&batches, &labels, Some(&mut write))?
                }
                None => self.parts[k].learner.train(&batches, &labels, None)?,
            };
            if self.config.feature_replacement {
                self.parts[k].replace_worst()?;
            }
            report.parts.push(part_report);
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_cases() {
        assert_eq!(alpha_from_error(0.5), 0.0);
        assert!((alpha_from_error(0.1) - 0.5 * 9f64.ln()).abs() < 1e-12);
        assert!((alpha_from_error(0.0) - 0.5 * 9999f64.ln()).abs() < 1e-9);
        assert!(alpha_from_error(1.0).is_finite());
    }

    #[test]
    fn confidence_cases() {
        assert_eq!(strong_confidence(0.0, 1.0), 0.5);
        assert!((strong_confidence(1.0, 1.0) - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-15);
        assert!((strong_confidence(1.0, 1.0) - 0.7311).abs() < 1e-4);
        assert!(strong_confidence(1e3, 1.0) > 1.0 - 1e-12);
    }

    #[test]
    fn noisy_or_cases() {
        assert_eq!(combine_noisy_or(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(combine_noisy_or(&[0.2, 1.0, 0.4]).unwrap(), 1.0);
        assert_eq!(combine_noisy_or(&[0.5, 0.5]).unwrap(), 0.75);
        assert_eq!(combine_noisy_or(&[0.5, 1.5]).unwrap_err(), EnsembleError::Domain(1.5));
        assert!(combine_noisy_or(&[f64::NAN]).is_err());
    }

    #[test]
    fn log_miss_matches_noisy_or() {
        let margins = [0.3, -1.2, 2.0];
        let c: Vec<f64> = margins.iter().map(|&m| strong_confidence(m, 1.0)).collect();
        let fused = combine_noisy_or(&c).unwrap();
        assert!((noisy_or_log_miss(&margins, 1.0) - (-(1.0 - fused).ln())).abs() < 1e-12);
        // keeps ordering where the fused value has saturated
        assert!(noisy_or_log_miss(&[60.0], 1.0) > noisy_or_log_miss(&[50.0], 1.0));
    }

    #[test]
    fn margin_cases() {
        let sc = |alphas: &[f64]| StrongClassifier {
            part: 0,
            entries: alphas.iter().map(|&a| Selection { pool_index: 0, alpha: a }).collect(),
        };
        let s = sc(&[0.5, 0.3, 0.2]);
        assert_eq!(strong_margin(&s, &[Label::Pos; 3]), 1.0);
        assert!((strong_margin(&s, &[Label::Pos, Label::Neg, Label::Pos]) - 0.4).abs() < 1e-15);
        let s = sc(&[0.7, 0.7]);
        assert_eq!(strong_margin(&s, &[Label::Pos, Label::Neg]), 0.0);
    }

    #[test]
    fn halves_layout_on_even_and_odd_boxes() {
        let layout = PartLayout::halves();
        let r = Rect::new(10, 20, 30, 30);
        assert_eq!(layout.apply(0, &r), r);
        assert_eq!(layout.apply(1, &r), Rect::new(10, 20, 30, 15));
        assert_eq!(layout.apply(2, &r), Rect::new(10, 35, 30, 15));
        assert_eq!(layout.apply(3, &r), Rect::new(10, 20, 15, 30));
        assert_eq!(layout.apply(4, &r), Rect::new(25, 20, 15, 30));
        let odd = Rect::new(0, 0, 7, 1);
        for k in 0..layout.len() {
            let p = layout.apply(k, &odd);
            assert!(odd.contains_rect(&p) && p.w >= 1 && p.h >= 1, "{k}: {p:?}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(EnsembleConfig::default().validate().is_ok());
        let bad = EnsembleConfig { pool_size: 20, ..Default::default() };
        assert!(matches!(bad.validate(), Err(EnsembleError::Config(_))));
        let bad = EnsembleConfig { selectors: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EnsembleConfig { lambda: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(PartLayout::first(0).is_err());
        assert!(PartLayout::first(6).is_err());
        assert!(PartBox::new(0.5, 0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn one_sided_batch_rejected() {
        let cfg = EnsembleConfig { selectors: 2, pool_size: 5, ..Default::default() };
        let mut learner = PartLearner::new(0, &cfg);
        let batch = ResponseBatch { samples: 2, pool_size: 5, values: vec![0.0; 10] };
        let err = learner.train(&[batch], &[Label::Pos, Label::Pos], None).unwrap_err();
        assert_eq!(err, EnsembleError::OneSidedBatch);
    }
}
