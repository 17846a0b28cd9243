//! Exact solver for the non-negative ℓ1 program through its dual.
//!
//! The dual of `min ‖Wc − y‖² + λ‖c‖₁, c ≥ 0` is the Euclidean projection of
//! `y` onto the polyhedron `{u : w_jᵀu ≤ λ/2 for every column j of W}`. The
//! projection is computed with the Goldfarb–Idnani dual active-set method
//! specialised to an identity Hessian. At the optimum `u = y − Wc` is the
//! primal residual and the constraint multipliers are the coefficients `c`.
//!
//! The active constraint normals are kept in a QR factorization `N = Q R`
//! updated with Givens rotations, so adding or dropping a constraint costs
//! `O(L²)`.
//!
//! A [`DualActiveSet`] keeps its factorization between solves. Excluding a
//! pool member after a solve drops its constraint and restarts from the
//! remaining active set, which is how successive selectors are served.

use super::{SolverOptions, SparseProblem, SparseSolution};

const RATIO_EPS: f64 = 1e-12;
const DEPENDENT_EPS: f64 = 1e-18;

#[derive(Clone, Debug)]
pub struct DualActiveSet<'a> {
    problem: &'a SparseProblem,
    options: SolverOptions,
    bound: f64,
    frozen: Vec<bool>,
    in_active: Vec<bool>,
    /// `L × L`, column-major, orthogonal.
    q: Vec<f64>,
    /// `L × L`, column-major; the leading `active.len()` block is upper triangular.
    r: Vec<f64>,
    active: Vec<usize>,
    mu: Vec<f64>,
    u: Vec<f64>,
    iterations: usize,
}

impl<'a> DualActiveSet<'a> {
    pub fn new(problem: &'a SparseProblem, options: SolverOptions) -> Self {
        let l = problem.samples();
        let mut q = vec![0.0; l * l];
        for i in 0..l {
            q[i * l + i] = 1.0;
        }
        Self {
            problem,
            options,
            bound: 0.5 * problem.lambda(),
            frozen: vec![false; problem.n_coords()],
            in_active: vec![false; problem.n_coords()],
            q,
            r: vec![0.0; l * l],
            active: Vec::with_capacity(l),
            mu: Vec::with_capacity(l),
            u: problem.y().values().to_vec(),
            iterations: 0,
        }
    }

    /// Removes pool member `m` from the program (pins `β_m = 0`).
    pub fn exclude(&mut self, m: usize) {
        assert!(m < self.problem.pool_size());
        if self.frozen[m] {
            return;
        }
        self.frozen[m] = true;
        if let Some(k) = self.active.iter().position(|&j| j == m) {
            self.drop_constraint(k);
            self.restore_invariant();
        }
    }

    pub fn solve(&mut self) -> SparseSolution {
        self.iterations = 0;
        let finished = self.run();
        let p = self.problem;
        let mut c = vec![0.0; p.n_coords()];
        for (&j, &mu) in self.active.iter().zip(&self.mu) {
            c[j] = mu.max(0.0);
        }
        let objective = p.objective(&c);
        let frozen_beta = &self.frozen[..p.pool_size()];
        let kkt = p.kkt_residual(&c, frozen_beta);
        let (m, l) = (p.pool_size(), p.samples());
        SparseSolution {
            beta: c[..m].to_vec(),
            e_pos: c[m..m + l].to_vec(),
            e_neg: c[m + l..].to_vec(),
            objective,
            iterations: self.iterations,
            converged: finished && kkt <= self.options.tol_kkt,
            kkt_residual: kkt,
            trace: Vec::new(),
        }
    }

    fn l(&self) -> usize {
        self.problem.samples()
    }

    /// `a_jᵀ v` for constraint `j` (a column of `W`).
    fn dot_a(&self, j: usize, v: &[f64]) -> f64 {
        let (m, l) = (self.problem.pool_size(), self.l());
        if j < m {
            dot(self.problem.phi().column(j), v)
        } else if j < m + l {
            v[j - m]
        } else {
            -v[j - m - l]
        }
    }

    fn norm2_a(&self, j: usize) -> f64 {
        if j < self.problem.pool_size() {
            self.problem.samples() as f64
        } else {
            1.0
        }
    }

    /// `Qᵀ a_j`.
    fn qt_a(&self, j: usize) -> Vec<f64> {
        let (m, l) = (self.problem.pool_size(), self.l());
        if j < m {
            let col = self.problem.phi().column(j);
            (0..l).map(|c| dot(&self.q[c * l..(c + 1) * l], col)).collect()
        } else {
            let (i, sign) = if j < m + l { (j - m, 1.0) } else { (j - m - l, -1.0) };
            (0..l).map(|c| sign * self.q[c * l + i]).collect()
        }
    }

    /// Solves `R[..n, ..n] x = rhs` by back substitution.
    fn back_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let l = self.l();
        let n = rhs.len();
        let mut x = rhs.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.r[k * l + i] * x[k];
            }
            x[i] = s / self.r[i * l + i];
        }
        x
    }

    /// Solves `R[..n, ..n]ᵀ x = rhs` by forward substitution.
    fn forward_solve_t(&self, rhs: &[f64]) -> Vec<f64> {
        let l = self.l();
        let n = rhs.len();
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.r[i * l + k] * x[k];
            }
            x[i] = s / self.r[i * l + i];
        }
        x
    }

    fn rotate_q(&mut self, a: usize, b: usize, c: f64, s: f64) {
        let l = self.l();
        for i in 0..l {
            let x = self.q[a * l + i];
            let y = self.q[b * l + i];
            self.q[a * l + i] = c * x + s * y;
            self.q[b * l + i] = -s * x + c * y;
        }
    }

    fn add_constraint(&mut self, j: usize, mut d: Vec<f64>, mu: f64) {
        let l = self.l();
        let n = self.active.len();
        for i in (n + 1..l).rev() {
            let (a, b) = (d[i - 1], d[i]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            d[i - 1] = h;
            d[i] = 0.0;
            self.rotate_q(i - 1, i, c, s);
        }
        for i in 0..=n {
            self.r[n * l + i] = d[i];
        }
        self.active.push(j);
        self.mu.push(mu);
        self.in_active[j] = true;
    }

    fn drop_constraint(&mut self, k: usize) {
        let l = self.l();
        let n = self.active.len();
        let j = self.active.remove(k);
        self.mu.remove(k);
        self.in_active[j] = false;
        // shift columns k+1.. left, leaving an upper Hessenberg block
        for col in k..n - 1 {
            for i in 0..=col + 1 {
                self.r[col * l + i] = self.r[(col + 1) * l + i];
            }
        }
        for i in 0..l {
            self.r[(n - 1) * l + i] = 0.0;
        }
        for col in k..n - 1 {
            let (a, b) = (self.r[col * l + col], self.r[col * l + col + 1]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for cc in col..n - 1 {
                let x = self.r[cc * l + col];
                let y = self.r[cc * l + col + 1];
                self.r[cc * l + col] = c * x + s * y;
                self.r[cc * l + col + 1] = -s * x + c * y;
            }
            self.rotate_q(col, col + 1, c, s);
        }
    }

    /// Re-derives multipliers and `u` for the current active set treated as
    /// equalities, dropping constraints until every multiplier is non-negative.
    fn restore_invariant(&mut self) {
        let l = self.l();
        loop {
            let n = self.active.len();
            if n == 0 {
                self.u = self.problem.y().values().to_vec();
                return;
            }
            // N = Q₁R;  Nᵀ(y − Nμ) = b1  ⇒  Rμ = Q₁ᵀy − R⁻ᵀ(b1)
            let y = self.problem.y().values();
            let qty: Vec<f64> = (0..n).map(|c| dot(&self.q[c * l..(c + 1) * l], y)).collect();
            let rb = self.forward_solve_t(&vec![self.bound; n]);
            let rhs: Vec<f64> = qty.iter().zip(&rb).map(|(a, b)| a - b).collect();
            let mu = self.back_solve(&rhs);
            let (k, worst) = mu
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            if worst < 0.0 {
                self.drop_constraint(k);
                continue;
            }
            self.mu = mu;
            let mut u = y.to_vec();
            for idx in 0..n {
                self.axpy_a(self.active[idx], -self.mu[idx], &mut u);
            }
            self.u = u;
            return;
        }
    }

    /// `v += s · a_j`.
    fn axpy_a(&self, j: usize, s: f64, v: &mut [f64]) {
        let (m, l) = (self.problem.pool_size(), self.l());
        if j < m {
            for (x, &a) in v.iter_mut().zip(self.problem.phi().column(j)) {
                *x += s * a;
            }
        } else if j < m + l {
            v[j - m] += s;
        } else {
            v[j - m - l] -= s;
        }
    }

    /// Most violated inactive constraint, if any violation exceeds the tolerance.
    fn most_violated(&self) -> Option<(usize, f64)> {
        let (m, l) = (self.problem.pool_size(), self.l());
        let mut best: Option<(usize, f64)> = None;
        let mut consider = |j: usize, slack: f64| {
            if slack < -self.options.tol && best.map_or(true, |(_, s)| slack < s) {
                best = Some((j, slack));
            }
        };
        for j in 0..m {
            if self.frozen[j] || self.in_active[j] {
                continue;
            }
            consider(j, self.bound - dot(self.problem.phi().column(j), &self.u));
        }
        for i in 0..l {
            if !self.in_active[m + i] {
                consider(m + i, self.bound - self.u[i]);
            }
            if !self.in_active[m + l + i] {
                consider(m + l + i, self.bound + self.u[i]);
            }
        }
        best
    }

    /// Main loop. Returns false if the iteration cap is hit.
    fn run(&mut self) -> bool {
        let l = self.l();
        loop {
            let Some((p, _)) = self.most_violated() else {
                return true;
            };
            let a_norm2 = self.norm2_a(p);
            let mut mu_p = 0.0;
            loop {
                self.iterations += 1;
                if self.iterations > self.options.max_iter {
                    return false;
                }
                let n = self.active.len();
                let d = self.qt_a(p);
                let r = self.back_solve(&d[..n]);
                let z_norm2: f64 = d[n..].iter().map(|v| v * v).sum();

                let mut t1 = f64::INFINITY;
                let mut blocking = None;
                for (idx, &rv) in r.iter().enumerate() {
                    if rv > RATIO_EPS {
                        let t = self.mu[idx] / rv;
                        if t < t1 {
                            t1 = t;
                            blocking = Some(idx);
                        }
                    }
                }

                if z_norm2 <= DEPENDENT_EPS * a_norm2 {
                    // a_p lies in the span of the active normals: only the
                    // multipliers move, until one of them reaches zero
                    let Some(k) = blocking else {
                        // cannot happen for this program (u = 0 is always feasible)
                        log::warn!("dual active set: constraint {p} is infeasible");
                        return false;
                    };
                    for (mu, rv) in self.mu.iter_mut().zip(&r) {
                        *mu -= t1 * rv;
                    }
                    mu_p += t1;
                    self.drop_constraint(k);
                    continue;
                }

                let violation = self.dot_a(p, &self.u) - self.bound;
                let t2 = (violation / z_norm2).max(0.0);
                let t = t1.min(t2);
                // u -= t·z, with z = Q₂d₂
                for c in n..l {
                    let coef = t * d[c];
                    if coef != 0.0 {
                        for (x, &qv) in self.u.iter_mut().zip(&self.q[c * l..(c + 1) * l]) {
                            *x -= coef * qv;
                        }
                    }
                }
                for (mu, rv) in self.mu.iter_mut().zip(&r) {
                    *mu -= t * rv;
                }
                mu_p += t;
                if t2 <= t1 {
                    self.add_constraint(p, d, mu_p);
                    break;
                }
                self.drop_constraint(blocking.expect("finite t1 has a blocking constraint"));
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
