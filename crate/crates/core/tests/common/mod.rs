#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsetrack::sparse_select::{LabelMatrix, LabelVector, SparseProblem};
use sparsetrack::imaging::{HaarFeature, HaarKind};
use sparsetrack::{Frame, Label, Rect};

pub fn random_label(rng: &mut impl Rng) -> Label {
    if rng.gen::<bool>() {
        Label::Pos
    } else {
        Label::Neg
    }
}

pub fn random_problem(seed: u64, l: usize, m: usize, lambda: f64) -> SparseProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Label> = (0..l).map(|_| random_label(&mut rng)).collect();
    let phi = LabelMatrix::from_fn(l, m, |_, _| random_label(&mut rng));
    SparseProblem::assemble(phi, LabelVector::from_labels(&labels), lambda).unwrap()
}

fn w_matrix(p: &SparseProblem) -> Vec<Vec<f64>> {
    (0..p.n_coords()).map(|j| p.w_column(j)).collect()
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Exact minimum of the program for tiny instances: some optimum has a
/// linearly independent support, so every support of size at most `L` is
/// tried with its stationarity system and non-negative candidates are kept.
pub fn support_oracle(p: &SparseProblem) -> (f64, Vec<f64>) {
    let w = w_matrix(p);
    let n = w.len();
    let l = p.samples();
    let y = p.y().values();
    let half = 0.5 * p.lambda();
    let mut best = (p.objective(&vec![0.0; n]), vec![0.0; n]);
    let mut support = Vec::with_capacity(l);
    fn rec(
        start: usize,
        support: &mut Vec<usize>,
        w: &[Vec<f64>],
        y: &[f64],
        half: f64,
        p: &SparseProblem,
        best: &mut (f64, Vec<f64>),
    ) {
        if !support.is_empty() {
            let k = support.len();
            let gram: Vec<Vec<f64>> = support
                .iter()
                .map(|&a| support.iter().map(|&b| dot(&w[a], &w[b])).collect())
                .collect();
            let rhs: Vec<f64> = support.iter().map(|&a| dot(&w[a], y) - half).collect();
            match solve_dense(gram, rhs) {
                Some(x) if x.iter().all(|&v| v >= 0.0) => {
                    let mut c = vec![0.0; w.len()];
                    for (i, &j) in support.iter().enumerate() {
                        c[j] = x[i];
                    }
                    let obj = p.objective(&c);
                    if obj < best.0 {
                        *best = (obj, c);
                    }
                }
                Some(_) => {}
                // a dependent support cannot be extended into an independent one
                None => return,
            }
            if k == y.len() {
                return;
            }
        }
        for j in start..w.len() {
            support.push(j);
            rec(j + 1, support, w, y, half, p, best);
            support.pop();
        }
    }
    rec(0, &mut support, &w, y, half, p, &mut best);
    best
}

/// Objective of the oracle minimizer snapped to the `step` grid on `[0, 2]`.
pub fn grid_snapped_objective(p: &SparseProblem, c: &[f64], step: f64) -> f64 {
    let snapped: Vec<f64> = c.iter().map(|v| ((v / step).round() * step).clamp(0.0, 2.0)).collect();
    p.objective(&snapped)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direct pixel-loop evaluation of a Haar feature on `patch`: the unit box is
/// snapped to the pixel grid, split into equal cells, and each cell's pixel
/// sum is weighted; the total is divided by the patch area.
pub fn naive_haar(frame: &Frame, f: &HaarFeature, patch: &Rect) -> Option<f64> {
    let (cols, rows, weights): (usize, usize, &[f64]) = match f.kind {
        HaarKind::TwoRectHorizontal => (1, 2, &[1.0, -1.0]),
        HaarKind::TwoRectVertical => (2, 1, &[1.0, -1.0]),
        HaarKind::ThreeRect => (3, 1, &[1.0, -2.0, 1.0]),
        HaarKind::FourRect => (2, 2, &[1.0, -1.0, -1.0, 1.0]),
    };
    let (pw, ph) = (patch.w as f64, patch.h as f64);
    let b = f.unit_box;
    let x0 = (b.x * pw).round() as usize;
    let y0 = (b.y * ph).round() as usize;
    let x1 = ((b.x + b.w) * pw).round().min(pw) as usize;
    let y1 = ((b.y + b.h) * ph).round().min(ph) as usize;
    let (cw, ch) = (x1.saturating_sub(x0) / cols, y1.saturating_sub(y0) / rows);
    if cw == 0 || ch == 0 {
        return None;
    }
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let mut s = 0.0;
            for y in 0..ch {
                for x in 0..cw {
                    let gx = patch.x as usize + x0 + c * cw + x;
                    let gy = patch.y as usize + y0 + r * ch + y;
                    s += frame.get(gx, gy);
                }
            }
            total += weights[r * cols + c] * s;
        }
    }
    Some(total / (pw * ph))
}
