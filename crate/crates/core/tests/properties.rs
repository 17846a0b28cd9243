mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparsetrack::ensemble::{alpha_from_error, combine_noisy_or, strong_confidence};
use sparsetrack::evaluation::{center_error, overlap, success_rate};
use sparsetrack::imaging::{random_feature, IntegralImage};
use sparsetrack::sparse_select::{solve_nn_l1, SolverOptions, SparseProblem};
use sparsetrack::weak_learn::{GaussianPair, KalmanParams, WeakClassifier};
use sparsetrack::{Frame, Label, Rect};

fn rect() -> impl Strategy<Value = Rect> {
    (-20i32..40, -20i32..40, 1i32..30, 1i32..30).prop_map(|(x, y, w, h)| Rect::new(x, y, w, h))
}

proptest! {
    #[test]
    fn noisy_or_is_bounded(c in prop::collection::vec(0.0f64..=1.0, 1..8)) {
        let fused = combine_noisy_or(&c).unwrap();
        let max = c.iter().copied().fold(0.0, f64::max);
        let sum: f64 = c.iter().sum();
        prop_assert!(max <= fused + 1e-12);
        prop_assert!(fused <= sum.min(1.0) + 1e-12);
    }

    #[test]
    fn noisy_or_is_monotone(c in prop::collection::vec(0.0f64..=1.0, 1..8), k in 0usize..8, bump in 0.0f64..1.0) {
        let k = k % c.len();
        let mut up = c.clone();
        up[k] = (up[k] + bump).min(1.0);
        prop_assert!(combine_noisy_or(&up).unwrap() >= combine_noisy_or(&c).unwrap() - 1e-15);
    }

    #[test]
    fn alpha_decreases_with_error(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(alpha_from_error(lo) >= alpha_from_error(hi));
        prop_assert!(alpha_from_error(lo).is_finite());
    }

    #[test]
    fn confidence_is_monotone_in_margin(a in -50.0f64..50.0, b in -50.0f64..50.0, scale in 0.01f64..5.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (cl, ch) = (strong_confidence(lo, scale), strong_confidence(hi, scale));
        prop_assert!(cl <= ch);
        prop_assert!((0.0..=1.0).contains(&cl) && (0.0..=1.0).contains(&ch));
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(a in rect(), b in rect()) {
        let o = overlap(&a, &b);
        prop_assert_eq!(o, overlap(&b, &a));
        prop_assert!((0.0..=1.0).contains(&o));
        prop_assert_eq!(overlap(&a, &a), 1.0);
    }

    #[test]
    fn center_error_is_a_metric(a in rect(), b in rect(), c in rect()) {
        prop_assert_eq!(center_error(&a, &b), center_error(&b, &a));
        prop_assert!(center_error(&a, &c) <= center_error(&a, &b) + center_error(&b, &c) + 1e-12);
        prop_assert_eq!(center_error(&a, &a), 0.0);
    }

    #[test]
    fn success_rate_falls_with_threshold(o in prop::collection::vec(0.0f64..=1.0, 0..30), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(success_rate(&o, lo).unwrap() >= success_rate(&o, hi).unwrap());
    }

    #[test]
    fn swapping_classes_flips_predictions(
        mu_p in -2.0f64..2.0, mu_n in -2.0f64..2.0,
        s_p in 0.01f64..2.0, s_n in 0.01f64..2.0,
        x in -5.0f64..5.0,
    ) {
        let model = GaussianPair { mu_pos: mu_p, sigma_pos: s_p, mu_neg: mu_n, sigma_neg: s_n, p_var_pos: 1.0, p_var_neg: 1.0 };
        let wc = WeakClassifier { feature_index: 0, model };
        let swapped = WeakClassifier { feature_index: 0, model: model.swapped() };
        let dp = -s_p.ln() - 0.5 * ((x - mu_p) / s_p).powi(2);
        let dn = -s_n.ln() - 0.5 * ((x - mu_n) / s_n).powi(2);
        prop_assume!((dp - dn).abs() > 1e-9);
        prop_assert_eq!(swapped.predict(x), -wc.predict(x));
    }

    #[test]
    fn kalman_updates_stay_finite(xs in prop::collection::vec((-1e3f64..1e3, any::<bool>()), 1..200)) {
        let params = KalmanParams::default();
        let mut wc = WeakClassifier::new(0, &params);
        for (x, pos) in xs {
            let gain = wc.update(x, if pos { Label::Pos } else { Label::Neg }, &params);
            prop_assert!((0.0..=1.0).contains(&gain));
        }
        let m = wc.model;
        for v in [m.mu_pos, m.mu_neg, m.sigma_pos, m.sigma_neg, m.p_var_pos, m.p_var_neg] {
            prop_assert!(v.is_finite());
        }
        prop_assert!(m.sigma_pos >= params.sigma_min && m.sigma_neg >= params.sigma_min);
    }

    #[test]
    fn haar_matches_pixel_sums(seed in any::<u64>(), w in 4usize..20, h in 4usize..20, px in 0usize..10, py in 0usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = Frame::from_fn(30, 30, |x, y| ((x * 7 + y * 13 + seed as usize) % 17) as f64 / 16.0).unwrap();
        let ii = IntegralImage::new(&frame);
        let f = random_feature(&mut rng, 0.2);
        let patch = Rect::new(px as i32, py as i32, w as i32, h as i32);
        prop_assume!(f.scale_to(w, h).is_ok());
        let got = f.scale_to(w, h).unwrap().eval(&ii, &patch).unwrap();
        let want = common::naive_haar(&frame, &f, &patch).unwrap();
        prop_assert!((got - want).abs() <= 1e-9, "{} vs {}", got, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn column_order_does_not_change_the_optimum(seed in any::<u64>(), l in 3usize..12, m in 2usize..10) {
        let p = common::random_problem(seed, l, m, 0.05);
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let q = SparseProblem::assemble(p.phi().permute_columns(&perm), p.y().clone(), p.lambda()).unwrap();
        let opts = SolverOptions::default();
        let (a, b) = (solve_nn_l1(&p, &opts), solve_nn_l1(&q, &opts));
        prop_assert!((a.objective - b.objective).abs() <= 1e-9);
        // the permuted solution is optimal for the permuted problem
        let mut c = b.coefficients();
        for (new, &old) in perm.iter().enumerate() {
            c[new] = a.beta[old];
        }
        c[m..].copy_from_slice(&a.coefficients()[m..]);
        prop_assert!(q.kkt_residual(&c, &vec![false; q.n_coords()]) <= 1e-6);
    }
}
