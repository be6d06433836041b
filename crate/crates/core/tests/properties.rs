use proptest::prelude::*;
use rand::Rng;
use smoothinglab_core::brw::{self, Vertex};
use smoothinglab_core::exponent::solve_alpha;
use smoothinglab_core::fixpoint::{apply_smoothing, default_grid, GridFunction, LowerTail};
use smoothinglab_core::fractal::{cylinder_masses, MassMode};
use smoothinglab_core::rng::Streams;
use smoothinglab_core::rwalk::{make_increment_law, many_to_one_verify, IncrementLaw};
use smoothinglab_core::stats::{ks_two_sample, mean_ci};
use smoothinglab_core::weights::{WeightModel, WeightSequence};

fn supercritical_weights() -> impl Strategy<Value = Vec<f64>> {
    // Two or three weights in (0.05, 0.95) with sum above 1.
    prop::collection::vec(0.05f64..0.95, 2..=3).prop_filter("sum > 1", |w| w.iter().sum::<f64>() > 1.05)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, .. ProptestConfig::default() })]

    #[test]
    fn sequences_are_sorted_and_nonnegative(ws in prop::collection::vec(0.0f64..3.0, 0..8)) {
        let s = WeightSequence::new(ws.clone());
        prop_assert_eq!(s.len(), ws.len());
        prop_assert!(s.as_slice().windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn root_solves_the_moment_equation(ws in supercritical_weights()) {
        let m = WeightModel::deterministic(&ws).unwrap();
        let r = solve_alpha(&m, (0.01, 50.0), 1e-12, 1, &Streams::new(0)).unwrap();
        let m_alpha: f64 = ws.iter().map(|w| w.powf(r.alpha)).sum();
        prop_assert!((m_alpha - 1.0).abs() < 1e-9, "alpha {} m {}", r.alpha, m_alpha);
        // Weights below 1 make m strictly decreasing, so the root is unique.
        prop_assert!(r.m_prime_alpha.mean < 0.0);
    }

    #[test]
    fn additive_martingale_is_one_for_deterministic_models(ws in supercritical_weights(), n in 1usize..6) {
        let m = WeightModel::deterministic(&ws).unwrap();
        let alpha = solve_alpha(&m, (0.01, 50.0), 1e-13, 1, &Streams::new(0)).unwrap().alpha;
        let t = brw::simulate(&m, n, 1 << 12, 0).unwrap();
        let w = brw::additive_w(&t, alpha, n).unwrap();
        prop_assert!((w - 1.0).abs() < 1e-9 * n as f64, "{}", w);
    }

    #[test]
    fn many_to_one_is_exact_for_deterministic_models(ws in supercritical_weights(), n in 1usize..5, cut in 0.0f64..3.0) {
        let m = WeightModel::deterministic(&ws).unwrap();
        let alpha = solve_alpha(&m, (0.01, 50.0), 1e-13, 1, &Streams::new(0)).unwrap().alpha;
        let g = move |p: &[f64]| if p.last().copied().unwrap_or(0.0) < cut { 1.0 } else { 0.0 };
        let r = many_to_one_verify(&m, alpha, n, g, 1, 1 << 12, 1e-9, &Streams::new(1)).unwrap();
        prop_assert!(r.exact);
        prop_assert!((r.tree.mean - r.walk.mean).abs() < 1e-9, "{:?}", r);
    }

    #[test]
    fn size_biased_law_is_a_probability(ws in supercritical_weights()) {
        let m = WeightModel::deterministic(&ws).unwrap();
        let alpha = solve_alpha(&m, (0.01, 50.0), 1e-13, 1, &Streams::new(0)).unwrap().alpha;
        match make_increment_law(&m, alpha, 1e-9).unwrap() {
            IncrementLaw::Discrete { probs, .. } => {
                prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(probs.iter().all(|&p| p > 0.0));
            }
            other => prop_assert!(false, "unexpected law {:?}", other),
        }
    }

    #[test]
    fn cylinder_masses_partition_the_total(seed in 0u64..1000, d in 0usize..4) {
        let m = WeightModel::gaussian_binary(1.0, 0.5).unwrap();
        let t = brw::simulate(&m, 5, 1 << 10, seed).unwrap();
        let total: f64 = cylinder_masses(&t, 0, 5, 0.8, MassMode::Regular).unwrap()[0].1;
        let parts: f64 = cylinder_masses(&t, d, 5, 0.8, MassMode::Regular).unwrap().iter().map(|(_, m)| m).sum();
        prop_assert!((total - parts).abs() <= 1e-12 * total.max(1.0));
    }

    #[test]
    fn smoothing_preserves_monotonicity(a in 0.1f64..3.0, p in 0.3f64..1.5) {
        let f = GridFunction::from_fn(default_grid(), |t| (-a * t.powf(p)).exp(), LowerTail::One).unwrap();
        let m = WeightModel::deterministic(&[0.7, 0.4]).unwrap();
        let g = apply_smoothing(&f, &m, 1, &Streams::new(0)).unwrap().f;
        prop_assert!(g.values().windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(g.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn grid_functions_evaluate_monotonically(a in 0.1f64..3.0, s in prop::collection::vec(1e-6f64..2e3, 2..20)) {
        let f = GridFunction::from_fn(default_grid(), |t| 1.0 / (1.0 + a * t), LowerTail::SelfSimilar { alpha: 1.0, period: 1.0 }).unwrap();
        let mut s = s;
        s.sort_by(f64::total_cmp);
        let v: Vec<f64> = s.iter().map(|&t| f.eval(t)).collect();
        prop_assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn prefixes_are_ancestors(path in prop::collection::vec(1u32..4, 0..8), k in 0usize..8) {
        let v = Vertex(path);
        let u = v.truncate(k);
        prop_assert!(u.is_ancestor_or_self(&v));
        prop_assert!(Vertex::root().is_ancestor_or_self(&v));
        prop_assert_eq!(u.depth(), k.min(v.depth()));
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), i in 0u64..1000) {
        let a: u64 = Streams::new(seed).sub("x").rng(i).random();
        let b: u64 = Streams::new(seed).sub("x").rng(i).random();
        let c: u64 = Streams::new(seed).sub("y").rng(i).random();
        prop_assert_eq!(a, b);
        prop_assert_ne!(a, c);
    }

    #[test]
    fn summary_and_ks_basics(xs in prop::collection::vec(-1e3f64..1e3, 1..200), c in -10.0f64..10.0) {
        let s = mean_ci(&vec![c; xs.len()], 0.95).unwrap();
        prop_assert_eq!(s.sd, 0.0);
        let r = ks_two_sample(&xs, &xs, 0.01).unwrap();
        prop_assert_eq!(r.statistic, 0.0);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 1e4).collect();
        let r = ks_two_sample(&xs, &shifted, 0.01).unwrap();
        prop_assert_eq!(r.statistic, 1.0);
    }
}
