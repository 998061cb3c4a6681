use hypdyn::horseshoe::{build_g, build_tree, lambda_measure, lambda_measure_truncated, HorseshoeParams};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn leaves_and_gaps_reassemble_the_interval(offset in 4.0f64..40.0, depth in 0usize..12) {
        let p = HorseshoeParams::new(offset).unwrap();
        for (interval, schedule) in [(p.interval_i(), p.alpha_schedule(depth)), (p.interval_j(), p.beta_schedule(depth))] {
            let tree = build_tree(interval, &schedule, depth).unwrap();
            let leaves = tree.leaves().unwrap();
            prop_assert_eq!(leaves.len(), 1usize << (depth + 1));
            for w in leaves.windows(2) {
                prop_assert!(w[0].1 < w[1].0, "leaves overlap: {:?}", w);
            }
            let leaf_total: f64 = leaves.iter().map(|(a, b)| b - a).sum();
            let gaps: f64 = schedule[..=depth].iter().sum();
            let len = interval.1 - interval.0;
            prop_assert!((leaf_total + gaps - len).abs() < 1e-12);
            prop_assert!((leaves[0].0 - interval.0).abs() <= tree.error_bound);
            prop_assert!((leaves.last().unwrap().1 - interval.1).abs() <= tree.error_bound + 1e-15);
        }
    }

    #[test]
    fn g_is_increasing_with_positive_derivative(offset in 4.0f64..40.0, depth in 0usize..10, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let p = HorseshoeParams::new(offset).unwrap();
        let g = build_g(&p, depth).unwrap();
        let (a, b) = p.interval_i();
        let (x, y) = (a + (b - a) * u.min(v), a + (b - a) * u.max(v));
        prop_assert!(g.eval(x).unwrap() <= g.eval(y).unwrap() + 1e-15);
        prop_assert!(g.derivative(x).unwrap() > 0.0);
    }

    #[test]
    fn gap_derivative_stays_in_the_band(offset in 4.0f64..40.0, level in 0usize..20, s in 0.0f64..=1.0) {
        let p = HorseshoeParams::new(offset).unwrap();
        let g = build_g(&p, 20).unwrap();
        let d = g.gap_derivative(level, s);
        let delta = p.delta(level);
        prop_assert!(d >= 2.0 - delta);
        prop_assert!(d <= p.beta(level) / p.alpha(level) + delta + 1e-12);
    }
}

#[test]
fn gap_endpoints_have_slope_two_and_images_match() {
    let p = HorseshoeParams::default();
    let g = build_g(&p, 12).unwrap();
    for level in 0..=12 {
        assert!((g.gap_derivative(level, 0.0) - 2.0).abs() < 1e-15);
        assert!((g.gap_derivative(level, 1.0) - 2.0).abs() < 1e-15);
    }
    let (a, b) = p.interval_i();
    assert!((g.eval(a).unwrap() + 1.0).abs() < 1e-12);
    assert!((g.eval(b).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn truncated_measure_decreases_to_the_limit() {
    let p = HorseshoeParams::default();
    let limit = lambda_measure(&p).value;
    let mut prev = f64::INFINITY;
    for depth in [0, 1, 2, 5, 10, 50, 200, 1000, 10_000] {
        let (value, bound) = lambda_measure_truncated(&p, depth);
        assert!(value < prev, "depth {depth}");
        assert!(value >= limit - 1e-12);
        assert!(value - limit <= bound + 1e-12, "depth {depth}: {} > {bound}", value - limit);
        prev = value;
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(HorseshoeParams::new(0.5).is_err());
    assert!(build_g(&HorseshoeParams::default(), 31).is_err());
    assert!(build_tree((0.0, 1.0), &[2.0], 0).is_err());
}
