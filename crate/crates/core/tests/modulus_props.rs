use hypdyn::modulus::{empirical_modulus, Modulus};
use proptest::prelude::*;

fn moduli() -> impl Strategy<Value = Modulus> {
    prop_oneof![
        (0.05f64..1.0).prop_map(|a| Modulus::power(a).unwrap()),
        (0.5f64..4.0).prop_map(|b| Modulus::log_power(b).unwrap()),
        (0.1f64..5.0).prop_map(|k| Modulus::linear(k).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slope_is_non_increasing(m in moduli(), s in 1e-9f64..1.0, f in 1.0f64..1e6) {
        let t = (s * f).min(m.t_max().min(1.0));
        prop_assume!(t > s);
        let ws = m.eval(s).unwrap();
        let wt = m.eval(t).unwrap();
        prop_assert!(ws / s >= wt / t * (1.0 - 1e-12), "ω(s)/s = {} < ω(t)/t = {}", ws / s, wt / t);
    }

    #[test]
    fn power_tilde_is_omega_over_alpha(alpha in 0.1f64..1.0, t in 1e-8f64..1.0) {
        let m = Modulus::power(alpha).unwrap();
        let exact = t.powf(alpha) / alpha;
        prop_assert!((m.tilde_integral(t).unwrap() - exact).abs() <= 1e-8 * exact);
    }

    #[test]
    fn sandwich_brackets_the_integral(m in moduli(), c in 0.2f64..0.9, n in 1usize..30) {
        let s = m.dini_sandwich(c, 1.0, n).unwrap();
        let slack = 1e-9 * s.upper.abs().max(1.0);
        prop_assert!(s.lower <= s.integral + slack && s.integral <= s.upper + slack, "{s:?}");
    }

    #[test]
    fn empirical_modulus_dominates_inputs(pairs in prop::collection::vec((1e-6f64..1.0, 0.0f64..3.0), 2..40)) {
        let m = empirical_modulus(&pairs).unwrap();
        for &(d, g) in &pairs {
            prop_assert!(m.eval(d).unwrap() >= g * (1.0 - 1e-12), "ω({d}) = {} < {g}", m.eval(d).unwrap());
        }
    }
}

#[test]
fn dini_classification_matches_series() {
    let cases = [
        (Modulus::power(0.5).unwrap(), true),
        (Modulus::linear(1.0).unwrap(), true),
        (Modulus::log_power(2.0).unwrap(), true),
        (Modulus::log_power(1.0).unwrap(), false),
        (Modulus::log_power(0.7).unwrap(), false),
    ];
    for (m, summable) in cases {
        let rep = m.dini_test_with(1e-10, &[0.3, 0.5, 0.9]).unwrap();
        assert_eq!(rep.summable, summable, "{}", m.kind_name());
        for s in &rep.series {
            assert_eq!(s.value.is_some(), summable, "{} c = {}", m.kind_name(), s.c);
        }
    }
}

#[test]
fn non_dini_moduli_reject_tilde() {
    let m = Modulus::log_power(1.0).unwrap();
    assert!(m.tilde_integral(0.1).is_err());
    assert!(m.equivalence_check(0.5, &[0.1]).is_err());
}

#[test]
fn modulus_json_round_trip() {
    for m in [Modulus::power(0.3).unwrap(), Modulus::log_power(2.0).unwrap(), Modulus::table(vec![(0.1, 0.2), (1.0, 0.5)]).unwrap()] {
        let text = serde_json::to_string(&m).unwrap();
        let back: Modulus = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        assert_eq!(back.eval(0.05).unwrap(), m.eval(0.05).unwrap());
    }
}
