use hypdyn::shift::{cylinder_mass, entropy_check, gibbs_bounds, rpf_solve, stationarity_residual, CylinderPotential, Sft, ShiftModel};
use proptest::prelude::*;

/// Irreducible SFTs: a Hamiltonian cycle plus random extra edges.
fn sfts() -> impl Strategy<Value = Sft> {
    sfts_with(false)
}

/// Mixing SFTs: a self-loop on top of the cycle makes the graph aperiodic.
fn mixing_sfts() -> impl Strategy<Value = Sft> {
    sfts_with(true)
}

fn sfts_with(self_loop: bool) -> impl Strategy<Value = Sft> {
    (2usize..4).prop_flat_map(move |k| prop::collection::vec(any::<bool>(), k * k).prop_map(move |extra| {
        let mut a = vec![vec![0u8; k]; k];
        if self_loop {
            a[0][0] = 1;
        }
        for i in 0..k {
            a[i][(i + 1) % k] = 1;
            for j in 0..k {
                if extra[i * k + j] {
                    a[i][j] = 1;
                }
            }
        }
        Sft::new(a).unwrap()
    }))
}

fn potential(sft: &Sft, depth: usize, seed: u64) -> CylinderPotential {
    CylinderPotential::from_fn(sft, depth, |w| {
        let h = w.iter().fold(seed, |acc, &s| acc.wrapping_mul(6364136223846793005).wrapping_add(s as u64 + 1));
        ((h >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn perron_data_is_positive_and_stationary(sft in sfts(), depth in 2usize..5, seed in any::<u64>()) {
        let pot = potential(&sft, depth, seed);
        let d = rpf_solve(&sft, &pot, 1e-13).unwrap();
        prop_assert!(d.eigenfunction.iter().all(|&h| h > 0.0));
        prop_assert!(d.eigenmeasure.iter().all(|&v| v > 0.0));
        prop_assert!((d.gibbs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(stationarity_residual(&sft, &pot, &d).unwrap() < 1e-9);
        prop_assert!(entropy_check(&sft, &pot, &d).unwrap().residual < 1e-8);
    }

    #[test]
    fn constant_shift_scales_the_eigenvalue(sft in sfts(), seed in any::<u64>(), c in -2.0f64..2.0) {
        let pot = potential(&sft, 3, seed);
        let a = rpf_solve(&sft, &pot, 1e-13).unwrap();
        let b = rpf_solve(&sft, &pot.shifted(c), 1e-13).unwrap();
        prop_assert!((b.eigenvalue / a.eigenvalue - c.exp()).abs() < 1e-9 * c.exp());
        for (x, y) in a.gibbs.iter().zip(&b.gibbs) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn cylinder_masses_are_consistent(sft in sfts(), seed in any::<u64>(), n in 3usize..7) {
        let pot = potential(&sft, 3, seed);
        let d = rpf_solve(&sft, &pot, 1e-13).unwrap();
        let words = sft.admissible_words(n);
        let total: f64 = words.iter().map(|w| cylinder_mass(&sft, &pot, &d, w).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        // Refinement: μ[w] = Σ_a μ[wa].
        for w in words.iter().take(6) {
            let parent = cylinder_mass(&sft, &pot, &d, w).unwrap();
            let children: f64 = (0..sft.alphabet_size() as u8)
                .map(|a| {
                    let mut c = w.clone();
                    c.push(a);
                    if sft.is_admissible(&c) { cylinder_mass(&sft, &pot, &d, &c).unwrap() } else { 0.0 }
                })
                .sum();
            prop_assert!((parent - children).abs() < 1e-10 * parent.max(1e-300));
        }
    }

    #[test]
    fn gibbs_bounds_are_positive_and_finite(sft in sfts(), seed in any::<u64>()) {
        let pot = potential(&sft, 3, seed);
        let d = rpf_solve(&sft, &pot, 1e-13).unwrap();
        let g = gibbs_bounds(&sft, &pot, &d, 12).unwrap();
        prop_assert!(g.b > 0.0 && g.big_b >= g.b && g.big_b.is_finite() && g.spread.is_finite());
    }

    #[test]
    fn gibbs_ratio_constants_do_not_drift(sft in mixing_sfts(), seed in any::<u64>()) {
        let pot = potential(&sft, 3, seed);
        let d = rpf_solve(&sft, &pot, 1e-13).unwrap();
        let g = gibbs_bounds(&sft, &pot, &d, 12).unwrap();
        // Once head and tail windows stop overlapping and every head can reach
        // every tail (2(m−1) plus the primitivity exponent, at most 5 here)
        // the bounds are exact constants.
        let settled: Vec<_> = g.rows.iter().filter(|r| r.n >= 9).collect();
        prop_assert!(settled.len() >= 2);
        for r in &settled {
            prop_assert!((r.lower / settled[0].lower - 1.0).abs() < 1e-9);
            prop_assert!((r.upper / settled[0].upper - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn bernoulli_measure_of_cylinders() {
    let (sft, pot) = CylinderPotential::bernoulli(3, 0.3).unwrap();
    let d = rpf_solve(&sft, &pot, 1e-13).unwrap();
    assert!(d.pressure.abs() < 1e-12);
    let m = cylinder_mass(&sft, &pot, &d, &[0, 0, 1, 0]).unwrap();
    assert!((m - 0.3 * 0.3 * 0.7 * 0.3).abs() < 1e-12);
    let h = -(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
    assert!((entropy_check(&sft, &pot, &d).unwrap().entropy - h).abs() < 1e-10);
}

#[test]
fn golden_mean_perron_root() {
    let sft = Sft::golden_mean();
    let d = rpf_solve(&sft, &CylinderPotential::zero(&sft, 5).unwrap(), 1e-13).unwrap();
    assert!((d.eigenvalue - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-10);
}

#[test]
fn reducible_and_malformed_inputs_are_rejected() {
    let reducible = Sft::new(vec![vec![1, 1], vec![0, 1]]).unwrap();
    assert!(rpf_solve(&reducible, &CylinderPotential::zero(&reducible, 2).unwrap(), 1e-12).is_err());
    assert!(Sft::new(vec![vec![1, 2], vec![1, 1]]).is_err());
    assert!(Sft::new(vec![vec![0, 0], vec![1, 1]]).is_err());
    let gm = Sft::golden_mean();
    let zero = CylinderPotential::zero(&gm, 2).unwrap();
    let d = rpf_solve(&gm, &zero, 1e-12).unwrap();
    assert_eq!(cylinder_mass(&gm, &zero, &d, &[0, 1, 1]).unwrap(), 0.0);
}

#[test]
fn model_json_round_trip() {
    let sft = Sft::golden_mean();
    let pot = potential(&sft, 3, 7);
    let model = ShiftModel::from_parts(&sft, &pot);
    let text = serde_json::to_string(&model).unwrap();
    let back: ShiftModel = serde_json::from_str(&text).unwrap();
    let (s2, p2) = back.build().unwrap();
    let a = rpf_solve(&sft, &pot, 1e-13).unwrap();
    let b = rpf_solve(&s2, &p2, 1e-13).unwrap();
    assert_eq!(a.eigenvalue, b.eigenvalue);
    assert!(serde_json::from_str::<ShiftModel>(r#"{"alphabet_size":2,"adjacency":[[1,1],[1,1]],"depth":2,"values":{},"x":1}"#).is_err());
}
