use fwlab_core::cycles::{
    build_hierarchy, metastable_profile, metastable_state, oracle_distribution,
    predict_nonlinear_cauchy, random_generic, Basin, TransitionExponents,
};
use fwlab_core::RngStream;
use proptest::prelude::*;

/// Sample `lambda` in `(0, max + 1)` at distance >= 0.1 from every exit exponent.
fn safe_lambdas(exps: &[f64], rng: &mut RngStream, count: usize) -> Vec<f64> {
    let top = exps.last().copied().unwrap_or(0.0) + 1.0;
    let mut out = Vec::new();
    while out.len() < count {
        let l = 0.1 + (top - 0.1) * rng.uniform();
        if exps.iter().all(|e| (e - l).abs() >= 0.1) {
            out.push(l);
        }
    }
    out
}

#[test]
fn profiles_agree_with_the_oracle() {
    let mut rng = RngStream::new(2024, 0);
    let mut checked = 0;
    for trial in 0..30 {
        let l = 2 + trial % 5;
        let (v, h) = random_generic(l, 0.5, 3.0, 0.1, &mut rng).unwrap();
        let exps = h.exit_exponents();
        for start in 0..l {
            let profile = metastable_profile(&h, start).unwrap();
            for lambda in safe_lambdas(&exps, &mut rng, 4) {
                let s = profile.state_at(lambda);
                assert_eq!(s, metastable_state(&h, start, lambda).unwrap());
                let masses: Vec<f64> = [0.05, 0.02, 0.01]
                    .iter()
                    .map(|eps| oracle_distribution(&v, start, lambda, *eps).unwrap()[s])
                    .collect();
                assert!(
                    masses[2] >= 0.9,
                    "V = {:?}, start {start}, lambda {lambda}: masses {masses:?}",
                    v.rows()
                );
                assert!(masses[2] >= masses[0] - 1e-9);
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn oracle_long_time_goes_to_global_main_state() {
    let mut rng = RngStream::new(7, 0);
    let (v, h) = random_generic(5, 0.5, 3.0, 0.1, &mut rng).unwrap();
    let main = h.node(h.root).main_state;
    let lambda = h.exit_exponents().last().unwrap() + 0.5;
    let mut prev = 0.0;
    for eps in [0.05, 0.02, 0.01] {
        let m = oracle_distribution(&v, 0, lambda, eps).unwrap()[main];
        assert!(m >= prev - 1e-9);
        prev = m;
    }
    assert!(prev > 0.99);
}

#[test]
fn non_generic_matrix_is_rejected() {
    let v = TransitionExponents::new(vec![
        vec![0.0, 1.0, 1.0],
        vec![2.0, 0.0, 3.0],
        vec![1.0, 2.0, 0.0],
    ])
    .unwrap();
    assert!(build_hierarchy(&v).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hierarchy_partitions_every_rank(seed in 0u64..10_000, l in 1usize..7) {
        let mut rng = RngStream::new(seed, 1);
        let (_, h) = random_generic(l, 0.5, 3.0, 1e-6, &mut rng).unwrap();
        for rank in &h.ranks {
            let mut all: Vec<usize> = rank.iter().flat_map(|id| h.node(*id).members.clone()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..l).collect::<Vec<_>>());
        }
        prop_assert_eq!(h.node(h.root).members.len(), l);
        // exit exponents increase strictly through genuine cycles
        for leaf in 0..l {
            let chain: Vec<f64> = h
                .ancestors(leaf)
                .iter()
                .filter(|id| !h.node(**id).singleton)
                .filter_map(|id| h.node(*id).exit_exponent)
                .collect();
            prop_assert!(chain.windows(2).all(|w| w[1] > w[0]));
            let p = metastable_profile(&h, leaf).unwrap();
            prop_assert_eq!(p.states[0], leaf);
            prop_assert!(p.thresholds.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn nonlinear_weights_are_a_distribution(
        a in 0.2f64..2.0, b in 0.2f64..2.0, lambda in 0.0f64..6.0, basin_two in any::<bool>()
    ) {
        let z: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
        let v12: Vec<f64> = z.iter().map(|x| 1.0 + a * x * x).collect();
        let v21: Vec<f64> = z.iter().map(|x| 1.0 + b * (2.0 - x) * (2.0 - x)).collect();
        let basin = if basin_two { Basin::Two } else { Basin::One };
        if let Ok(r) = predict_nonlinear_cauchy(&z, &v12, &v21, basin, lambda, 0.0, 2.0) {
            prop_assert!(r.weight_mu1 >= 0.0 && r.weight_mu2 >= 0.0);
            prop_assert!((r.weight_mu1 + r.weight_mu2 - 1.0).abs() < 1e-12);
        }
    }
}
