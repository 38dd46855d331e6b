use fwlab_core::markov::{
    build_markov_hierarchy, chain_oracle, invariant_measure_direct, invariant_measure_tree,
    metastable_state, RateFamily,
};
use fwlab_core::RngStream;
use proptest::prelude::*;

fn random_rates(n: usize, rng: &mut RngStream) -> RateFamily {
    let mut c = vec![vec![1.0; n]; n];
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                c[i][j] = 0.5 + rng.uniform();
                k[i][j] = 0.5 + 2.5 * rng.uniform();
            }
        }
    }
    RateFamily::new(c, k).unwrap()
}

fn exit_exponents(h: &fwlab_core::markov::MarkovHierarchy) -> Vec<f64> {
    let mut e: Vec<f64> = h.nodes.iter().filter_map(|n| n.exit_exponent).collect();
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn direct_and_tree_measures_agree() {
    let mut rng = RngStream::new(17, 0);
    for n in 1..=8 {
        let r = random_rates(n, &mut rng);
        let all: Vec<usize> = (0..n).collect();
        for eps in [0.5, 0.1] {
            let d = invariant_measure_direct(&r, &all, eps).unwrap();
            let t = invariant_measure_tree(&r, &all, Some(eps)).unwrap();
            for i in 0..n {
                assert!((d[i] - t.nu[i]).abs() < 1e-10, "n = {n}, eps = {eps}");
            }
        }
    }
}

#[test]
fn two_level_fixture_matches_oracle() {
    // pairs {0,1} and {2,3}, state 4 transient into 0
    // distinct large background exponents keep every choice separated
    let mut k: Vec<Vec<f64>> = (0..5)
        .map(|i| (0..5).map(|j| 6.0 + 0.3 * i as f64 + 0.15 * j as f64).collect())
        .collect();
    k[0][1] = 0.5;
    k[1][0] = 1.0;
    k[2][3] = 0.6;
    k[3][2] = 1.4;
    k[1][3] = 2.0;
    k[3][0] = 2.8;
    k[4][0] = 0.3;
    let r = RateFamily::from_exponents(k).unwrap();
    let h = build_markov_hierarchy(&r).unwrap();
    assert!(h.min_gap >= 0.1);
    let cases = [
        (4, 0.2, 4),
        (4, 0.45, 0),
        (4, 0.8, 1),
        (0, 1.5, 1),
        (0, 2.3, 3),
        (2, 1.2, 3),
        (2, 3.5, 3),
    ];
    for (start, lambda, expect) in cases {
        assert_eq!(metastable_state(&h, start, lambda).unwrap(), expect, "start {start}, lambda {lambda}");
        let mass: Vec<f64> = [0.05, 0.02, 0.01]
            .iter()
            .map(|e| chain_oracle(&r, start, lambda, *e).unwrap()[expect])
            .collect();
        assert!(mass[2] >= 0.9, "start {start}, lambda {lambda}: {mass:?}");
        assert!(mass[2] >= mass[0] - 1e-9);
    }
}

#[test]
fn random_chains_match_oracle() {
    let mut rng = RngStream::new(99, 0);
    let mut checked = 0;
    while checked < 60 {
        let n = 3 + checked % 4;
        let r = random_rates(n, &mut rng);
        let Ok(h) = build_markov_hierarchy(&r) else { continue };
        if h.min_gap < 0.1 {
            continue;
        }
        let exps = exit_exponents(&h);
        let top = exps.last().unwrap() + 1.0;
        let lambda = 0.1 + (top - 0.1) * rng.uniform();
        if exps.iter().any(|e| (e - lambda).abs() < 0.1) {
            continue;
        }
        let start = (rng.uniform() * n as f64) as usize;
        let s = metastable_state(&h, start, lambda).unwrap();
        let m = chain_oracle(&r, start, lambda, 0.01).unwrap()[s];
        assert!(m >= 0.9, "rates {:?} start {start} lambda {lambda}: mass {m}", r.k);
        checked += 1;
    }
}

#[test]
fn decoupled_blocks_never_mix() {
    let mut k = vec![vec![4.0; 4]; 4];
    k[0][1] = 0.5;
    k[1][0] = 0.7;
    k[2][3] = 0.5;
    k[3][2] = 0.9;
    let r = RateFamily::from_exponents(k).unwrap();
    for lambda in [0.0, 1.0, 2.0, 3.5] {
        let p = chain_oracle(&r, 0, lambda, 0.02).unwrap();
        assert!(p[2] + p[3] < 1e-6, "lambda {lambda}: {p:?}");
    }
    let p = chain_oracle(&r, 0, 0.0, 0.02).unwrap();
    assert!(p[0] > 0.999);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn recursion_shrinks_to_one_node(seed in 0u64..100_000, n in 1usize..7) {
        let mut rng = RngStream::new(seed, 3);
        let r = random_rates(n, &mut rng);
        let h = build_markov_hierarchy(&r).unwrap();
        let sizes: Vec<usize> = h.chains.iter().map(|c| c.nodes.len()).collect();
        prop_assert!(sizes.windows(2).all(|w| w[1] < w[0]));
        for ch in &h.chains {
            prop_assert!(ch.rates.k.iter().flatten().all(|x| *x >= 0.0));
            for nu in &ch.nu {
                prop_assert!((nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        // every state is either inside the root or flows into it
        let root = &h.nodes[h.root];
        let mut covered = root.members.clone();
        for nd in &h.nodes {
            if nd.parent.is_none() && nd.id != h.root {
                covered.extend(nd.members.iter().copied());
            }
        }
        covered.sort_unstable();
        covered.dedup();
        prop_assert_eq!(covered, (0..n).collect::<Vec<_>>());
    }
}
