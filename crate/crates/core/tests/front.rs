use std::f64::consts::SQRT_2;

use fwlab_core::front::*;

fn ball() -> Support {
    Support::Ball { center: [0.0, 0.0], radius: 1.0 }
}

fn half_line() -> Support {
    Support::Interval { lo: -1.0, hi: 0.0 }
}

/// Slow up to `x = 1`, support included, fast beyond.
fn patch_rate(x: &[f64]) -> f64 {
    if x[0] < 1.0 {
        0.1
    } else {
        2.0
    }
}

#[test]
fn huygens_front_and_rate_scaling() {
    let g = FrontGrid::rect([-3.5, 3.5], [-3.5, 3.5], 0.02).unwrap();
    let opts = DpOptions::default();
    let mut advance = Vec::new();
    for c in [1.0, 2.0] {
        let s = ReactionSpec::logistic(g, c, 1.0, ball()).unwrap();
        let front = v1_front(&s, 1.0, &opts).unwrap();
        let r = g.area_radius(&front);
        let exact = 1.0 + (2.0 * c).sqrt();
        assert!((r - exact).abs() < 0.05 * exact, "c = {c}: {r} vs {exact}");
        // against the distance-transform front, cell by cell
        let h = huygens_constant(&g, &ball(), c, 1.0, 1.0).unwrap();
        let d = distance_to_set(&g, &ball().mask(&g));
        let reach = (2.0 * c).sqrt();
        for k in 0..g.len() {
            if h[k] != front[k] {
                assert!((d[k] - reach).abs() <= 2.0 * g.hx, "cell {k} at distance {}", d[k]);
            }
        }
        assert!((g.area_radius(&h) - exact).abs() < 0.01 * exact);
        advance.push(r - 1.0);
    }
    let ratio = advance[1] / advance[0];
    assert!((ratio - SQRT_2).abs() < 0.03 * SQRT_2, "{ratio}");
}

#[test]
fn point_source_value_field() {
    // V_0 = c t - |x|^2 / (2 t): zero level at t sqrt(2c)
    let g = FrontGrid::rect([-2.2, 2.2], [-2.2, 2.2], 0.02).unwrap();
    let pt = Support::Ball { center: [0.0, 0.0], radius: 1e-3 };
    let mut radius = Vec::new();
    for c in [0.5, 1.0] {
        let s = ReactionSpec::logistic(g, c, 1.0, pt.clone()).unwrap();
        let v = v0_dp(&s, 1.0, &DpOptions::default()).unwrap();
        let zero: Vec<bool> = v.iter().map(|&x| x >= 0.0).collect();
        let r = g.area_radius(&zero);
        assert!((r - (2.0 * c).sqrt()).abs() < 0.05 * (2.0 * c).sqrt(), "{r}");
        for x in [0.3, 0.7] {
            let k = g.nearest([x, 0.0]).unwrap();
            assert!((v[k] - (c - x * x / 2.0)).abs() < 0.02, "{} at {x}", v[k]);
        }
        radius.push(r);
    }
    assert!((radius[1] / radius[0] - SQRT_2).abs() < 0.03 * SQRT_2);
}

#[test]
fn constant_rate_front_equals_value_sublevel() {
    let g = FrontGrid::rect([-2.0, 2.0], [-2.0, 2.0], 0.04).unwrap();
    let s = ReactionSpec::logistic(g, 1.3, 1.0, ball()).unwrap();
    let f = front_evolution(&s, 0.6, &DpOptions::default()).unwrap();
    for k in 0..f.times.len() {
        let sub: Vec<bool> = f.v0[k].iter().map(|&x| x >= 0.0).collect();
        assert_eq!(sub, f.front[k]);
    }
}

#[test]
fn refinement_moves_front_little() {
    let mut r = Vec::new();
    for (hx, dt) in [(0.02, 0.1), (0.01, 0.05)] {
        let g = FrontGrid::rect([-2.0, 2.0], [-2.0, 2.0], hx).unwrap();
        let s = ReactionSpec::logistic(g, 1.0, 1.0, ball()).unwrap();
        let front = v1_front(&s, 0.5, &DpOptions { dt, ..DpOptions::default() }).unwrap();
        r.push(g.area_radius(&front));
    }
    assert!((r[0] - r[1]).abs() < 0.02 * r[1], "{r:?}");
}

/// Every path of `m` jumps within the window, enumerated.
fn brute_force(s: &ReactionSpec, dt: f64, w: isize, m: usize) -> (Vec<f64>, Vec<bool>) {
    let g = s.grid;
    let n = g.nx as isize;
    let inside = s.support.mask(&g);
    let mut v0 = vec![SENTINEL; g.len()];
    let mut front = vec![false; g.len()];
    fn walk(
        s: &ReactionSpec, dt: f64, w: isize, n: isize, inside: &[bool], at: isize, left: usize, sum: f64, prefix_ok: bool,
        best: &mut f64, ok: &mut bool,
    ) {
        if left == 0 {
            if inside[at as usize] {
                *best = best.max(sum);
                *ok |= prefix_ok;
            }
            return;
        }
        let c = s.rate0(s.grid.point(at as usize));
        for d in -w..=w {
            let to = at + d;
            if to < 0 || to >= n {
                continue;
            }
            let step = (d as f64 * s.grid.hx).powi(2) / (2.0 * s.a * dt);
            let next = sum + c * dt - step;
            walk(s, dt, w, n, inside, to, left - 1, next, prefix_ok && next >= 0.0, best, ok);
        }
    }
    for x in 0..n {
        let mut best = SENTINEL;
        let mut ok = false;
        walk(s, dt, w, n, &inside, x, m, 0.0, true, &mut best, &mut ok);
        v0[x as usize] = best;
        front[x as usize] = ok;
    }
    (v0, front)
}

#[test]
fn dynamic_programme_matches_path_enumeration() {
    let g = FrontGrid::line(-0.3, 1.1, 0.1).unwrap();
    let s = ReactionSpec::logistic_profile(g, |x| if x[0] < 0.15 { 0.05 } else { 3.0 }, 1.0, Support::Interval { lo: -0.3, hi: 0.05 })
        .unwrap();
    let opts = DpOptions { dt: 0.05, window: Some(4), ..DpOptions::default() };
    let (v, f) = brute_force(&s, 0.05, 4, 5);
    let dv = v0_dp(&s, 0.25, &opts).unwrap();
    let df = v1_front(&s, 0.25, &opts).unwrap();
    for k in 0..g.len() {
        if v[k] > 0.5 * SENTINEL {
            assert!((v[k] - dv[k]).abs() < 1e-12, "{k}: {} vs {}", v[k], dv[k]);
        } else {
            assert_eq!(dv[k], SENTINEL);
        }
    }
    assert_eq!(f, df);
    assert!(f.iter().zip(&v).any(|(a, b)| !a && *b >= 0.0), "fixture should separate V_1 from V_0");
}

#[test]
fn slow_patch_makes_the_front_jump() {
    let g = FrontGrid::line(-0.5, 3.0, 0.005).unwrap();
    let s = ReactionSpec::logistic_profile(g, patch_rate, 1.0, Support::Interval { lo: -0.5, hi: 0.0 }).unwrap();
    let f = front_evolution(&s, 1.4, &DpOptions { dt: 0.02, ..DpOptions::default() }).unwrap();
    let pos: Vec<f64> = f.positions().iter().map(|p| p.1.unwrap()).collect();
    let biggest = pos.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    assert!(biggest > 10.0 * g.hx, "largest increment {biggest}");
    assert!(pos.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn front_time_closed_form_and_non_monotone_case() {
    let g = FrontGrid::line(-1.0, 2.0, 0.005).unwrap();
    let opts = DpOptions { dt: 0.02, ..DpOptions::default() };
    let c = 1.5;
    let s = ReactionSpec::logistic(g, c, 1.0, half_line()).unwrap();
    for x in [0.4, 1.0] {
        let t = front_time(&s, [x, 0.0], &opts, 3.0).unwrap();
        let exact = x / (2.0 * c).sqrt();
        assert!((t - exact).abs() < 0.03 * exact, "{t} vs {exact}");
    }
    assert_eq!(front_time(&s, [-0.5, 0.0], &opts, 3.0).unwrap(), 0.0);
    assert!(matches!(front_time(&s, [1.9, 0.0], &opts, 0.2), Err(fwlab_core::Error::Timeout { .. })));

    let g = FrontGrid::line(-0.5, 2.5, 0.005).unwrap();
    let s = ReactionSpec::logistic_profile(g, patch_rate, 1.0, Support::Interval { lo: -0.5, hi: 0.0 }).unwrap();
    let near = front_time(&s, [0.5, 0.0], &opts, 3.0).unwrap();
    let far = front_time(&s, [1.05, 0.0], &opts, 3.0).unwrap();
    assert!(far < near, "t*(1.05) = {far} vs t*(0.5) = {near}");
}

#[test]
fn reference_pde_interface_speed() {
    let g = FrontGrid::line(-1.0, 3.5, 0.005).unwrap();
    let s = ReactionSpec::logistic(g, 1.0, 1.0, half_line()).unwrap();
    let sol = pde_solve_1d(&s, 5e-3, &[1.0, 2.0], None).unwrap();
    let x = sol.interfaces();
    let speed = x[1].unwrap() - x[0].unwrap();
    assert!((speed - SQRT_2).abs() < 0.1 * SQRT_2, "{speed}");
    assert!(sol.u.iter().flatten().all(|&u| (0.0..=1.0 + 1e-6).contains(&u)));
}

#[test]
fn pde_interface_approaches_dp_front_as_eps_shrinks() {
    // the u = 1/2 level trails the limiting front by the finite-eps lag
    let g = FrontGrid::line(-1.0, 2.0, 0.0025).unwrap();
    let s = ReactionSpec::logistic(g, 1.0, 1.0, half_line()).unwrap();
    let f = v1_front(&s, 1.0, &DpOptions { dt: 0.02, ..DpOptions::default() }).unwrap();
    let limit = g.front_position(&f).unwrap();
    let lag: Vec<f64> = [2e-2, 5e-3, 1e-3]
        .iter()
        .map(|&eps| limit - pde_solve_1d(&s, eps, &[1.0], None).unwrap().interfaces()[0].unwrap())
        .collect();
    assert!(lag[0] > lag[1] && lag[1] > lag[2] && lag[2] > 0.0, "{lag:?}");
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn fronts_grow_and_nest(levels in proptest::collection::vec(0.05f64..2.0, 4)) {
            let g = FrontGrid::line(-0.5, 2.0, 0.01).unwrap();
            let lv = levels.clone();
            let s = ReactionSpec::logistic_profile(g, move |x| lv[((x[0] + 0.5) / 0.7).floor().clamp(0.0, 3.0) as usize],
                1.0, Support::Interval { lo: -0.5, hi: 0.0 }).unwrap();
            let f = front_evolution(&s, 0.8, &DpOptions { dt: 0.05, ..DpOptions::default() }).unwrap();
            let g0 = s.support.mask(&g);
            for k in 0..f.times.len() {
                for i in 0..g.len() {
                    prop_assert!(!g0[i] || f.front[k][i]);
                    prop_assert!(!f.front[k][i] || f.v0[k][i] >= 0.0);
                    if k > 0 {
                        prop_assert!(!f.front[k - 1][i] || f.front[k][i]);
                        prop_assert!(f.v0[k][i] >= f.v0[k - 1][i]);
                    }
                }
            }
        }
    }
}
