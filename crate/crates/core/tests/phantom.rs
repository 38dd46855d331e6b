use std::time::Instant;

use fwlab_core::fixtures::{phantom_cubic, phantom_rho, PHANTOM_K, PHANTOM_S};
use fwlab_core::phantom::*;
use fwlab_core::Field;

/// Closed-form depths of `-K (x - a)(x - b)(x - c)` with `sigma = 1`.
fn exact_depths(a: f64, b: f64, c: f64, k: f64) -> (f64, f64) {
    let (d1, d2) = (b - a, c - b);
    (k * d2.powi(3) * (d2 + 2.0 * d1) / 6.0, k * d1.powi(3) * (d1 + 2.0 * d2) / 6.0)
}

fn fixture_depths(y: f64) -> (f64, f64) {
    let s = PHANTOM_S;
    exact_depths(-s, s * phantom_rho(y), 2.0 * s, PHANTOM_K)
}

fn exact_ystar() -> f64 {
    // middle root at the midpoint of the outer ones: rho = 1/2
    (-1.0f64 / 7.0).atanh() / 20.0
}

#[test]
fn branches_of_factored_cubic() {
    let spec = phantom_cubic().unwrap();
    let b = branches(&spec).unwrap();
    let s = PHANTOM_S;
    for k in 0..b.y.len() {
        assert!((b.minus[k] + s).abs() < 1e-9);
        assert!((b.zero[k] - s * phantom_rho(b.y[k])).abs() < 1e-9);
        assert!((b.plus[k] - 2.0 * s).abs() < 1e-9);
        assert!(b.minus[k] < 0.0 && 0.0 < b.zero[k] && b.zero[k] < b.plus[k]);
        let y = b.y[k];
        let dfdx = |x: f64| (spec.f(x + 1e-6, y) - spec.f(x - 1e-6, y)) / 2e-6;
        assert!(dfdx(b.minus[k]) < 0.0 && dfdx(b.zero[k]) > 0.0 && dfdx(b.plus[k]) < 0.0);
    }
    // neighbouring entries move no faster than the implicit slope allows
    for k in 1..b.y.len() {
        let (y, x) = (b.y[k], b.zero[k]);
        let fx = (spec.f(x + 1e-6, y) - spec.f(x - 1e-6, y)) / 2e-6;
        let fy = (spec.f(x, y + 1e-6) - spec.f(x, y - 1e-6)) / 2e-6;
        let lip = (fy / fx).abs().max(1e-12);
        let dy = b.y[k] - b.y[k - 1];
        assert!((b.zero[k] - b.zero[k - 1]).abs() < 10.0 * dy * lip + 1e-12);
    }
}

#[test]
fn depths_match_polynomial_integrals() {
    let spec = phantom_cubic().unwrap();
    let t = v_branches(&spec).unwrap();
    for k in 0..t.y.len() {
        let (p, m) = fixture_depths(t.y[k]);
        assert!((t.v_plus[k] - p).abs() < 1e-9 * p && (t.v_minus[k] - m).abs() < 1e-9 * m);
        assert!(t.v_plus[k] >= 0.0 && t.v_minus[k] >= 0.0);
        if k > 0 {
            assert!(t.v_plus[k] <= t.v_plus[k - 1] && t.v_minus[k] >= t.v_minus[k - 1]);
        }
    }
    // doubling sigma^2 halves both depths
    let mut wide = spec.clone();
    wide.sigma = Field::constant(2, vec![2f64.sqrt()]);
    let w = v_branches(&wide).unwrap();
    for k in (0..t.y.len()).step_by(20) {
        assert!((2.0 * w.v_plus[k] - t.v_plus[k]).abs() < 1e-9 * t.v_plus[k]);
        assert!((2.0 * w.v_minus[k] - t.v_minus[k]).abs() < 1e-9 * t.v_minus[k]);
    }
}

#[test]
fn balance_point_matches_scan_and_closed_form() {
    let spec = phantom_cubic().unwrap();
    let t = v_branches(&spec).unwrap();
    let (ys, lambda) = find_ystar(&spec, &t).unwrap();
    // scan oracle on a grid 50 times finer than the table
    let scan = (0..=5000)
        .map(|i| -0.5 + i as f64 * 2e-4)
        .min_by(|a, b| {
            let d = |y: f64| {
                let (p, m) = fixture_depths(y);
                (p - m).abs()
            };
            d(*a).total_cmp(&d(*b))
        })
        .unwrap();
    let cell = t.y[1] - t.y[0];
    assert!((ys - scan).abs() <= cell, "{ys} vs scan {scan}");
    assert!((ys - exact_ystar()).abs() < 1e-7, "{ys} vs {}", exact_ystar());
    let (p, m) = spec.depths(ys).unwrap();
    assert!(lambda > 0.0 && (p - m).abs() < 1e-6 * lambda);
    assert!((lambda - fixture_depths(exact_ystar()).0).abs() < 1e-6 * lambda);
}

#[test]
fn symmetric_construction_balances_at_zero() {
    // gaps d1(y) = d2(-y) swap the wells under y -> -y
    let f = Field::new(2, 1, |x, o| {
        let t = 0.3 * x[1].tanh();
        let (a, b, c) = (0.2 - (1.0 + t), 0.2, 0.2 + (1.0 - t));
        o[0] = -(x[0] - a) * (x[0] - b) * (x[0] - c);
    });
    let y: Vec<f64> = (0..=40).map(|i| -1.0 + i as f64 * 0.05).collect();
    let spec = SlowFastSpec::new(f, Field::constant(2, vec![1.0]), y, [-3.0, 3.0]).unwrap();
    let t = v_branches(&spec).unwrap();
    let (ys, _) = find_ystar(&spec, &t).unwrap();
    assert!(ys.abs() < 1e-8, "{ys}");
    // outer roots -0.8 and 1.2 at the balance point
    assert!((weights(&spec, 0.0).unwrap().p_plus - 0.4).abs() < 1e-9);
}

#[test]
fn crossing_errors() {
    let t = DepthTable { y: vec![0.0, 1.0, 2.0], v_plus: vec![3.0, 2.0, 1.5], v_minus: vec![0.1, 0.5, 1.0] };
    assert!(crossing_bracket(&t).is_err());
    let t = DepthTable { y: vec![0.0, 1.0, 2.0], v_plus: vec![3.0, 2.5, 1.0], v_minus: vec![0.1, 0.05, 2.0] };
    assert!(crossing_bracket(&t).is_err());
    let t = DepthTable { y: vec![0.0, 1.0, 2.0], v_plus: vec![3.0, 2.0, 1.0], v_minus: vec![0.1, 1.0, 2.0] };
    assert_eq!(crossing_bracket(&t).unwrap(), (1.0, 2.0));
}

fn verify_options() -> VerifyOptions {
    VerifyOptions { start: [-PHANTOM_S, 0.3], ..VerifyOptions::default() }
}

#[test]
fn inadmissible_schedule_refused() {
    let spec = phantom_cubic().unwrap();
    let res = analyse(&spec).unwrap();
    let bad = spec.with_schedule(schedule_for(res.lambda, &[1e-3], 1.02));
    let res = analyse(&bad).unwrap();
    assert!(!res.schedule[0].admissible);
    assert!(simulate_verify(&bad, &res, &verify_options(), 1).is_err());
}

#[test]
fn two_point_limit_along_schedule() {
    let t0 = Instant::now();
    let spec = phantom_cubic().unwrap();
    let lambda = analyse(&spec).unwrap().lambda;
    let spec = spec.with_schedule(schedule_for(lambda, &[4e-3, 2e-3, 1e-3], 2.5));
    let res = analyse(&spec).unwrap();
    assert!(res.schedule.iter().all(|c| c.admissible));
    assert!((res.weights.p_minus - 2.0 / 3.0).abs() < 1e-9);
    assert!(res.weights.literal_is_indeterminate);
    let pts = simulate_verify(&spec, &res, &verify_options(), 2026).unwrap();
    for p in &pts {
        eprintln!("delta {:e}: masses {:.4} {:.4} y {:.4} tv {:.4}", p.delta, p.mass_minus, p.mass_plus, p.y_mean, p.tv);
    }
    eprintln!("{:?}", t0.elapsed());
    let fine = pts.last().unwrap();
    assert!((fine.mass_minus - res.weights.p_minus).abs() <= 0.05);
    assert!((fine.mass_plus - res.weights.p_plus).abs() <= 0.05);
    assert!(fine.near_total() >= 0.9);
    assert!((fine.y_mean - res.y_star).abs() <= 0.05);
    assert!(pts.windows(2).all(|w| w[1].tv < w[0].tv));
}
