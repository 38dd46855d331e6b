use fwlab_core::action::{
    minimize_action, quasipotential_point, v_matrix, ActionConfig, EndSet,
};
use fwlab_core::dynamics::{DiffusionSpec, Polygon};
use fwlab_core::Field;

fn tilted(c: f64) -> DiffusionSpec {
    // U = x^4/4 - x^2/2 + c x
    let b = Field::new(1, 1, move |x, o| o[0] = x[0] - x[0].powi(3) - c)
        .with_jacobian(|x, o| o[0] = 1.0 - 3.0 * x[0] * x[0]);
    DiffusionSpec::new(b).unwrap()
}

fn cubic_roots(c: f64) -> [f64; 3] {
    // roots of x^3 - x + c by Newton from the three branches
    let mut r: [f64; 3] = [-1.2, 0.0, 1.2];
    for x in r.iter_mut() {
        for _ in 0..60 {
            *x -= (x.powi(3) - *x + c) / (3.0 * *x * *x - 1.0);
        }
    }
    r
}

#[test]
fn gradient_system_2d_min_to_saddle() {
    // U = (x1^2 - 1)^2 / 4 + x2^2 / 2
    let b = Field::new(2, 2, |x, o| {
        o[0] = -(x[0] * x[0] - 1.0) * x[0];
        o[1] = -x[1];
    })
    .with_jacobian(|x, o| {
        o[0] = 1.0 - 3.0 * x[0] * x[0];
        o[1] = 0.0;
        o[2] = 0.0;
        o[3] = -1.0;
    });
    let spec = DiffusionSpec::new(b).unwrap();
    let r = minimize_action(
        &spec,
        &EndSet::Point(vec![-1.0, 0.0]),
        &EndSet::Point(vec![0.0, 0.0]),
        &ActionConfig::default(),
    )
    .unwrap();
    // 2 (U(saddle) - U(min)) = 2 * 1/4
    assert!((r.value - 0.5).abs() < 0.03 * 0.5, "V = {}", r.value);
}

#[test]
fn tilted_double_well_is_asymmetric() {
    let c = 0.1;
    let spec = tilted(c);
    let [m1, s, m2] = cubic_roots(c);
    let u = |x: f64| x.powi(4) / 4.0 - x * x / 2.0 + c * x;
    let sets = [EndSet::Point(vec![m1]), EndSet::Point(vec![m2])];
    let v = v_matrix(&spec, &sets, &ActionConfig::default()).unwrap();
    let v12 = 2.0 * (u(s) - u(m1));
    let v21 = 2.0 * (u(s) - u(m2));
    assert!((v.values[0][1] - v12).abs() < 0.03 * v12, "{} vs {v12}", v.values[0][1]);
    assert!((v.values[1][0] - v21).abs() < 0.03 * v21, "{} vs {v21}", v.values[1][0]);
}

#[test]
fn symmetric_double_well_is_symmetric() {
    let spec = tilted(0.0);
    let sets = [EndSet::Point(vec![-1.0]), EndSet::Point(vec![1.0])];
    let v = v_matrix(&spec, &sets, &ActionConfig::default()).unwrap();
    assert!((v.values[0][1] - v.values[1][0]).abs() < 1e-3);
    let dup = [EndSet::Point(vec![-1.0]), EndSet::Point(vec![-1.0])];
    let v = v_matrix(&spec, &dup, &ActionConfig::default()).unwrap();
    assert_eq!(v.values[0][1], 0.0);
    assert_eq!(v.values[1][0], 0.0);
}

#[test]
fn radial_well_exit_is_degenerate() {
    // U = |x|^2 / 2, so V = |x|^2 and V* = 1 on the unit circle
    let b = Field::new(2, 2, |x, o| {
        o[0] = -x[0];
        o[1] = -x[1];
    });
    let spec = DiffusionSpec::new(b).unwrap();
    let disk = Polygon::regular([0.0, 0.0], 1.0, 64).unwrap();
    let r = quasipotential_point(
        &spec,
        &EndSet::Point(vec![0.0, 0.0]),
        &EndSet::PolygonBoundary(disk),
        &ActionConfig::default(),
    )
    .unwrap();
    assert!((r.value - 1.0).abs() < 0.03, "V* = {}", r.value);
    assert!(r.degenerate);
    let rad = (r.argmin[0].powi(2) + r.argmin[1].powi(2)).sqrt();
    assert!((rad - 1.0).abs() < 0.01);
}

#[test]
fn saddle_from_attractor() {
    let spec = tilted(0.0);
    let r = quasipotential_point(
        &spec,
        &EndSet::Point(vec![-1.0]),
        &EndSet::Point(vec![0.0]),
        &ActionConfig::default(),
    )
    .unwrap();
    assert!((r.value - 0.5).abs() < 0.01);
    let r = quasipotential_point(
        &spec,
        &EndSet::Point(vec![-1.0]),
        &EndSet::Point(vec![-1.0]),
        &ActionConfig::default(),
    )
    .unwrap();
    assert_eq!(r.value, 0.0);
}

#[test]
fn value_never_increases_with_budget_or_grid() {
    let spec = tilted(0.0);
    let (a, b) = (EndSet::Point(vec![-1.0]), EndSet::Point(vec![0.0]));
    let mut prev = f64::INFINITY;
    for iters in [50, 200, 1000] {
        let cfg = ActionConfig { max_iter: iters, t_count: 4, ..Default::default() };
        let v = minimize_action(&spec, &a, &b, &cfg).unwrap().value;
        assert!(v <= prev + 1e-12);
        prev = v;
    }
    let coarse = ActionConfig { t_count: 5, ..Default::default() };
    let fine = ActionConfig { t_count: 9, ..Default::default() };
    let vc = minimize_action(&spec, &a, &b, &coarse).unwrap().value;
    let vf = minimize_action(&spec, &a, &b, &fine).unwrap().value;
    assert!(vf <= vc + 1e-12);
}
