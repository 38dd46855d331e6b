use fwlab_core::graph::*;
use fwlab_core::mc::{ensemble, Summary};
use fwlab_core::reeb::GluingEntry;
use fwlab_core::Field;

fn single_edge(lo: f64, hi: f64, a: f64, b: f64) -> GraphDiffusionSpec {
    GraphDiffusionSpec::new(
        vec![NodeKind::Exterior, NodeKind::Exterior],
        vec![GraphEdge::constant(0, 1, lo, hi, a, b)],
        vec![],
    )
    .unwrap()
}

/// Stem `[0, 1]` below a vertex at level 1 with two branches `[1, 2]`.
fn y_graph(g1: f64, g2: f64, b: f64) -> GraphDiffusionSpec {
    GraphDiffusionSpec::new(
        vec![NodeKind::Exterior, NodeKind::Interior, NodeKind::Cap, NodeKind::Cap],
        vec![
            GraphEdge::constant(0, 1, 0.0, 1.0, 1.0, b),
            GraphEdge::constant(1, 2, 1.0, 2.0, 1.0, b),
            GraphEdge::constant(1, 3, 1.0, 2.0, 1.0, b),
        ],
        vec![GluingEntry {
            vertex: 1,
            edges: vec![0, 1, 2],
            gamma: vec![g1 + g2, g1, g2],
            sign: vec![-1.0, 1.0, 1.0],
            alpha: 0.0,
        }],
    )
    .unwrap()
}

fn tops() -> [GraphState; 2] {
    [GraphState { edge: 1, h: 2.0 }, GraphState { edge: 2, h: 2.0 }]
}

#[test]
fn brownian_edge_mean_square_displacement() {
    let spec = single_edge(-10.0, 10.0, 1.0, 0.0);
    let d2 = ensemble(7, "msd", 10_000, |_, rng| {
        let p = simulate(&spec, GraphState { edge: 0, h: 0.0 }, 1e-3, 1.0, 0.1, rng).unwrap();
        p.last().h.powi(2)
    });
    let s = Summary::of(&d2);
    assert!((s.mean - 1.0).abs() < 3.0 * s.std_err(), "{} +- {}", s.mean, s.std_err());
}

#[test]
fn shell_precondition_enforced() {
    let spec = single_edge(-10.0, 10.0, 1.0, 0.0);
    let mut rng = fwlab_core::RngStream::new(1, 0);
    assert!(simulate(&spec, GraphState { edge: 0, h: 0.0 }, 1e-2, 1.0, 0.1, &mut rng).is_err());
}

#[test]
fn linear_solution_on_one_edge() {
    let spec = single_edge(0.0, 1.0, 1.0, 0.0);
    let bc = [BoundaryPoint { edge: 0, h: 0.0, value: 0.0 }, BoundaryPoint { edge: 0, h: 1.0, value: 1.0 }];
    let sol = solve_dirichlet(&spec, &bc, 50).unwrap();
    for (h, v) in sol.edges[0].h.iter().zip(&sol.edges[0].v) {
        assert!((h - v).abs() < 1e-14);
    }
}

#[test]
fn symmetric_y_first_passage() {
    let spec = y_graph(1.0, 1.0, 0.0);
    let start = GraphState { edge: 0, h: 0.5 };
    let p = hitting_probabilities(&spec, start, &tops(), 200).unwrap();
    assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    let hits = ensemble(11, "y-sym", 10_000, |_, rng| {
        let r = first_passage(&spec, start, &tops(), 1e-4, 100.0, 0.04, rng).unwrap().unwrap();
        if r.target == 0 { 1.0 } else { 0.0 }
    });
    let s = Summary::of(&hits);
    assert!((s.mean - 0.5).abs() < 3.0 * s.std_err(), "{}", s.mean);
}

#[test]
fn asymmetric_y_solve_matches_simulation() {
    let spec = y_graph(1.0, 3.0, 0.0);
    // branch 1 held at 0, branch 2 at 1, stem free with a reflecting end
    let bc = [BoundaryPoint { edge: 1, h: 2.0, value: 0.0 }, BoundaryPoint { edge: 2, h: 2.0, value: 1.0 }];
    let sol = solve_dirichlet(&spec, &bc, 200).unwrap();
    let start = GraphState { edge: 0, h: 0.3 };
    let u = sol.eval(start);
    assert!((u - 0.75).abs() < 1e-6, "{u}");
    let hits = ensemble(12, "y-asym", 10_000, |_, rng| {
        let r = first_passage(&spec, start, &tops(), 1e-4, 100.0, 0.04, rng).unwrap().unwrap();
        r.target as f64
    });
    let s = Summary::of(&hits);
    assert!((s.mean - u).abs() < 3.0 * s.std_err(), "{} vs {u}", s.mean);
    assert!(sol.gluing_residual(&spec) < 1e-6);
}

#[test]
fn drifted_edge_hitting_probability() {
    let (a, b) = (1.0, 0.5);
    let spec = single_edge(0.0, 1.0, a, b);
    let targets = [GraphState { edge: 0, h: 1.0 }, GraphState { edge: 0, h: 0.0 }];
    let start = GraphState { edge: 0, h: 0.5 };
    let p = hitting_probabilities(&spec, start, &targets, 400).unwrap();
    let exact = (1.0 - (-2.0f64 * b * 0.5 / a).exp()) / (1.0 - (-2.0f64 * b / a).exp());
    assert!((p[0] - exact).abs() < 1e-5);
    assert!((p[0] + p[1] - 1.0).abs() < 1e-10);
    assert!(p[0] > 0.5);
    let hits = ensemble(13, "drift", 10_000, |_, rng| {
        let r = first_passage(&spec, start, &targets, 4e-5, 100.0, 0.03, rng).unwrap().unwrap();
        if r.target == 0 { 1.0 } else { 0.0 }
    });
    let s = Summary::of(&hits);
    assert!((s.mean - p[0]).abs() < 3.0 * s.std_err(), "{} vs {}", s.mean, p[0]);
    let one = hitting_probabilities(&spec, start, &targets[..1], 100).unwrap();
    assert!((one[0] - 1.0).abs() < 1e-12);
}

#[test]
fn dirichlet_mesh_refinement_is_second_order() {
    // smooth variable coefficients on the Y graph
    let mut spec = y_graph(1.0, 2.0, 0.0);
    for e in &mut spec.edges {
        let z: Vec<f64> = (0..=40).map(|k| e.z_lo + (e.z_hi - e.z_lo) * k as f64 / 40.0).collect();
        e.coeffs.a_bar = z.iter().map(|x| 1.0 + 0.5 * x.sin()).collect();
        e.coeffs.beta_bar = z.iter().map(|x| 0.3 * x.cos()).collect();
        e.coeffs.period = vec![1.0; z.len()];
        e.coeffs.drift_correction = vec![0.0; z.len()];
        e.coeffs.z = z;
    }
    let bc = [BoundaryPoint { edge: 1, h: 2.0, value: 0.0 }, BoundaryPoint { edge: 2, h: 1.7, value: 1.0 }];
    let probe = GraphState { edge: 0, h: 0.4 };
    let u: Vec<f64> = [50, 100, 200].iter().map(|&m| solve_dirichlet(&spec, &bc, m).unwrap().eval(probe)).collect();
    let (d1, d2) = ((u[1] - u[0]).abs(), (u[2] - u[1]).abs());
    assert!(d2 < 0.35 * d1, "{d1:e} {d2:e}");
}

#[test]
fn single_boundary_point_gives_constant() {
    let spec = single_edge(0.0, 1.0, 1.0, 0.0);
    let bc = [BoundaryPoint { edge: 0, h: 0.5, value: 1.0 }];
    let sol = solve_dirichlet(&spec, &bc, 40).unwrap();
    assert!(sol.edges[0].v.iter().all(|v| (v - 1.0).abs() < 1e-10));
    assert!(solve_dirichlet(&spec, &[], 40).is_err());
}

fn field1(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Field {
    Field::new(1, 1, move |x, o| o[0] = f(x[0]))
}

#[test]
fn neumann_cosine_source() {
    use std::f64::consts::PI;
    let spec = single_edge(0.0, 1.0, 1.0, 0.0);
    let data = ChannelData { width: vec![field1(|_| 1.0)], source: vec![field1(|x| (PI * x).cos())] };
    let sol = solve_neumann_channel(&spec, &data, 1000).unwrap();
    for (h, v) in sol.edges[0].h.iter().zip(&sol.edges[0].v) {
        assert!((v + 2.0 * (PI * h).cos() / (PI * PI)).abs() < 1e-4);
    }
    let zero = ChannelData { width: vec![field1(|_| 1.0)], source: vec![field1(|_| 0.0)] };
    let sol = solve_neumann_channel(&spec, &zero, 100).unwrap();
    assert!(sol.edges[0].v.iter().all(|v| v.abs() < 1e-13));
    let bad = ChannelData { width: vec![field1(|_| 1.0)], source: vec![field1(|_| 1.0)] };
    assert!(solve_neumann_channel(&spec, &bad, 100).is_err());
}

#[test]
fn neumann_y_antisymmetric() {
    let spec = y_graph(1.0, 1.0, 0.0);
    let data = ChannelData {
        width: vec![field1(|_| 2.0), field1(|x| 1.0 + 0.2 * (x - 1.0)), field1(|x| 1.0 + 0.2 * (x - 1.0))],
        source: vec![field1(|_| 0.0), field1(|x| (3.0 * x).sin()), field1(|x| -(3.0 * x).sin())],
    };
    let sol = solve_neumann_channel(&spec, &data, 400).unwrap();
    let (e1, e2) = (&sol.edges[1], &sol.edges[2]);
    for k in 0..e1.v.len() {
        assert!((e1.v[k] + e2.v[k]).abs() < 1e-10);
    }
    assert!(sol.edges[0].v.iter().all(|v| v.abs() < 1e-10));
    assert!(e1.v.iter().any(|v| v.abs() > 1e-3));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn maximum_principle(g1 in 0.2f64..5.0, g2 in 0.2f64..5.0, b in -2.0f64..2.0,
                             v1 in -3.0f64..3.0, v2 in -3.0f64..3.0, v0 in -3.0f64..3.0, h in 0.1f64..0.9) {
            let spec = y_graph(g1, g2, b);
            let bc = [
                BoundaryPoint { edge: 1, h: 2.0, value: v1 },
                BoundaryPoint { edge: 2, h: 2.0, value: v2 },
                BoundaryPoint { edge: 0, h, value: v0 },
            ];
            let sol = solve_dirichlet(&spec, &bc, 120).unwrap();
            let (lo, hi) = sol.min_max();
            let (plo, phi) = (v0.min(v1).min(v2), v0.max(v1).max(v2));
            prop_assert!(lo >= plo - 1e-9 && hi <= phi + 1e-9);
            prop_assert!(sol.gluing_residual(&spec) < 1e-6);
        }
    }
}
