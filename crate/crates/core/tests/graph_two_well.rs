use std::time::Instant;

use fwlab_core::fixtures::{scaled_gradient, two_well, two_well_grid};
use fwlab_core::graph::*;
use fwlab_core::Field;

fn system() -> PlanarSystem {
    PlanarSystem {
        field: two_well_grid(512).unwrap(),
        beta: scaled_gradient(&two_well(), 2.0),
        sigma: Field::identity_matrix(2),
    }
}

fn config() -> AveragingConfig {
    AveragingConfig { cap: Some(1.5), ..AveragingConfig::default() }
}

#[test]
fn averaged_marginal_matches_planar_system() {
    let t0 = Instant::now();
    let (cmp, model) = compare_marginals(&system(), [-1.0, 0.3], 1.0, &config(), 2024).unwrap();
    eprintln!("w1 {} means {} {} gluing {} in {:?}", cmp.w1, cmp.sde_mean_h, cmp.graph_mean_h, cmp.gluing_defect, t0.elapsed());
    assert_eq!(model.graph.edges.len(), 3);
    assert!(cmp.gluing_defect < 0.02);
    assert!(cmp.w1 <= 0.05);
}

#[test]
fn dirichlet_limit_matches_planar_system() {
    let t0 = Instant::now();
    let bc = [
        LevelBoundary { edge: 0, level: -0.15, value: 0.0 },
        LevelBoundary { edge: 2, level: 0.5, value: 1.0 },
    ];
    let probes = [[1.0, 0.0], [1.2, 0.3], [-0.5, 0.4], [0.0, 0.6], [1.3, -0.5]];
    let (res, _) = compare_dirichlet(&system(), &bc, &probes, 2000, &config(), 77).unwrap();
    for p in &res {
        eprintln!("{:?} edge {} graph {:.4} mc {:.4} +- {:.4}", p.x, p.edge, p.graph, p.monte_carlo, p.std_err);
    }
    eprintln!("{:?}", t0.elapsed());
    for p in &res {
        assert!((p.graph - p.monte_carlo).abs() <= 0.05);
    }
}
