//! Reeb graph of a planar Hamiltonian and averaged coefficients on its edges.

mod coeffs;
mod contour;
mod field2d;
mod graph;

pub use coeffs::{
    area_integral, contour_integrals, default_cap, default_z_grid, div_a_grad, edge_coefficients,
    gluing_coefficients, level_resolution, CoefficientSample, ContourIntegrals, EdgeCoefficients, GluingEntry, ReebModel,
};
pub use contour::{extract_contour, extract_contours, polyline_length, write_contour_csv};
pub use field2d::ScalarField2D;
pub use graph::{
    build_reeb_graph, build_reeb_graph_with, project_y, ReebEdge, ReebGraph, ReebOptions, ReebVertex, VertexKind,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Field;

    fn circle(n: usize) -> ScalarField2D {
        let h = Field::new(2, 1, |x, o| o[0] = 0.5 * (x[0] * x[0] + x[1] * x[1]))
            .with_jacobian(|x, o| o.copy_from_slice(&[x[0], x[1]]));
        ScalarField2D::new(h, [-2.0, 2.0, -2.0, 2.0], n, n).unwrap()
    }

    fn two_well(n: usize) -> ScalarField2D {
        let h = Field::new(2, 1, |x, o| o[0] = 0.5 * x[1] * x[1] + 0.25 * x[0].powi(4) - 0.5 * x[0] * x[0])
            .with_jacobian(|x, o| o.copy_from_slice(&[x[0].powi(3) - x[0], x[1]]));
        ScalarField2D::new(h, [-2.0, 2.0, -1.6, 1.6], n, n).unwrap()
    }

    #[test]
    fn circle_graph_is_one_edge() {
        let f = circle(65);
        let g = build_reeb_graph(&f).unwrap();
        assert_eq!(g.minima().count(), 1);
        assert_eq!(g.saddles().count(), 0);
        assert_eq!(g.edges.len(), 1);
        assert!(g.edges[0].unbounded);
        assert!(g.check_tree());
    }

    #[test]
    fn two_well_critical_values() {
        let f = two_well(129);
        let g = build_reeb_graph(&f).unwrap();
        assert_eq!(g.minima().count(), 2);
        assert_eq!(g.saddles().count(), 1);
        assert_eq!(g.edges.len(), 3);
        assert!(g.check_tree());
        for m in g.minima() {
            assert!((m.value + 0.25).abs() < 1e-10);
        }
        assert!(g.saddles().next().unwrap().value.abs() < 1e-10);
        // left well first
        assert!(g.vertices[g.edges[0].lower].position.unwrap()[0] < 0.0);
    }

    #[test]
    fn interior_maximum_rejected() {
        let h = Field::new(2, 1, |x, o| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            o[0] = r2 * r2 - r2
        })
        .with_jacobian(|x, o| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let c = 4.0 * r2 - 2.0;
            o.copy_from_slice(&[c * x[0], c * x[1]])
        });
        let f = ScalarField2D::new(h, [-1.5, 1.5, -1.5, 1.5], 101, 101).unwrap();
        assert!(build_reeb_graph(&f).is_err());
    }

    #[test]
    fn contour_loops_on_two_well() {
        let f = two_well(129);
        assert_eq!(extract_contours(&f, -0.1).len(), 2);
        assert_eq!(extract_contours(&f, 0.3).len(), 1);
        let g = build_reeb_graph(&f).unwrap();
        let left = extract_contour(&f, &g, -0.1, 0).unwrap();
        assert!(left.iter().all(|p| p[0] < 0.0));
        assert!(extract_contour(&f, &g, 0.1, 0).is_err());
    }

    #[test]
    fn table_interpolation_extrapolates_linearly() {
        let t = EdgeCoefficients {
            edge: 0,
            z: vec![0.0, 1.0],
            period: vec![1.0, 1.0],
            a_bar: vec![0.0, 2.0],
            beta_bar: vec![0.0; 2],
            drift_correction: vec![0.0; 2],
        };
        assert!((t.at(0.25).a_bar - 0.5).abs() < 1e-15);
        assert!((t.at(2.0).a_bar - 4.0).abs() < 1e-15);
        assert!((t.at(-1.0).a_bar + 2.0).abs() < 1e-15);
    }

    #[test]
    fn default_cap_for_zero_saddle() {
        let f = two_well(65);
        let g = build_reeb_graph(&f).unwrap();
        let c = default_cap(&g);
        assert!(c > 0.2 && c < g.boundary_min);
    }
}
