use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::contour::extract_contour;
use super::field2d::ScalarField2D;
use super::graph::{ReebGraph, VertexKind};
use crate::dynamics::point_in_polygon;
use crate::error::{Error, Result};
use crate::field::Field;

/// Line integrals over one contour (Simpson per segment), all taken with `n = grad H / |grad H|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ContourIntegrals {
    /// `T = ∮ dl / |grad H|`
    pub period: f64,
    /// `∮ a grad H . grad H / |grad H| dl`, equal to the area integral of
    /// `div(a grad H)` over the enclosed region.
    pub a_flux: f64,
    /// `∮ beta . grad H / |grad H| dl`
    pub beta_flux: f64,
    /// `∮ div(a grad H) / |grad H| dl`, the level derivative of `a_flux`.
    pub a_flux_rate: f64,
    pub length: f64,
}

const GRAD_FLOOR: f64 = 1e-8;

pub fn contour_integrals(
    field: &ScalarField2D,
    poly: &[[f64; 2]],
    a: &Field,
    beta: Option<&Field>,
) -> Result<ContourIntegrals> {
    check_dims(a, beta)?;
    let n = poly.len();
    let mut out = ContourIntegrals::default();
    let mut am = [0.0; 4];
    let mut da = [0.0; 8];
    let mut b = [0.0; 2];
    let mut sample = |x: [f64; 2]| -> Result<[f64; 4]> {
        let g = field.grad(x);
        let gn = g[0].hypot(g[1]);
        if gn < GRAD_FLOOR {
            return Err(Error::AtThreshold(format!("|grad H| = {gn:e} at {x:?}")));
        }
        a.eval(&x, &mut am);
        let ag = [am[0] * g[0] + am[1] * g[1], am[2] * g[0] + am[3] * g[1]];
        let hs = field.hessian(x);
        let mut div = am[0] * hs[0] + am[1] * hs[2] + am[2] * hs[1] + am[3] * hs[3];
        if !a.is_constant() {
            // d a_{ij} / d x_i times d_j H; Jacobian rows are entries of a
            a.jacobian(&x, &mut da);
            for i in 0..2 {
                for j in 0..2 {
                    div += da[(i * 2 + j) * 2 + i] * g[j];
                }
            }
        }
        let mut bf = 0.0;
        if let Some(beta) = beta {
            beta.eval(&x, &mut b);
            bf = b[0] * g[0] + b[1] * g[1];
        }
        Ok([1.0 / gn, (ag[0] * g[0] + ag[1] * g[1]) / gn, bf / gn, div / gn])
    };
    // Simpson's rule on every segment; vertex samples are shared.
    let vertex: Vec<[f64; 4]> = poly.iter().map(|&p| sample(p)).collect::<Result<_>>()?;
    let mut acc = [0.0; 4];
    for k in 0..n {
        let (p, q) = (poly[k], poly[(k + 1) % n]);
        let seg = (q[0] - p[0]).hypot(q[1] - p[1]);
        if seg == 0.0 {
            continue;
        }
        let mid = sample([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])])?;
        let (u, v) = (vertex[k], vertex[(k + 1) % n]);
        for c in 0..4 {
            acc[c] += seg * (u[c] + 4.0 * mid[c] + v[c]) / 6.0;
        }
        out.length += seg;
    }
    out.period = acc[0];
    out.a_flux = acc[1];
    out.beta_flux = acc[2];
    out.a_flux_rate = acc[3];
    Ok(out)
}

fn check_dims(a: &Field, beta: Option<&Field>) -> Result<()> {
    if a.dim_in() != 2 || a.dim_out() != 4 {
        return Err(Error::invalid("diffusion matrix field must map R^2 -> R^{2x2}"));
    }
    if let Some(b) = beta {
        if b.dim_in() != 2 || b.dim_out() != 2 {
            return Err(Error::invalid("perturbation field must map R^2 -> R^2"));
        }
    }
    Ok(())
}

/// Averaged coefficient tables along one edge.
///
/// `drift_correction` is `(1 / 2T) ∮ div(a grad H) / |grad H| dl`. The
/// generator of `H(X)` on the edge is `(1/2) a_bar u'' + (beta_bar +
/// drift_correction) u'`, equivalently `(1 / 2T) (T a_bar u')' + beta_bar u'`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeCoefficients {
    pub edge: usize,
    pub z: Vec<f64>,
    pub period: Vec<f64>,
    pub a_bar: Vec<f64>,
    pub beta_bar: Vec<f64>,
    pub drift_correction: Vec<f64>,
}

/// Values of one table row at a level.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientSample {
    pub period: f64,
    pub a_bar: f64,
    pub beta_bar: f64,
    pub drift_correction: f64,
}

impl CoefficientSample {
    pub fn drift(&self) -> f64 {
        self.beta_bar + self.drift_correction
    }
}

impl EdgeCoefficients {
    /// Linear interpolation, linear extrapolation past the table ends.
    pub fn at(&self, z: f64) -> CoefficientSample {
        let n = self.z.len();
        let k = if n < 2 {
            0
        } else {
            match self.z.partition_point(|&t| t <= z) {
                0 => 0,
                p if p >= n => n - 2,
                p => p - 1,
            }
        };
        let lerp = |v: &[f64]| {
            if n < 2 {
                return v[0];
            }
            let w = (z - self.z[k]) / (self.z[k + 1] - self.z[k]);
            v[k] + w * (v[k + 1] - v[k])
        };
        CoefficientSample {
            period: lerp(&self.period),
            a_bar: lerp(&self.a_bar),
            beta_bar: lerp(&self.beta_bar),
            drift_correction: lerp(&self.drift_correction),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["z", "period", "a_bar", "beta_bar", "drift_correction"])?;
        for k in 0..self.z.len() {
            w.write_record(
                [self.z[k], self.period[k], self.a_bar[k], self.beta_bar[k], self.drift_correction[k]]
                    .map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `n` levels inside the edge, kept `1e-3` of the range away from both ends.
/// The offset is widened to twice the grid resolution of the vertex level
/// so that contours next to a vertex have the right topology. `cap`
/// replaces the upper end of the unbounded edge.
pub fn default_z_grid(field: &ScalarField2D, graph: &ReebGraph, edge: usize, n: usize, cap: Option<f64>) -> Vec<f64> {
    let e = &graph.edges[edge];
    let hi = if e.unbounded { cap.unwrap_or(e.z_hi).min(e.z_hi) } else { e.z_hi };
    let span = hi - e.z_lo;
    let offset = |v: usize| {
        let r = match graph.vertices[v].position {
            Some(x) => 2.0 * level_resolution(field, x),
            None => 0.0,
        };
        (1e-3 * span).max(r.min(0.25 * span))
    };
    let (lo, hi) = (e.z_lo + offset(e.lower), hi - offset(e.upper));
    let n = n.max(2);
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Interpolation error of the sampled grid near `x`: `|h|^2 / 2` times the
/// largest Hessian eigenvalue magnitude.
pub fn level_resolution(field: &ScalarField2D, x: [f64; 2]) -> f64 {
    let h = field.hessian(x);
    let (tr, det) = (h[0] + h[3], h[0] * h[3] - h[1] * h[2]);
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let lam = (0.5 * tr).abs() + disc;
    0.5 * (field.dx().powi(2) + field.dy().powi(2)) * lam
}

pub fn edge_coefficients(
    field: &ScalarField2D,
    graph: &ReebGraph,
    a: &Field,
    beta: Option<&Field>,
    edge: usize,
    z_grid: &[f64],
) -> Result<EdgeCoefficients> {
    check_dims(a, beta)?;
    if z_grid.is_empty() || z_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("z-grid must be nonempty and increasing"));
    }
    let rows: Vec<ContourIntegrals> = z_grid
        .par_iter()
        .map(|&z| {
            let poly = extract_contour(field, graph, z, edge)?;
            contour_integrals(field, &poly, a, beta)
        })
        .collect::<Result<_>>()?;
    Ok(EdgeCoefficients {
        edge,
        z: z_grid.to_vec(),
        period: rows.iter().map(|r| r.period).collect(),
        a_bar: rows.iter().map(|r| r.a_flux / r.period).collect(),
        beta_bar: rows.iter().map(|r| r.beta_flux / r.period).collect(),
        drift_correction: rows.iter().map(|r| 0.5 * r.a_flux_rate / r.period).collect(),
    })
}

/// Gluing data at one saddle: `Σ sign_j gamma_j D_j u = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GluingEntry {
    pub vertex: usize,
    pub edges: Vec<usize>,
    pub gamma: Vec<f64>,
    /// `+1` if the edge lies above the vertex level, `-1` below.
    pub sign: Vec<f64>,
    pub alpha: f64,
}

pub fn gluing_coefficients(
    field: &ScalarField2D,
    graph: &ReebGraph,
    a: &Field,
    vertex: usize,
    delta_z: f64,
) -> Result<GluingEntry> {
    check_dims(a, None)?;
    let v = graph.vertices.get(vertex).ok_or_else(|| Error::invalid(format!("no vertex {vertex}")))?;
    if v.kind != VertexKind::Saddle {
        return Err(Error::invalid(format!("vertex {vertex} is not a saddle")));
    }
    if !(delta_z > 0.0) {
        return Err(Error::invalid("delta_z must be positive"));
    }
    let mut entry = GluingEntry { vertex, edges: Vec::new(), gamma: Vec::new(), sign: Vec::new(), alpha: 0.0 };
    for &e in &v.edges {
        let s = if graph.edges[e].lower == vertex { 1.0 } else { -1.0 };
        let flux = |d: f64| -> Result<f64> {
            let poly = extract_contour(field, graph, v.value + s * d, e)?;
            Ok(contour_integrals(field, &poly, a, None)?.a_flux)
        };
        let (g1, g2) = (flux(delta_z)?, flux(0.5 * delta_z)?);
        entry.edges.push(e);
        entry.gamma.push(2.0 * g2 - g1);
        entry.sign.push(s);
    }
    Ok(entry)
}

/// Midpoint-rule area integral of `f` over the region enclosed by `poly`.
pub fn area_integral(field: &ScalarField2D, poly: &[[f64; 2]], f: &dyn Fn([f64; 2]) -> f64) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let (dx, dy) = (field.dx(), field.dy());
    let i0 = ((lo[0] - field.bbox[0]) / dx).floor().max(0.0) as usize;
    let i1 = (((hi[0] - field.bbox[0]) / dx).ceil() as usize).min(field.nx - 1);
    let j0 = ((lo[1] - field.bbox[2]) / dy).floor().max(0.0) as usize;
    let j1 = (((hi[1] - field.bbox[2]) / dy).ceil() as usize).min(field.ny - 1);
    let mut sum = 0.0;
    for j in j0..j1 {
        for i in i0..i1 {
            let c = [field.bbox[0] + (i as f64 + 0.5) * dx, field.bbox[2] + (j as f64 + 0.5) * dy];
            if point_in_polygon(poly, c) {
                sum += f(c);
            }
        }
    }
    sum * dx * dy
}

/// Divergence of `a grad H` at `x` (central differences for the Hessian).
pub fn div_a_grad(field: &ScalarField2D, a: &Field, x: [f64; 2]) -> f64 {
    let mut am = [0.0; 4];
    a.eval(&x, &mut am);
    let hs = field.hessian(x);
    let mut div = am[0] * hs[0] + am[1] * hs[2] + am[2] * hs[1] + am[3] * hs[3];
    if !a.is_constant() {
        let g = field.grad(x);
        let mut da = [0.0; 8];
        a.jacobian(&x, &mut da);
        for i in 0..2 {
            for j in 0..2 {
                div += da[(i * 2 + j) * 2 + i] * g[j];
            }
        }
    }
    div
}

/// Graph plus averaged coefficients: the document handed to the graph solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReebModel {
    pub graph: ReebGraph,
    pub coefficients: Vec<EdgeCoefficients>,
    pub gluing: Vec<GluingEntry>,
    /// Upper truncation level of the unbounded edge.
    pub cap: f64,
}

impl ReebModel {
    /// Tabulates every edge with `n` levels and glues every saddle.
    pub fn build(
        field: &ScalarField2D,
        graph: ReebGraph,
        a: &Field,
        beta: Option<&Field>,
        n: usize,
        cap: Option<f64>,
    ) -> Result<Self> {
        let cap = match cap {
            Some(c) => c,
            None => default_cap(&graph),
        };
        if !(cap > graph.largest_critical_value() && cap < graph.boundary_min) {
            return Err(Error::invalid(format!(
                "cap {cap} must lie between the top critical value and the box boundary level"
            )));
        }
        let mut coefficients = Vec::new();
        for e in 0..graph.edges.len() {
            let grid = default_z_grid(field, &graph, e, n, Some(cap));
            coefficients.push(edge_coefficients(field, &graph, a, beta, e, &grid)?);
        }
        let range = graph.boundary_min - graph.smallest_critical_value();
        let mut gluing = Vec::new();
        for v in graph.saddles() {
            let delta = (1e-3 * range).max(2.0 * level_resolution(field, v.position.unwrap()));
            gluing.push(gluing_coefficients(field, &graph, a, v.id, delta)?);
        }
        Ok(ReebModel { graph, coefficients, gluing, cap })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `2 * (largest critical value)` when that clears the top vertex, else the
/// top vertex shifted up by the depth of the deepest well; always kept below
/// the boundary level.
pub fn default_cap(graph: &ReebGraph) -> f64 {
    let top = graph.largest_critical_value();
    let depth = top - graph.smallest_critical_value();
    let bm = graph.boundary_min;
    let mut cap = 2.0 * top;
    if cap <= top + 1e-3 * (bm - top) {
        cap = top + if depth > 0.0 { depth } else { 0.5 * (bm - top) };
    }
    cap.min(top + 0.9 * (bm - top))
}
