use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{GraphDiffusionSpec, GraphState, NodeKind};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg::solve_dense;
use crate::quad::adaptive_simpson;

/// Dirichlet datum `u(edge, h) = value`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub edge: usize,
    pub h: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSolution {
    pub edge: usize,
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl EdgeSolution {
    pub fn eval(&self, h: f64) -> f64 {
        let k = self.h.partition_point(|&x| x <= h).clamp(1, self.h.len() - 1);
        let w = (h - self.h[k - 1]) / (self.h[k] - self.h[k - 1]);
        self.v[k - 1] + w * (self.v[k] - self.v[k - 1])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["h", "v"])?;
        for (h, v) in self.h.iter().zip(&self.v) {
            w.write_record([h.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSolution {
    pub edges: Vec<EdgeSolution>,
}

impl GraphSolution {
    pub fn eval(&self, s: GraphState) -> f64 {
        self.edges[s.edge].eval(s.h)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.edges.iter().flat_map(|e| e.v.iter()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }

    /// One-sided second-order derivative at an end of `edge`, in the
    /// direction of increasing `h`.
    pub fn end_derivative(&self, edge: usize, upper: bool) -> f64 {
        let (h, v) = (&self.edges[edge].h, &self.edges[edge].v);
        let n = h.len();
        if upper {
            one_sided(h[n - 1], h[n - 2], h[n - 3], v[n - 1], v[n - 2], v[n - 3])
        } else {
            one_sided(h[0], h[1], h[2], v[0], v[1], v[2])
        }
    }

    /// Largest `|Σ sign gamma D_j u|` over interior vertices, relative to
    /// the solution range times the largest gamma.
    pub fn gluing_residual(&self, spec: &GraphDiffusionSpec) -> f64 {
        let (lo, hi) = self.min_max();
        let scale = (hi - lo).abs().max(1e-300);
        let mut worst: f64 = 0.0;
        for g in &spec.gluing {
            let gmax = g.gamma.iter().cloned().fold(0.0, f64::max);
            let r: f64 = (0..g.edges.len())
                .map(|k| g.sign[k] * g.gamma[k] * self.end_derivative(g.edges[k], g.sign[k] < 0.0))
                .sum();
            worst = worst.max(r.abs() / (gmax * scale));
        }
        worst
    }

    pub fn write_csv_dir(&self, dir: &Path, stem: &str) -> Result<()> {
        for e in &self.edges {
            e.write_csv(&dir.join(format!("{stem}_edge{}.csv", e.edge)))?;
        }
        Ok(())
    }
}

/// Coefficients of the three-point derivative at `x0` from `x0, x1, x2`
/// applied to `u0, u1, u2`.
fn one_sided(x0: f64, x1: f64, x2: f64, u0: f64, u1: f64, u2: f64) -> f64 {
    let w = one_sided_weights(x0, x1, x2);
    w[0] * u0 + w[1] * u1 + w[2] * u2
}

fn one_sided_weights(x0: f64, x1: f64, x2: f64) -> [f64; 3] {
    // derivative of the Lagrange interpolant through the three nodes, at x0
    let (d1, d2) = (x1 - x0, x2 - x0);
    [-(d1 + d2) / (d1 * d2), d2 / (d1 * (d2 - d1)), -d1 / (d2 * (d2 - d1))]
}

/// Node layout shared by the solvers: one unknown per vertex, then edge
/// interior nodes.
struct Mesh {
    /// Per edge: node levels and global unknown ids (ends are vertex ids).
    h: Vec<Vec<f64>>,
    id: Vec<Vec<usize>>,
    /// Per edge: node positions that are interior breakpoints.
    brk: Vec<Vec<bool>>,
    n: usize,
}

fn build_mesh(spec: &GraphDiffusionSpec, breaks: &[Vec<f64>], mesh: usize) -> Mesh {
    let mut n = spec.nodes.len();
    let (mut hs, mut ids, mut brks) = (Vec::new(), Vec::new(), Vec::new());
    for (k, e) in spec.edges.iter().enumerate() {
        let mut cuts = vec![e.z_lo];
        cuts.extend(breaks[k].iter().copied());
        cuts.push(e.z_hi);
        let (mut h, mut id, mut brk) = (vec![e.z_lo], vec![e.lower], vec![false]);
        for p in 0..cuts.len() - 1 {
            let len = cuts[p + 1] - cuts[p];
            let m = ((mesh as f64 * len / e.len()).ceil() as usize).max(2);
            for i in 1..=m {
                let last = i == m;
                h.push(if last { cuts[p + 1] } else { cuts[p] + len * i as f64 / m as f64 });
                if last && p == cuts.len() - 2 {
                    id.push(e.upper);
                    brk.push(false);
                } else {
                    id.push(n);
                    n += 1;
                    brk.push(last);
                }
            }
        }
        hs.push(h);
        ids.push(id);
        brks.push(brk);
    }
    Mesh { h: hs, id: ids, brk: brks, n }
}

fn normalize_row(a: &mut DMatrix<f64>, b: &mut DVector<f64>, r: usize) {
    let m = a.row(r).amax();
    if m > 0.0 {
        a.row_mut(r).scale_mut(1.0 / m);
        b[r] /= m;
    }
}

/// Finite differences for `(1/2) a_bar u'' + drift u' = 0` on every edge,
/// shared unknowns at vertices (continuity), gluing rows at interior
/// vertices, zero derivative at terminal vertices and Dirichlet rows.
pub fn solve_dirichlet(spec: &GraphDiffusionSpec, boundary: &[BoundaryPoint], mesh: usize) -> Result<GraphSolution> {
    if boundary.is_empty() {
        return Err(Error::invalid("Dirichlet problem needs boundary data"));
    }
    if mesh < 4 {
        return Err(Error::invalid("mesh needs at least 4 intervals per edge"));
    }
    let ne = spec.edges.len();
    let mut breaks: Vec<Vec<f64>> = vec![Vec::new(); ne];
    let mut vertex_value: Vec<Option<f64>> = vec![None; spec.nodes.len()];
    let mut point_value: Vec<Vec<(f64, f64)>> = vec![Vec::new(); ne];
    for b in boundary {
        let e = spec.edges.get(b.edge).ok_or_else(|| Error::invalid(format!("no edge {}", b.edge)))?;
        let tol = 1e-12 * (1.0 + e.len());
        let end = if (b.h - e.z_lo).abs() <= tol {
            Some(e.lower)
        } else if (b.h - e.z_hi).abs() <= tol {
            Some(e.upper)
        } else if b.h > e.z_lo && b.h < e.z_hi {
            None
        } else {
            return Err(Error::invalid(format!("boundary level {} outside edge {}", b.h, b.edge)));
        };
        match end {
            Some(v) => match vertex_value[v] {
                Some(x) if x != b.value => {
                    return Err(Error::invalid(format!("conflicting boundary values at vertex {v}")))
                }
                _ => vertex_value[v] = Some(b.value),
            },
            None => {
                breaks[b.edge].push(b.h);
                point_value[b.edge].push((b.h, b.value));
            }
        }
    }
    for br in &mut breaks {
        br.sort_by(f64::total_cmp);
        br.dedup();
    }
    let m = build_mesh(spec, &breaks, mesh);
    let mut a = DMatrix::<f64>::zeros(m.n, m.n);
    let mut rhs = DVector::<f64>::zeros(m.n);
    let mut assigned = vec![false; m.n];

    for k in 0..ne {
        let (h, id) = (&m.h[k], &m.id[k]);
        for i in 1..h.len() - 1 {
            let r = id[i];
            assigned[r] = true;
            if m.brk[k][i] {
                let val = point_value[k]
                    .iter()
                    .find(|(z, _)| *z == h[i])
                    .map(|(_, v)| *v)
                    .expect("breakpoint carries a value");
                a[(r, r)] = 1.0;
                rhs[r] = val;
                continue;
            }
            let (h1, h2) = (h[i] - h[i - 1], h[i + 1] - h[i]);
            let (ab, b) = spec.coefficients(k, h[i]);
            let s = h1 + h2;
            let d2 = [2.0 / (h1 * s), -2.0 / (h1 * h2), 2.0 / (h2 * s)];
            let d1 = [-h2 / (h1 * s), (h2 - h1) / (h1 * h2), h1 / (h2 * s)];
            for (c, col) in [id[i - 1], id[i], id[i + 1]].into_iter().enumerate() {
                a[(r, col)] += 0.5 * ab * d2[c] + b * d1[c];
            }
            normalize_row(&mut a, &mut rhs, r);
        }
    }

    for (v, kind) in spec.nodes.iter().enumerate() {
        assigned[v] = true;
        if let Some(x) = vertex_value[v] {
            a[(v, v)] = 1.0;
            rhs[v] = x;
            continue;
        }
        let add_end = |a: &mut DMatrix<f64>, e: usize, weight: f64| {
            let (h, id) = (&m.h[e], &m.id[e]);
            let n = h.len();
            let (nodes, w) = if spec.edges[e].lower == v {
                ([id[0], id[1], id[2]], one_sided_weights(h[0], h[1], h[2]))
            } else {
                ([id[n - 1], id[n - 2], id[n - 3]], one_sided_weights(h[n - 1], h[n - 2], h[n - 3]))
            };
            for c in 0..3 {
                a[(v, nodes[c])] += weight * w[c];
            }
        };
        match kind {
            NodeKind::Interior => {
                let g = spec.gluing_at(v).expect("validated");
                for c in 0..g.edges.len() {
                    add_end(&mut a, g.edges[c], g.sign[c] * g.gamma[c]);
                }
            }
            NodeKind::Exterior | NodeKind::Cap => {
                let e = spec.edges.iter().position(|e| e.lower == v || e.upper == v).expect("validated");
                add_end(&mut a, e, 1.0);
            }
        }
        normalize_row(&mut a, &mut rhs, v);
    }
    debug_assert!(assigned.iter().all(|&x| x));
    let u = solve_dense(a, rhs)?;
    Ok(GraphSolution {
        edges: (0..ne)
            .map(|k| EdgeSolution { edge: k, h: m.h[k].clone(), v: m.id[k].iter().map(|&i| u[i]).collect() })
            .collect(),
    })
}

/// Probability of reaching each target before the others, from `start`.
pub fn hitting_probabilities(
    spec: &GraphDiffusionSpec,
    start: GraphState,
    targets: &[GraphState],
    mesh: usize,
) -> Result<Vec<f64>> {
    if targets.is_empty() {
        return Err(Error::invalid("no targets"));
    }
    (0..targets.len())
        .map(|i| {
            let bc: Vec<BoundaryPoint> = targets
                .iter()
                .enumerate()
                .map(|(j, t)| BoundaryPoint { edge: t.edge, h: t.h, value: if i == j { 1.0 } else { 0.0 } })
                .collect();
            Ok(solve_dirichlet(spec, &bc, mesh)?.eval(start))
        })
        .collect()
}

/// Widths `l_k(x)` and averaged source `f_k(x)` per edge, as 1-D fields.
#[derive(Debug, Clone)]
pub struct ChannelData {
    pub width: Vec<Field>,
    pub source: Vec<Field>,
}

/// Solves `(1 / 2 l) (l u')' = f` on every edge with flux balance
/// `Σ l_j D_j^out u = 0` at interior vertices, zero flux at terminal
/// vertices and `Σ ∫ u l dx = 0`.
///
/// Finite volumes on a uniform mesh per edge; the constant null space is
/// removed by a bordering multiplier, which also absorbs the quadrature
/// defect of the solvability condition.
pub fn solve_neumann_channel(spec: &GraphDiffusionSpec, data: &ChannelData, mesh: usize) -> Result<GraphSolution> {
    let ne = spec.edges.len();
    if data.width.len() != ne || data.source.len() != ne {
        return Err(Error::invalid("one width and one source per edge"));
    }
    if mesh < 4 {
        return Err(Error::invalid("mesh needs at least 4 intervals per edge"));
    }
    let wid = |k: usize, x: f64| data.width[k].eval_scalar(&[x]);
    let src = |k: usize, x: f64| data.source[k].eval_scalar(&[x]);
    let (mut total, mut scale) = (0.0, 0.0);
    for (k, e) in spec.edges.iter().enumerate() {
        let tol = 1e-12 * e.len();
        total += adaptive_simpson(&|x| src(k, x) * wid(k, x), e.z_lo, e.z_hi, tol)?;
        scale += adaptive_simpson(&|x| src(k, x).abs() * wid(k, x), e.z_lo, e.z_hi, tol)?;
    }
    if total.abs() > 1e-8 * scale.max(1.0) {
        return Err(Error::invalid(format!("solvability violated: Σ ∫ f l dx = {total:e}")));
    }
    let none: Vec<Vec<f64>> = vec![Vec::new(); ne];
    let m = build_mesh(spec, &none, mesh);
    let n = m.n + 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut vol = vec![0.0; m.n];
    for k in 0..ne {
        let (h, id) = (&m.h[k], &m.id[k]);
        if h.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("degenerate mesh"));
        }
        for i in 0..h.len() - 1 {
            let dx = h[i + 1] - h[i];
            let mid = 0.5 * (h[i] + h[i + 1]);
            let c = wid(k, mid) / dx;
            if !(c > 0.0) {
                return Err(Error::invalid(format!("width must be positive on edge {k}")));
            }
            let (p, q) = (id[i], id[i + 1]);
            a[(p, q)] += c;
            a[(p, p)] -= c;
            a[(q, p)] += c;
            a[(q, q)] -= c;
            for (node, x) in [(p, h[i]), (q, h[i + 1])] {
                let w = 0.5 * dx * wid(k, x);
                vol[node] += w;
                rhs[node] += 2.0 * w * src(k, x);
            }
        }
    }
    for i in 0..m.n {
        a[(i, m.n)] = vol[i];
        a[(m.n, i)] = vol[i];
    }
    let u = solve_dense(a, rhs)?;
    Ok(GraphSolution {
        edges: (0..ne)
            .map(|k| EdgeSolution { edge: k, h: m.h[k].clone(), v: m.id[k].iter().map(|&i| u[i]).collect() })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sided_weights_are_exact_on_quadratics() {
        let (x0, x1, x2) = (0.3, 0.5, 0.8);
        let u = |x: f64| 2.0 * x * x - x + 1.0;
        let d = one_sided(x0, x1, x2, u(x0), u(x1), u(x2));
        assert!((d - (4.0 * x0 - 1.0)).abs() < 1e-12);
        let d = one_sided(x2, x1, x0, u(x2), u(x1), u(x0));
        assert!((d - (4.0 * x2 - 1.0)).abs() < 1e-12);
    }
}
