use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{action_grad, ActionWs, PathDiscretization};
use crate::dynamics::{DiffusionSpec, Polygon};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Start or end set of a transition.
#[derive(Debug, Clone)]
pub enum EndSet {
    Point(Vec<f64>),
    Ball { center: Vec<f64>, radius: f64 },
    /// Boundary of a planar polygon.
    PolygonBoundary(Polygon),
}

impl EndSet {
    pub fn center(&self) -> Vec<f64> {
        match self {
            EndSet::Point(p) => p.clone(),
            EndSet::Ball { center, .. } => center.clone(),
            EndSet::PolygonBoundary(poly) => {
                let n = poly.vertices.len() as f64;
                let (sx, sy) = poly
                    .vertices
                    .iter()
                    .fold((0.0, 0.0), |(a, b), v| (a + v[0], b + v[1]));
                vec![sx / n, sy / n]
            }
        }
    }

    fn is_fixed(&self) -> bool {
        matches!(self, EndSet::Point(_))
    }

    /// Nearest point of the set.
    pub fn project(&self, x: &mut [f64]) {
        match self {
            EndSet::Point(p) => x.copy_from_slice(p),
            EndSet::Ball { center, radius } => {
                let d = dist(x, center);
                if d > *radius {
                    for (xi, ci) in x.iter_mut().zip(center) {
                        *xi = ci + (*xi - ci) * radius / d;
                    }
                }
            }
            EndSet::PolygonBoundary(poly) => {
                let q = nearest_on_polygon(&poly.vertices, [x[0], x[1]]);
                x[0] = q[0];
                x[1] = q[1];
            }
        }
    }

    pub fn distance_to(&self, x: &[f64]) -> f64 {
        let mut p = x.to_vec();
        self.project(&mut p);
        dist(&p, x)
    }

    fn intersects(&self, other: &EndSet) -> bool {
        match other {
            EndSet::Point(p) => self.distance_to(p) <= 1e-12,
            EndSet::Ball { center, radius } => self.distance_to(center) <= *radius,
            EndSet::PolygonBoundary(_) => match self {
                EndSet::PolygonBoundary(_) => false,
                _ => other.intersects(self),
            },
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn nearest_on_polygon(v: &[[f64; 2]], p: [f64; 2]) -> [f64; 2] {
    let mut best = v[0];
    let mut bd = f64::INFINITY;
    for i in 0..v.len() {
        let (a, b) = (v[i], v[(i + 1) % v.len()]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let len2 = e[0] * e[0] + e[1] * e[1];
        let s = if len2 > 0.0 {
            (((p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [a[0] + s * e[0], a[1] + s * e[1]];
        let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        if d < bd {
            bd = d;
            best = q;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionConfig {
    /// Path segments.
    pub n: usize,
    /// Explicit T values; overrides the automatic geometric grid.
    pub t_grid: Option<Vec<f64>>,
    /// Automatic grid spans `[t_min_factor, t_max_factor] * diam / |b|_typ`.
    pub t_min_factor: f64,
    pub t_max_factor: f64,
    pub t_count: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Stop when the best value improves by less than this (relative) over
    /// a 100-iteration window.
    pub rel_tol: f64,
    /// Start points on a polygon end set.
    pub starts: usize,
    /// Random initial bump added to the straight line.
    pub perturb_seed: Option<u64>,
    pub perturb_amp: f64,
}

impl Default for ActionConfig {
    fn default() -> Self {
        ActionConfig {
            n: 200,
            t_grid: None,
            t_min_factor: 0.5,
            t_max_factor: 64.0,
            t_count: 16,
            max_iter: 20_000,
            grad_tol: 1e-7,
            rel_tol: 1e-9,
            starts: 8,
            perturb_seed: None,
            perturb_amp: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuasipotentialResult {
    pub value: f64,
    #[serde(skip)]
    pub path: Option<PathDiscretization>,
    pub t_star: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub t_grid: Vec<f64>,
    /// Minimised action per grid value.
    pub t_values: Vec<f64>,
    /// End point of the minimising path.
    pub argmin: Vec<f64>,
    /// Several well-separated end points attain the minimum.
    pub degenerate: bool,
}

struct Run {
    value: f64,
    points: Vec<f64>,
    iterations: usize,
    grad_norm: f64,
    converged: bool,
}

fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![hi];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (r * k as f64).exp()).collect()
}

fn time_grid(spec: &DiffusionSpec, a: &[f64], b: &[f64], cfg: &ActionConfig) -> Vec<f64> {
    if let Some(g) = &cfg.t_grid {
        return g.clone();
    }
    let diam = dist(a, b).max(1e-3);
    let n = spec.dim;
    let (mut bv, mut scr, mut x) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let samples = 64;
    let mut speed = 0.0;
    for k in 0..samples {
        let s = (k as f64 + 0.5) / samples as f64;
        for i in 0..n {
            x[i] = a[i] + s * (b[i] - a[i]);
        }
        spec.total_drift(&x, &mut bv, &mut scr);
        speed += bv.iter().map(|v| v * v).sum::<f64>().sqrt() / samples as f64;
    }
    let tau = if speed > 1e-12 { diam / speed } else { diam };
    geometric_grid(cfg.t_min_factor * tau, cfg.t_max_factor * tau, cfg.t_count)
}

/// Nesterov accelerated gradient descent with gradient-based restart at a
/// fixed path time.
fn minimize_fixed_t(
    spec: &DiffusionSpec,
    a: &EndSet,
    b: &EndSet,
    init: &[f64],
    t: f64,
    cfg: &ActionConfig,
) -> Result<Run> {
    let n = spec.dim;
    let len = init.len();
    let n_seg = len / n - 1;
    let ds = t / n_seg as f64;
    let mut ws = ActionWs::new(spec)?;

    // Lipschitz estimate of the gradient along the initial path.
    let mut lam = 0.0f64;
    let mut jmax = 0.0f64;
    let mut jb = vec![0.0; n * n];
    for k in 0..=n_seg {
        let x = &init[k * n..(k + 1) * n];
        lam = lam.max(ws.ainv_trace(spec, x)?);
        spec.drift.jacobian(x, &mut jb);
        jmax = jmax.max(jb.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let lip = lam * (4.0 / ds + 2.0 * jmax + ds * jmax * jmax);
    let mut lr = 1.0 / lip;

    let free = |k: usize| (k > 0 || !a.is_fixed()) && (k < n_seg || !b.is_fixed());
    let project = |x: &mut [f64]| {
        a.project(&mut x[..n]);
        b.project(&mut x[n_seg * n..]);
    };

    let mut x = init.to_vec();
    project(&mut x);
    let mut y = x.clone();
    let mut x_new = x.clone();
    let mut g = vec![0.0; len];
    let mut best = f64::INFINITY;
    let mut best_pts = x.clone();
    let mut best_grad = f64::INFINITY;
    let mut window_ref = f64::INFINITY;
    let mut momentum_k = 1usize;
    let mut converged = false;
    let mut iters = 0;

    for it in 0..cfg.max_iter {
        iters = it + 1;
        let fy = match action_grad(spec, &y, ds, Some(&mut g), &mut ws) {
            Ok(v) => v,
            Err(_) => f64::NAN,
        };
        for k in 0..=n_seg {
            if !free(k) {
                g[k * n..(k + 1) * n].fill(0.0);
            }
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !fy.is_finite() || fy > 1e3 * best.max(1.0) {
            // diverging: shrink the step and restart from the best point
            lr *= 0.5;
            x.copy_from_slice(&best_pts);
            y.copy_from_slice(&best_pts);
            momentum_k = 1;
            if lr * lip < 1e-8 {
                break;
            }
            continue;
        }
        if fy < best {
            best = fy;
            best_pts.copy_from_slice(&y);
            best_grad = gnorm;
        }
        if gnorm <= cfg.grad_tol {
            converged = true;
            break;
        }
        for i in 0..len {
            x_new[i] = y[i] - lr * g[i];
        }
        project(&mut x_new);
        // restart when the step opposes the momentum direction
        let mut dot = 0.0;
        for i in 0..len {
            dot += g[i] * (x_new[i] - x[i]);
        }
        if dot > 0.0 {
            momentum_k = 1;
        }
        let beta = (momentum_k as f64 - 1.0) / (momentum_k as f64 + 2.0);
        momentum_k += 1;
        for i in 0..len {
            y[i] = x_new[i] + beta * (x_new[i] - x[i]);
        }
        project(&mut y);
        std::mem::swap(&mut x, &mut x_new);

        if (it + 1) % 100 == 0 {
            if window_ref - best <= cfg.rel_tol * best.abs().max(1e-12) {
                converged = true;
                break;
            }
            window_ref = best;
        }
    }
    if !best.is_finite() {
        return Err(Error::invalid(format!("action minimisation failed at T = {t}")));
    }
    Ok(Run {
        value: best,
        points: best_pts,
        iterations: iters,
        grad_norm: best_grad,
        converged: converged || best_grad <= cfg.grad_tol,
    })
}

fn initial_path(a: &[f64], b: &[f64], cfg: &ActionConfig, salt: u64) -> Vec<f64> {
    let n = a.len();
    let mut pts = Vec::with_capacity((cfg.n + 1) * n);
    let mut rng = cfg.perturb_seed.map(|s| RngStream::named(s, "action:init", salt));
    let bump: Vec<f64> = match rng.as_mut() {
        Some(r) => (0..n).map(|_| cfg.perturb_amp * r.normal()).collect(),
        None => vec![0.0; n],
    };
    for k in 0..=cfg.n {
        let s = k as f64 / cfg.n as f64;
        let w = (std::f64::consts::PI * s).sin();
        pts.extend((0..n).map(|i| a[i] + s * (b[i] - a[i]) + w * bump[i]));
    }
    pts
}

fn boundary_starts(b: &EndSet, count: usize) -> Vec<Vec<f64>> {
    match b {
        EndSet::PolygonBoundary(poly) => {
            let nv = poly.vertices.len();
            (0..count.max(1))
                .map(|k| {
                    // spread over the perimeter, at edge midpoints
                    let e = (k * nv) / count.max(1);
                    let (p, q) = (poly.vertices[e], poly.vertices[(e + 1) % nv]);
                    vec![0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
                })
                .collect()
        }
        _ => vec![b.center()],
    }
}

/// `inf { S_{0T}(phi) : phi_0 in A, phi_T in B, T > 0 }` over a T grid.
pub fn minimize_action(
    spec: &DiffusionSpec,
    a: &EndSet,
    b: &EndSet,
    cfg: &ActionConfig,
) -> Result<QuasipotentialResult> {
    if cfg.n < 2 {
        return Err(Error::invalid("need at least 2 path segments"));
    }
    let a0 = a.center();
    if a0.len() != spec.dim {
        return Err(Error::invalid("start set dimension differs from the system"));
    }
    if a.intersects(b) {
        let mut p = a0.clone();
        b.project(&mut p);
        let pts = p.repeat(cfg.n + 1);
        return Ok(QuasipotentialResult {
            value: 0.0,
            path: Some(PathDiscretization::new(spec.dim, pts, 1.0)?),
            t_star: 0.0,
            iterations: 0,
            grad_norm: 0.0,
            converged: true,
            t_grid: vec![],
            t_values: vec![],
            argmin: p,
            degenerate: false,
        });
    }
    let starts = boundary_starts(b, cfg.starts);
    let mut jobs = Vec::new();
    for (si, end) in starts.iter().enumerate() {
        let grid = time_grid(spec, &a0, end, cfg);
        for (ti, t) in grid.iter().enumerate() {
            jobs.push((si, ti, *t, end.clone()));
        }
    }
    let runs: Vec<Result<(usize, usize, f64, Run)>> = jobs
        .par_iter()
        .map(|(si, ti, t, end)| {
            let init = initial_path(&a0, end, cfg, *si as u64);
            minimize_fixed_t(spec, a, b, &init, *t, cfg).map(|r| (*si, *ti, *t, r))
        })
        .collect();
    let runs: Vec<(usize, usize, f64, Run)> = runs.into_iter().collect::<Result<_>>()?;

    // best per start
    let mut per_start: Vec<Option<usize>> = vec![None; starts.len()];
    for (idx, (si, _, _, r)) in runs.iter().enumerate() {
        match per_start[*si] {
            Some(j) if runs[j].3.value <= r.value => {}
            _ => per_start[*si] = Some(idx),
        }
    }
    let best_idx = per_start
        .iter()
        .flatten()
        .copied()
        .min_by(|&i, &j| runs[i].3.value.total_cmp(&runs[j].3.value))
        .expect("at least one run");
    let (bsi, _, t_star, best) = &runs[best_idx];
    let n = spec.dim;
    let n_seg = cfg.n;
    let argmin = best.points[n_seg * n..].to_vec();

    let mut degenerate = false;
    if let EndSet::PolygonBoundary(poly) = b {
        let scale = poly
            .vertices
            .iter()
            .flat_map(|p| poly.vertices.iter().map(move |q| dist(p, q)))
            .fold(0.0, f64::max);
        let tol = 1e-2 * best.value.abs() + 1e-9;
        for j in per_start.iter().flatten() {
            let r = &runs[*j].3;
            if r.value <= best.value + tol && dist(&r.points[n_seg * n..], &argmin) > 0.05 * scale {
                degenerate = true;
            }
        }
    }
    let mut grid: Vec<(f64, f64)> = runs
        .iter()
        .filter(|(si, ..)| si == bsi)
        .map(|(_, _, t, r)| (*t, r.value))
        .collect();
    grid.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(QuasipotentialResult {
        value: best.value,
        path: Some(PathDiscretization {
            dim: n,
            points: best.points.clone(),
            t: *t_star,
            fix_start: a.is_fixed(),
            fix_end: b.is_fixed(),
        }),
        t_star: *t_star,
        iterations: runs.iter().map(|r| r.3.iterations).sum(),
        grad_norm: best.grad_norm,
        converged: best.converged,
        t_grid: grid.iter().map(|p| p.0).collect(),
        t_values: grid.iter().map(|p| p.1).collect(),
        argmin,
        degenerate,
    })
}

/// `V(x)` relative to an attractor, or `min_{dD} V` when `target` is a
/// polygon boundary.
pub fn quasipotential_point(
    spec: &DiffusionSpec,
    attractor: &EndSet,
    target: &EndSet,
    cfg: &ActionConfig,
) -> Result<QuasipotentialResult> {
    minimize_action(spec, attractor, target, cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct VMatrix {
    pub values: Vec<Vec<f64>>,
    pub converged: Vec<Vec<bool>>,
    /// `(i, j, k)` with `|V_ij - V_ik|` below the rough-symmetry threshold.
    pub ties: Vec<(usize, usize, usize)>,
    pub tie_threshold: f64,
}

impl VMatrix {
    pub fn is_generic(&self) -> bool {
        self.ties.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Pairwise transition exponents between compacts.
pub fn v_matrix(spec: &DiffusionSpec, compacts: &[EndSet], cfg: &ActionConfig) -> Result<VMatrix> {
    let l = compacts.len();
    if l < 2 {
        return Err(Error::invalid("need at least two compacts"));
    }
    let pairs: Vec<(usize, usize)> = (0..l)
        .flat_map(|i| (0..l).filter(move |j| *j != i).map(move |j| (i, j)))
        .collect();
    let res: Vec<Result<QuasipotentialResult>> = pairs
        .par_iter()
        .map(|(i, j)| minimize_action(spec, &compacts[*i], &compacts[*j], cfg))
        .collect();
    let mut values = vec![vec![0.0; l]; l];
    let mut converged = vec![vec![true; l]; l];
    for ((i, j), r) in pairs.iter().zip(res) {
        let r = r?;
        values[*i][*j] = r.value;
        converged[*i][*j] = r.converged;
    }
    let vmax = values.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    let tie_threshold = 1e-2 * vmax;
    let mut ties = Vec::new();
    for i in 0..l {
        for j in 0..l {
            for k in j + 1..l {
                if j != i && k != i && (values[i][j] - values[i][k]).abs() < tie_threshold {
                    ties.push((i, j, k));
                }
            }
        }
    }
    Ok(VMatrix {
        values,
        converged,
        ties,
        tie_threshold,
    })
}
