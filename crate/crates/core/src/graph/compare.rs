//! Full planar system against its averaged graph process.

use serde::{Deserialize, Serialize};

use super::{first_passage, simulate_end, solve_dirichlet, BoundaryPoint, GraphDiffusionSpec, GraphState};
use crate::dynamics::{point_in_polygon, DiffusionSpec, SdeScheme, Stepper};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::fixtures::skew_gradient;
use crate::mc::{ensemble, w1_samples, Summary};
use crate::reeb::{build_reeb_graph, extract_contour, project_y, ReebModel, ScalarField2D};
use crate::rng::RngStream;

/// Numerical knobs shared by both comparisons. Times are on the slow scale
/// `t / eps`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AveragingConfig {
    pub eps: f64,
    pub paths: usize,
    pub sde_dt: f64,
    pub graph_dt: f64,
    pub delta_v: f64,
    pub table_points: usize,
    pub cap: Option<f64>,
    pub mesh: usize,
    pub t_max: f64,
}

impl Default for AveragingConfig {
    fn default() -> Self {
        AveragingConfig {
            eps: 1e-3,
            paths: 4000,
            sde_dt: 5e-5,
            graph_dt: 2e-6,
            delta_v: 0.015,
            table_points: 48,
            cap: None,
            mesh: 400,
            t_max: 200.0,
        }
    }
}

/// `dX = grad^perp H / eps dt + beta dt + sigma dW` on the slow scale.
pub struct PlanarSystem {
    pub field: ScalarField2D,
    pub beta: Field,
    pub sigma: Field,
}

impl PlanarSystem {
    fn a_field(&self) -> Field {
        let s = self.sigma.clone();
        Field::new(2, 4, move |x, o| {
            let mut m = [0.0; 4];
            s.eval(x, &mut m);
            o[0] = m[0] * m[0] + m[1] * m[1];
            o[1] = m[0] * m[2] + m[1] * m[3];
            o[2] = o[1];
            o[3] = m[2] * m[2] + m[3] * m[3];
        })
    }

    /// Reeb graph with tables and gluing data for this system.
    pub fn model(&self, cfg: &AveragingConfig) -> Result<ReebModel> {
        let g = build_reeb_graph(&self.field)?;
        ReebModel::build(&self.field, g, &self.a_field(), Some(&self.beta), cfg.table_points, cfg.cap)
    }

    /// Original-time diffusion with small parameter `eps`.
    fn diffusion(&self, eps: f64) -> Result<DiffusionSpec> {
        DiffusionSpec::new(skew_gradient(&self.field.h))?
            .with_perturbation(self.beta.clone())?
            .with_sigma(self.sigma.clone())?
            .with_eps(eps)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AveragingComparison {
    pub w1: f64,
    /// Worst `|gamma_up - Σ gamma_down| / gamma_up` over saddles.
    pub gluing_defect: f64,
    pub sde_mean_h: f64,
    pub graph_mean_h: f64,
    pub sde_h: Vec<f64>,
    pub graph_h: Vec<f64>,
}

pub fn gluing_defect(model: &ReebModel) -> f64 {
    model
        .gluing
        .iter()
        .map(|g| {
            let up: f64 = (0..g.gamma.len()).filter(|&k| g.sign[k] > 0.0).map(|k| g.gamma[k]).sum();
            let down: f64 = (0..g.gamma.len()).filter(|&k| g.sign[k] < 0.0).map(|k| g.gamma[k]).sum();
            (up - down).abs() / up
        })
        .fold(0.0, f64::max)
}

/// Law of `H(X_t)` for the planar system against the graph process started
/// at `Y(x0)`, both at slow time `t`.
pub fn compare_marginals(
    sys: &PlanarSystem,
    x0: [f64; 2],
    t: f64,
    cfg: &AveragingConfig,
    seed: u64,
) -> Result<(AveragingComparison, ReebModel)> {
    let model = sys.model(cfg)?;
    let graph = GraphDiffusionSpec::from_model(&model)?;
    let (h0, e0) = project_y(&sys.field, &model.graph, x0)?;
    let start = GraphState { edge: e0, h: h0 };

    let diff = sys.diffusion(cfg.eps)?;
    let dt = cfg.sde_dt / cfg.eps;
    let steps = (t / cfg.sde_dt).round() as usize;
    let sde_h: Vec<f64> = ensemble(seed, "averaging-sde", cfg.paths, |_, rng| {
        let mut st = Stepper::new(&diff, dt, SdeScheme::Rk4Drift);
        let mut x = x0;
        for _ in 0..steps {
            st.sde_step(&mut x, rng);
        }
        sys.field.value(x)
    });
    if sde_h.iter().any(|h| !h.is_finite()) {
        return Err(Error::BlowUp { index: steps });
    }
    let graph_h: Vec<f64> = ensemble(seed, "averaging-graph", cfg.paths, |_, rng| {
        simulate_end(&graph, start, cfg.graph_dt, t, cfg.delta_v, rng).map(|s| s.h)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let out = AveragingComparison {
        w1: w1_samples(&sde_h, &graph_h),
        gluing_defect: gluing_defect(&model),
        sde_mean_h: Summary::of(&sde_h).mean,
        graph_mean_h: Summary::of(&graph_h).mean,
        sde_h,
        graph_h,
    };
    Ok((out, model))
}

/// Level set `{H = level}` on one edge, carrying a boundary value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LevelBoundary {
    pub edge: usize,
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirichletProbe {
    pub x: [f64; 2],
    pub edge: usize,
    pub h: f64,
    pub graph: f64,
    pub monte_carlo: f64,
    pub std_err: f64,
}

/// The loop of edge `e` at a level, plus whether it is the only component
/// of the sublevel set (then membership reduces to `H < level`).
struct Wall {
    poly: Vec<[f64; 2]>,
    bbox: [f64; 4],
    whole: bool,
    level: f64,
    value: f64,
    start_inside: bool,
}

impl Wall {
    fn inside(&self, x: [f64; 2], hx: f64) -> bool {
        if hx >= self.level {
            return false;
        }
        if self.whole {
            return true;
        }
        x[0] >= self.bbox[0]
            && x[0] <= self.bbox[1]
            && x[1] >= self.bbox[2]
            && x[1] <= self.bbox[3]
            && point_in_polygon(&self.poly, x)
    }
}

/// `u(x) = E_x psi(X_tau)` for the planar system at `eps` against the graph
/// Dirichlet solution, at each probe.
pub fn compare_dirichlet(
    sys: &PlanarSystem,
    boundary: &[LevelBoundary],
    probes: &[[f64; 2]],
    paths: usize,
    cfg: &AveragingConfig,
    seed: u64,
) -> Result<(Vec<DirichletProbe>, ReebModel)> {
    let model = sys.model(cfg)?;
    let graph = GraphDiffusionSpec::from_model(&model)?;
    let bc: Vec<BoundaryPoint> =
        boundary.iter().map(|b| BoundaryPoint { edge: b.edge, h: b.level, value: b.value }).collect();
    let sol = solve_dirichlet(&graph, &bc, cfg.mesh)?;
    let nmin = model.graph.minima().count();
    let diff = sys.diffusion(cfg.eps)?;
    let dt = cfg.sde_dt / cfg.eps;
    let max_steps = (cfg.t_max / cfg.sde_dt).ceil() as usize;

    let mut out = Vec::new();
    for (pi, &x0) in probes.iter().enumerate() {
        let (h0, e0) = project_y(&sys.field, &model.graph, x0)?;
        let walls: Vec<Wall> = boundary
            .iter()
            .map(|b| {
                let poly = extract_contour(&sys.field, &model.graph, b.level, b.edge)?;
                let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
                for p in &poly {
                    bbox = [bbox[0].min(p[0]), bbox[1].max(p[0]), bbox[2].min(p[1]), bbox[3].max(p[1])];
                }
                let whole = model.graph.edges[b.edge].minima.len() == nmin;
                let mut w = Wall { poly, bbox, whole, level: b.level, value: b.value, start_inside: false };
                w.start_inside = w.inside(x0, h0);
                Ok(w)
            })
            .collect::<Result<_>>()?;
        let vals: Vec<Result<f64>> = ensemble(seed ^ pi as u64, "dirichlet-sde", paths, |_, rng| {
            let mut st = Stepper::new(&diff, dt, SdeScheme::Rk4Drift);
            let mut x = x0;
            for _ in 0..max_steps {
                st.sde_step(&mut x, rng);
                let hx = sys.field.value(x);
                for w in &walls {
                    if w.inside(x, hx) != w.start_inside {
                        return Ok(w.value);
                    }
                }
            }
            Err(Error::Timeout { t_max: cfg.t_max })
        });
        let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
        let s = Summary::of(&vals);
        out.push(DirichletProbe {
            x: x0,
            edge: e0,
            h: h0,
            graph: sol.eval(GraphState { edge: e0, h: h0 }),
            monte_carlo: s.mean,
            std_err: s.std_err(),
        });
    }
    Ok((out, model))
}

/// Graph-side hitting frequencies of the averaged process, for cross-checks.
pub fn graph_hitting_frequencies(
    spec: &GraphDiffusionSpec,
    start: GraphState,
    targets: &[GraphState],
    dt: f64,
    delta_v: f64,
    t_max: f64,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let hits: Vec<Result<Option<usize>>> = ensemble(seed, "graph-hits", paths, |_, rng: &mut RngStream| {
        Ok(first_passage(spec, start, targets, dt, t_max, delta_v, rng)?.map(|p| p.target))
    });
    let mut freq = vec![0.0; targets.len()];
    for h in hits {
        if let Some(k) = h? {
            freq[k] += 1.0 / paths as f64;
        }
    }
    Ok(freq)
}
