//! One pipeline per experiment kind. Each reads its `params` block, writes
//! CSV/JSON artifacts into the output directory and returns named metrics.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fwlab_core::action::{minimize_action, ActionConfig, EndSet};
use fwlab_core::cycles::{
    build_hierarchy, metastable_profile, metastable_state, oracle_distribution, TransitionExponents,
};
use fwlab_core::dynamics::{
    first_exit_with, integrate_sde_with, DiffusionSpec, Domain, Interval, Polygon, SdeScheme,
};
use fwlab_core::front::{front_evolution, pde_solve_1d, DpOptions, FrontGrid, ReactionSpec, Support};
use fwlab_core::graph::{
    compare_dirichlet, compare_marginals, solve_dirichlet, AveragingConfig, BoundaryPoint,
    GraphDiffusionSpec, GraphState, LevelBoundary, PlanarSystem,
};
use fwlab_core::markov::{
    arrows, build_markov_hierarchy, chain_oracle, decompose, invariant_measure_direct,
    invariant_measure_tree, RateFamily, MAX_TREE_STATES,
};
use fwlab_core::mc::{ensemble, Summary};
use fwlab_core::phantom::{analyse, branches, schedule_for, simulate_verify, write_verify_csv, SlowFastSpec, VerifyOptions};
use fwlab_core::reeb::{build_reeb_graph, project_y, ReebModel, ScalarField2D};
use fwlab_core::Field;
use serde::Deserialize;

use crate::config::{from_value, ExperimentConfig, Fields, Kind};
use crate::report::Check;

pub struct Ctx<'a> {
    pub seed: u64,
    pub out: &'a Path,
    pub fields: &'a Fields,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl Outcome {
    fn metric(&mut self, name: impl Into<String>, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    /// Registers an artifact and returns its path.
    fn artifact(&mut self, ctx: &Ctx, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        ctx.out.join(name)
    }
}

pub fn dispatch(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<Outcome> {
    let mut o = Outcome::default();
    let p = &cfg.params;
    match cfg.kind {
        Kind::Simulate => simulate(&from_value(p, "params")?, ctx, &mut o),
        Kind::Exit => exit(&from_value(p, "params")?, ctx, &mut o),
        Kind::Quasipotential => quasipotential(&from_value(p, "params")?, ctx, &mut o),
        Kind::Hierarchy => hierarchy(&from_value(p, "params")?, ctx, &mut o),
        Kind::Markov => markov(&from_value(p, "params")?, ctx, &mut o),
        Kind::Reeb => reeb(&from_value(p, "params")?, ctx, &mut o),
        Kind::GraphSolve => graph_solve(&from_value(p, "params")?, ctx, &mut o),
        Kind::Front => front(&from_value(p, "params")?, ctx, &mut o),
        Kind::Phantom => phantom(&from_value(p, "params")?, ctx, &mut o),
        Kind::Verify => verify(&from_value(p, "params")?, ctx, &mut o),
    }
    .with_context(|| format!("{} pipeline", cfg.kind.name()))?;
    Ok(o)
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Scheme {
    #[default]
    EulerMaruyama,
    Rk4Drift,
}

impl From<Scheme> for SdeScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::EulerMaruyama => SdeScheme::EulerMaruyama,
            Scheme::Rk4Drift => SdeScheme::Rk4Drift,
        }
    }
}

fn diffusion(
    ctx: &Ctx,
    drift: &str,
    beta: &Option<String>,
    sigma: &Option<String>,
    eps: f64,
    dim: usize,
) -> Result<DiffusionSpec> {
    let b = ctx.fields.get("params.drift", drift, dim, dim)?;
    let beta = ctx.fields.get_or("params.beta", beta, dim, dim, || Field::zero(dim, dim))?;
    let sigma = ctx.fields.get_or("params.sigma", sigma, dim, dim * dim, || Field::identity_matrix(dim))?;
    Ok(DiffusionSpec::new(b)?.with_perturbation(beta)?.with_sigma(sigma)?.with_eps(eps)?)
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateParams {
    drift: String,
    beta: Option<String>,
    sigma: Option<String>,
    #[serde(default)]
    eps: f64,
    x0: Vec<f64>,
    dt: f64,
    t_end: f64,
    #[serde(default = "one")]
    paths: usize,
    #[serde(default)]
    scheme: Scheme,
}

fn simulate(p: &SimulateParams, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    let spec = diffusion(ctx, &p.drift, &p.beta, &p.sigma, p.eps, p.x0.len())?;
    if p.paths == 0 {
        bail!("params.paths: need at least one path");
    }
    let runs = ensemble(ctx.seed, "simulate:path", p.paths, |k, rng| {
        integrate_sde_with(&spec, &p.x0, p.dt, p.t_end, rng, p.scheme.into())
            .map(|tr| (if k == 0 { Some(tr.clone()) } else { None }, tr.last().to_vec()))
    });
    let mut first = None;
    let mut ends = Vec::with_capacity(p.paths);
    for (k, r) in runs.into_iter().enumerate() {
        let (tr, end) = r.with_context(|| format!("path {k}"))?;
        if tr.is_some() {
            first = tr;
        }
        ends.push(end);
    }
    let tr = first.expect("path 0 is kept");
    tr.write_csv(File::create(o.artifact(ctx, "trajectory.csv"))?)?;
    let mut w = csv::Writer::from_path(o.artifact(ctx, "terminal.csv"))?;
    let mut head = vec!["path".to_string()];
    head.extend((0..spec.dim).map(|i| format!("x{i}")));
    w.write_record(&head)?;
    for (k, e) in ends.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(e.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    for i in 0..spec.dim {
        let s = Summary::of(&ends.iter().map(|e| e[i]).collect::<Vec<_>>());
        o.metric(format!("mean_x{i}"), s.mean);
        o.metric(format!("var_x{i}"), if s.n > 1 { s.var } else { 0.0 });
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
enum DomainSpec {
    Interval {
        lo: f64,
        hi: f64,
        #[serde(default)]
        coord: usize,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
}

impl DomainSpec {
    fn build(&self) -> Result<Box<dyn Domain>> {
        Ok(match self {
            DomainSpec::Interval { lo, hi, coord } => Box::new(Interval::new(*lo, *hi).on_coord(*coord)),
            DomainSpec::Polygon { vertices } => Box::new(Polygon::new(vertices.clone())?),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExitParams {
    drift: String,
    beta: Option<String>,
    sigma: Option<String>,
    eps: Vec<f64>,
    x0: Vec<f64>,
    domain: DomainSpec,
    dt: f64,
    t_max: f64,
    paths: usize,
    #[serde(default)]
    scheme: Scheme,
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>()
}

fn exit(p: &ExitParams, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    let domain = p.domain.build()?;
    let mut w = csv::Writer::from_path(o.artifact(ctx, "exit_times.csv"))?;
    let mut head = vec!["eps".to_string(), "path".into(), "tau".into()];
    head.extend((0..p.x0.len()).map(|i| format!("exit_x{i}")));
    w.write_record(&head)?;
    let (mut inv, mut logm) = (Vec::new(), Vec::new());
    for (i, &eps) in p.eps.iter().enumerate() {
        let spec = diffusion(ctx, &p.drift, &p.beta, &p.sigma, eps, p.x0.len())?;
        let ev = ensemble(ctx.seed, &format!("exit:eps{i}"), p.paths, |_, rng| {
            first_exit_with(&spec, &p.x0, domain.as_ref(), p.dt, p.t_max, rng, p.scheme.into())
        });
        let mut taus = Vec::with_capacity(p.paths);
        for (k, e) in ev.into_iter().enumerate() {
            let e = e.with_context(|| format!("eps = {eps}, path {k}"))?;
            let mut row = vec![eps.to_string(), k.to_string(), e.tau.to_string()];
            row.extend(e.point.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
            taus.push(e.tau);
        }
        let s = Summary::of(&taus);
        o.metric(format!("mean_tau_{i}"), s.mean);
        o.metric(format!("std_err_tau_{i}"), s.std_err());
        inv.push(1.0 / eps);
        logm.push(s.mean.ln());
    }
    w.flush()?;
    if inv.len() >= 2 {
        o.metric("slope", slope(&inv, &logm));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
enum EndSetSpec {
    Point { x: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl EndSetSpec {
    fn build(&self) -> Result<EndSet> {
        Ok(match self {
            EndSetSpec::Point { x } => EndSet::Point(x.clone()),
            EndSetSpec::Ball { center, radius } => EndSet::Ball { center: center.clone(), radius: *radius },
            EndSetSpec::Polygon { vertices } => EndSet::PolygonBoundary(Polygon::new(vertices.clone())?),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuasipotentialParams {
    drift: String,
    beta: Option<String>,
    sigma: Option<String>,
    from: EndSetSpec,
    to: EndSetSpec,
    #[serde(default)]
    action: ActionConfig,
}

fn quasipotential(p: &QuasipotentialParams, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    let from = p.from.build()?;
    let spec = diffusion(ctx, &p.drift, &p.beta, &p.sigma, 0.0, from.center().len())?;
    let r = minimize_action(&spec, &from, &p.to.build()?, &p.action)?;
    if let Some(path) = &r.path {
        path.write_csv(File::create(o.artifact(ctx, "path.csv"))?)?;
    }
    std::fs::write(o.artifact(ctx, "result.json"), serde_json::to_string_pretty(&r)? + "\n")?;
    o.metric("value", r.value);
    o.metric("t_star", r.t_star);
    o.metric("grad_norm", r.grad_norm);
    o.metric("converged", f64::from(u8::from(r.converged)));
    o.metric("degenerate", f64::from(u8::from(r.degenerate)));
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Query {
    start: usize,
    lambda: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HierarchyParams {
    v: Vec<Vec<f64>>,
    #[serde(default)]
    queries: Vec<Query>,
    oracle_eps: Option<f64>,
}

fn hierarchy(p: &HierarchyParams, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    let v = TransitionExponents::new(p.v.clone())?;
    let h = build_hierarchy(&v)?;
    std::fs::write(o.artifact(ctx, "hierarchy.json"), h.to_json()? + "\n")?;
    let mut w = csv::Writer::from_path(o.artifact(ctx, "profiles.csv"))?;
    w.write_record(["start", "lambda_from", "lambda_to", "state"])?;
    for leaf in 0..v.len() {
        let pr = metastable_profile(&h, leaf)?;
        for (k, s) in pr.states.iter().enumerate() {
            let lo = if k == 0 { 0.0 } else { pr.thresholds[k - 1] };
            let hi = pr.thresholds.get(k).copied().unwrap_or(f64::INFINITY);
            w.serialize((leaf, lo, hi, s))?;
        }
    }
    w.flush()?;
    o.metric("nodes", h.len() as f64);
    o.metric("min_gap", h.min_gap);
    for (k, q) in p.queries.iter().enumerate() {
        let s = metastable_state(&h, q.start, q.lambda)?;
        o.metric(format!("state_{k}"), s as f64);
        if let Some(eps) = p.oracle_eps {
            o.metric(format!("oracle_mass_{k}"), oracle_distribution(&v, q.start, q.lambda, eps)?[s]);
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkovParams {
    k: Vec<Vec<f64>>,
    c: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    measure_eps: Vec<f64>,
    #[serde(default)]
    queries: Vec<Query>,
    oracle_eps: Option<f64>,
}

fn markov(p: &MarkovParams, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    let n = p.k.len();
    let r = RateFamily::new(p.c.clone().unwrap_or_else(|| vec![vec![1.0; n]; n]), p.k.clone())?;
    let dec = decompose(&arrows(&r))?;
    let h = build_markov_hierarchy(&r)?;
    std::fs::write(o.artifact(ctx, "markov.json"), h.to_json()? + "\n")?;
    o.metric("classes", dec.classes.len() as f64);
    o.metric("transient", dec.transient.len() as f64);
    o.metric("ranks", h.chains.len() as f64);
    if !p.measure_eps.is_empty() {
        let mut w = csv::Writer::from_path(o.artifact(ctx, "measures.csv"))?;
        w.write_record(["class", "state", "eps", "tree", "direct"])?;
        let mut worst = 0.0f64;
        for (ci, class) in dec.classes.iter().enumerate().filter(|(_, c)| c.len() <= MAX_TREE_STATES) {
            for &eps in &p.measure_eps {
                let t = invariant_measure_tree(&r, class, Some(eps))?;
                let d = invariant_measure_direct(&r, class, eps)?;
                for (k, s) in class.iter().enumerate() {
                    worst = worst.max((t.nu[k] - d[k]).abs());
                    w.serialize((ci, s, eps, t.nu[k], d[k]))?;
                }
            }
        }
        w.flush()?;
        o.metric("max_tree_direct_diff", worst);
    }
    for (k, q) in p.queries.iter().enumerate() {
        let s = fwlab_core::markov::metastable_state(&h, q.start, q.lambda)?;
        o.metric(format!("state_{k}"), s as f64);
        if let Some(eps) = p.oracle_eps {
            o.metric(format!("oracle_mass_{k}"), chain_oracle(&r, q.start, q.lambda, eps)?[s]);
        }
    }
    Ok(())
}

fn default_table_points() -> usize {
    48
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReebParams {
    hamiltonian: String,
    bbox: [f64; 4],
    n: usize,
    /// Diffusion matrix `a = sigma sigma^T`, row-major.
    a: Option<String>,
    beta: Option<String>,
    #[serde(default = "default_table_points")]
    table_points: usize,
    cap: Option<f64>,
}

fn write_model(model: &ReebModel, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    std::fs::write(o.artifact(ctx, "reeb.json"), model.to_json()? + "\n")?;
    for c in &model.coefficients {
        c.write_csv(&o.artifact(ctx, &format!("coefficients_edge{}.csv", c.edge)))?;
    }
    o.metric("vertices", model.graph.vertices.len() as f64);
    o.metric("edges", model.graph.edges.len() as f64);
    o.metric("gluing_defect", fwlab_core::graph::gluing_defect(model));
    Ok(())
}

fn reeb(p: &ReebParams, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    let h = ctx.fields.get("params.hamiltonian", &p.hamiltonian, 2, 1)?;
    let a = ctx.fields.get_or("params.a", &p.a, 2, 4, || Field::identity_matrix(2))?;
    let beta = p.beta.as_ref().map(|b| ctx.fields.get("params.beta", b, 2, 2)).transpose()?;
    let field = ScalarField2D::new(h, p.bbox, p.n, p.n)?;
    let graph = build_reeb_graph(&field)?;
    let model = ReebModel::build(&field, graph, &a, beta.as_ref(), p.table_points, p.cap)?;
    write_model(&model, ctx, o)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirichletParams {
    boundary: Vec<LevelBoundary>,
    #[serde(default)]
    probes: Vec<[f64; 2]>,
    /// Monte Carlo paths per probe; zero evaluates the graph side only.
    #[serde(default)]
    paths: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarginalParams {
    x0: [f64; 2],
    t: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSolveParams {
    hamiltonian: String,
    bbox: [f64; 4],
    n: usize,
    beta: Option<String>,
    sigma: Option<String>,
    #[serde(default)]
    averaging: AveragingConfig,
    dirichlet: Option<DirichletParams>,
    marginal: Option<MarginalParams>,
}

fn graph_solve(p: &GraphSolveParams, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    let h = ctx.fields.get("params.hamiltonian", &p.hamiltonian, 2, 1)?;
    let sys = PlanarSystem {
        field: ScalarField2D::new(h, p.bbox, p.n, p.n)?,
        beta: ctx.fields.get_or("params.beta", &p.beta, 2, 2, || Field::zero(2, 2))?,
        sigma: ctx.fields.get_or("params.sigma", &p.sigma, 2, 4, || Field::identity_matrix(2))?,
    };
    let cfg = &p.averaging;
    let model = sys.model(cfg)?;
    write_model(&model, ctx, o)?;
    if let Some(d) = &p.dirichlet {
        let graph = GraphDiffusionSpec::from_model(&model)?;
        let bc: Vec<BoundaryPoint> =
            d.boundary.iter().map(|b| BoundaryPoint { edge: b.edge, h: b.level, value: b.value }).collect();
        let sol = solve_dirichlet(&graph, &bc, cfg.mesh)?;
        sol.write_csv_dir(ctx.out, "dirichlet")?;
        o.artifacts.extend(sol.edges.iter().map(|e| format!("dirichlet_edge{}.csv", e.edge)));
        let (lo, hi) = sol.min_max();
        o.metric("dirichlet_min", lo);
        o.metric("dirichlet_max", hi);
        o.metric("gluing_residual", sol.gluing_residual(&graph));
        if !d.probes.is_empty() {
            let mut w = csv::Writer::from_path(o.artifact(ctx, "probes.csv"))?;
            w.write_record(["x0", "x1", "edge", "h", "graph", "monte_carlo", "std_err"])?;
            if d.paths > 0 {
                let (res, _) = compare_dirichlet(&sys, &d.boundary, &d.probes, d.paths, cfg, ctx.seed)?;
                let mut worst = 0.0f64;
                for r in &res {
                    worst = worst.max((r.graph - r.monte_carlo).abs());
                    w.serialize((r.x[0], r.x[1], r.edge, r.h, r.graph, r.monte_carlo, r.std_err))?;
                }
                o.metric("dirichlet_max_abs_diff", worst);
            } else {
                for x in &d.probes {
                    let (h, e) = project_y(&sys.field, &model.graph, *x)?;
                    let g = sol.eval(GraphState { edge: e, h });
                    w.serialize((x[0], x[1], e, h, g, f64::NAN, f64::NAN))?;
                }
            }
            w.flush()?;
        }
    }
    if let Some(m) = &p.marginal {
        let (cmp, _) = compare_marginals(&sys, m.x0, m.t, cfg, ctx.seed)?;
        let mut w = csv::Writer::from_path(o.artifact(ctx, "marginals.csv"))?;
        w.write_record(["path", "sde_h", "graph_h"])?;
        for k in 0..cmp.sde_h.len() {
            w.serialize((k, cmp.sde_h[k], cmp.graph_h[k]))?;
        }
        w.flush()?;
        o.metric("w1", cmp.w1);
        o.metric("sde_mean_h", cmp.sde_mean_h);
        o.metric("graph_mean_h", cmp.graph_mean_h);
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    x: [f64; 2],
    y: Option<[f64; 2]>,
    hx: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PdeParams {
    eps: f64,
    times: Vec<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrontParams {
    /// Rate `c(x, u)` over `(x, u)` or `(x, y, u)`.
    rate: String,
    a: f64,
    grid: GridSpec,
    support: Support,
    t_end: f64,
    #[serde(default)]
    dp: DpOptions,
    pde: Option<PdeParams>,
}

fn front(p: &FrontParams, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    let grid = match p.grid.y {
        Some(y) => FrontGrid::rect(p.grid.x, y, p.grid.hx)?,
        None => FrontGrid::line(p.grid.x[0], p.grid.x[1], p.grid.hx)?,
    };
    let d = grid.dim();
    let rate = ctx.fields.get("params.rate", &p.rate, d + 1, 1)?;
    let spec = ReactionSpec::new(grid, rate, p.a, p.support.clone())?;
    spec.check_fkpp(&[0.0, 0.25, 0.5, 0.75, 0.99, 1.25])?;
    let ff = front_evolution(&spec, p.t_end, &p.dp)?;
    ff.write_positions_csv(&o.artifact(ctx, "front.csv"))?;
    let last = ff.front.len() - 1;
    grid.write_csv(&o.artifact(ctx, "v0_final.csv"), &ff.v0[last])?;
    let mask: Vec<f64> = ff.front[last].iter().map(|&m| f64::from(u8::from(m))).collect();
    grid.write_csv(&o.artifact(ctx, "front_final.csv"), &mask)?;
    let nested = ff.front.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| !a || *b));
    o.metric("front_nested", f64::from(u8::from(nested)));
    if d == 1 {
        o.metric("final_position", grid.front_position(&ff.front[last]).unwrap_or(f64::NAN));
    } else {
        o.metric("final_radius", grid.area_radius(&ff.front[last]));
    }
    if let Some(pde) = &p.pde {
        let sol = pde_solve_1d(&spec, pde.eps, &pde.times, pde.dt)?;
        sol.write_csv(&o.artifact(ctx, "pde.csv"))?;
        for (k, x) in sol.interfaces().iter().enumerate() {
            o.metric(format!("pde_interface_{k}"), x.unwrap_or(f64::NAN));
        }
        o.metric("pde_clips", sol.clips as f64);
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct YGrid {
    lo: f64,
    hi: f64,
    count: usize,
}

fn default_margin() -> f64 {
    2.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhantomParams {
    /// Fast drift `f(x, y)`.
    f: String,
    sigma: Option<String>,
    y_grid: YGrid,
    x_range: [f64; 2],
    /// Noise levels `delta`; each gets `eps` from the admissibility margin.
    #[serde(default)]
    deltas: Vec<f64>,
    #[serde(default = "default_margin")]
    margin: f64,
    verify: Option<VerifyOptions>,
}

fn phantom(p: &PhantomParams, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    let f = ctx.fields.get("params.f", &p.f, 2, 1)?;
    let sigma = ctx.fields.get_or("params.sigma", &p.sigma, 2, 1, || Field::constant(2, vec![1.0]))?;
    let g = &p.y_grid;
    if g.count < 2 || !(g.hi > g.lo) {
        bail!("params.y_grid: need count >= 2 and hi > lo");
    }
    let ys: Vec<f64> = (0..g.count).map(|i| g.lo + (g.hi - g.lo) * i as f64 / (g.count - 1) as f64).collect();
    let mut spec = SlowFastSpec::new(f, sigma, ys, p.x_range)?;
    if !p.deltas.is_empty() {
        let lambda = analyse(&spec)?.lambda;
        spec = spec.with_schedule(schedule_for(lambda, &p.deltas, p.margin));
    }
    let res = analyse(&spec)?;
    let b = branches(&spec)?;
    let mut w = csv::Writer::from_path(o.artifact(ctx, "branches.csv"))?;
    w.write_record(["y", "x_minus", "x_zero", "x_plus"])?;
    for k in 0..b.y.len() {
        w.serialize((b.y[k], b.minus[k], b.zero[k], b.plus[k]))?;
    }
    w.flush()?;
    res.depths.write_csv(&o.artifact(ctx, "depths.csv"))?;
    std::fs::write(o.artifact(ctx, "phantom.json"), res.to_json()? + "\n")?;
    o.metric("y_star", res.y_star);
    o.metric("lambda", res.lambda);
    o.metric("p_minus", res.weights.p_minus);
    o.metric("p_plus", res.weights.p_plus);
    if let (Some(opts), false) = (&p.verify, spec.schedule.is_empty()) {
        let pts = simulate_verify(&spec, &res, opts, ctx.seed)?;
        write_verify_csv(&pts, &o.artifact(ctx, "verify.csv"))?;
        let fine = pts.last().expect("schedule is nonempty");
        o.metric("mass_minus", fine.mass_minus);
        o.metric("mass_plus", fine.mass_plus);
        o.metric("y_mean", fine.y_mean);
        o.metric("tv", fine.tv);
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyParams {
    filter: Option<String>,
}

fn verify(p: &VerifyParams, ctx: &Ctx, o: &mut Outcome) -> Result<()> {
    for r in crate::verify::run_suite(ctx.seed, p.filter.as_deref(), |_| {})? {
        o.checks.extend(r.checks);
    }
    Ok(())
}
