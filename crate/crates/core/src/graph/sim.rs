use serde::Serialize;

use super::{GraphDiffusionSpec, GraphState, NodeKind};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Sampled graph trajectory, one state per step.
#[derive(Debug, Clone, Serialize)]
pub struct GraphPath {
    pub dt: f64,
    pub states: Vec<GraphState>,
}

impl GraphPath {
    pub fn last(&self) -> GraphState {
        *self.states.last().expect("path has the initial state")
    }
}

/// Absorption at one of the target points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Passage {
    pub target: usize,
    pub time: f64,
}

fn check_step(spec: &GraphDiffusionSpec, dt: f64, delta_v: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let (b, a) = spec.coefficient_bounds();
    let need = b * dt + 3.0 * (a * dt).sqrt();
    if !(delta_v > need) {
        return Err(Error::invalid(format!(
            "vertex shell {delta_v} must exceed max drift dt + 3 sqrt(a_max dt) = {need}"
        )));
    }
    for e in &spec.edges {
        if 2.0 * delta_v >= e.len() {
            return Err(Error::invalid("vertex shell wider than half an edge"));
        }
    }
    Ok(())
}

struct Walker<'a> {
    spec: &'a GraphDiffusionSpec,
    dt: f64,
    sdt: f64,
    delta_v: f64,
    /// Per edge: ends whose shell holds a target, left untouched.
    open: Vec<[bool; 2]>,
}

impl Walker<'_> {
    /// Euler-Maruyama increment; returns the unclipped level.
    fn raw(&self, s: GraphState, rng: &mut RngStream) -> f64 {
        let (a, b) = self.spec.coefficients(s.edge, s.h);
        s.h + b * self.dt + (a.max(0.0)).sqrt() * self.sdt * rng.normal()
    }

    /// Vertex handling for a level that may have left the shell-free zone.
    fn settle(&self, edge: usize, h: f64, rng: &mut RngStream) -> GraphState {
        let e = &self.spec.edges[edge];
        let d = self.delta_v;
        let open = self.open.get(edge).copied().unwrap_or([false; 2]);
        let (v, z, below) = if h < e.z_lo + d && !open[0] {
            (e.lower, e.z_lo, true)
        } else if h > e.z_hi - d && !open[1] {
            (e.upper, e.z_hi, false)
        } else {
            return GraphState { edge, h };
        };
        match self.spec.nodes[v] {
            NodeKind::Interior => {
                let g = self.spec.gluing_at(v).expect("validated");
                let total: f64 = g.gamma.iter().sum();
                let mut u = rng.uniform() * total;
                let mut k = 0;
                while k + 1 < g.gamma.len() && u >= g.gamma[k] {
                    u -= g.gamma[k];
                    k += 1;
                }
                GraphState { edge: g.edges[k], h: z + g.sign[k] * d }
            }
            NodeKind::Exterior | NodeKind::Cap => {
                let wall = if below { z + d } else { z - d };
                let r = 2.0 * wall - h;
                let r = if below { r.clamp(wall, e.z_hi - d) } else { r.clamp(e.z_lo + d, wall) };
                GraphState { edge, h: r }
            }
        }
    }
}

/// Euler-Maruyama on the edges with instantaneous `gamma`-weighted
/// branching at interior vertices, entered at the `delta_v` shell, and
/// reflection at `delta_v` from terminal vertices. The branching moves the
/// path across the vertex, an `O(delta_v)` bias.
pub fn simulate(
    spec: &GraphDiffusionSpec,
    start: GraphState,
    dt: f64,
    t_end: f64,
    delta_v: f64,
    rng: &mut RngStream,
) -> Result<GraphPath> {
    check_step(spec, dt, delta_v)?;
    check_start(spec, start)?;
    let w = Walker { spec, dt, sdt: dt.sqrt(), delta_v, open: Vec::new() };
    let steps = (t_end / dt).round() as usize;
    let mut states = Vec::with_capacity(steps + 1);
    let mut s = w.settle(start.edge, start.h, rng);
    states.push(start);
    for _ in 0..steps {
        let h = w.raw(s, rng);
        s = w.settle(s.edge, h, rng);
        states.push(s);
    }
    Ok(GraphPath { dt, states })
}

/// Runs until the path crosses one of `targets`; `None` at `t_max`.
pub fn first_passage(
    spec: &GraphDiffusionSpec,
    start: GraphState,
    targets: &[GraphState],
    dt: f64,
    t_max: f64,
    delta_v: f64,
    rng: &mut RngStream,
) -> Result<Option<Passage>> {
    check_step(spec, dt, delta_v)?;
    check_start(spec, start)?;
    let open = spec
        .edges
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let near = |z: f64| targets.iter().any(|t| t.edge == k && (t.h - z).abs() <= delta_v);
            [near(e.z_lo), near(e.z_hi)]
        })
        .collect();
    let w = Walker { spec, dt, sdt: dt.sqrt(), delta_v, open };
    let hit = |s: GraphState, h: f64| {
        targets.iter().position(|t| t.edge == s.edge && (t.h - s.h) * (t.h - h) <= 0.0)
    };
    if let Some(k) = targets.iter().position(|t| t.edge == start.edge && t.h == start.h) {
        return Ok(Some(Passage { target: k, time: 0.0 }));
    }
    let steps = (t_max / dt).ceil() as usize;
    let mut s = start;
    for n in 0..steps {
        let h = w.raw(s, rng);
        if let Some(k) = hit(s, h) {
            return Ok(Some(Passage { target: k, time: (n + 1) as f64 * dt }));
        }
        s = w.settle(s.edge, h, rng);
    }
    Ok(None)
}

fn check_start(spec: &GraphDiffusionSpec, s: GraphState) -> Result<()> {
    let e = spec.edges.get(s.edge).ok_or_else(|| Error::invalid(format!("no edge {}", s.edge)))?;
    if !(s.h >= e.z_lo && s.h <= e.z_hi) {
        return Err(Error::invalid(format!("level {} outside edge {}", s.h, s.edge)));
    }
    Ok(())
}

/// Like [`simulate`] but keeps only the final state.
pub fn simulate_end(
    spec: &GraphDiffusionSpec,
    start: GraphState,
    dt: f64,
    t_end: f64,
    delta_v: f64,
    rng: &mut RngStream,
) -> Result<GraphState> {
    check_step(spec, dt, delta_v)?;
    check_start(spec, start)?;
    let w = Walker { spec, dt, sdt: dt.sqrt(), delta_v, open: Vec::new() };
    let steps = (t_end / dt).round() as usize;
    let mut s = w.settle(start.edge, start.h, rng);
    for _ in 0..steps {
        let h = w.raw(s, rng);
        s = w.settle(s.edge, h, rng);
    }
    Ok(s)
}
