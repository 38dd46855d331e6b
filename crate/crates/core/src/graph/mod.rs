//! Diffusions on metric graphs with gluing conditions at interior vertices.

mod compare;
mod sim;
mod solve;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reeb::{EdgeCoefficients, GluingEntry, ReebModel, VertexKind};

pub use compare::{
    compare_dirichlet, compare_marginals, gluing_defect, graph_hitting_frequencies, AveragingComparison,
    AveragingConfig, DirichletProbe, LevelBoundary, PlanarSystem,
};
pub use sim::{first_passage, simulate, simulate_end, GraphPath, Passage};
pub use solve::{
    hitting_probabilities, solve_dirichlet, solve_neumann_channel, BoundaryPoint, ChannelData, EdgeSolution,
    GraphSolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    /// Gluing vertex (a saddle).
    Interior,
    /// Terminal vertex (a minimum); zero flux.
    Exterior,
    /// Truncation of an unbounded edge; reflecting.
    Cap,
}

/// Edge parametrized by `h` in `[z_lo, z_hi]`, from vertex `lower` to `upper`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphEdge {
    pub lower: usize,
    pub upper: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub coeffs: EdgeCoefficients,
}

impl GraphEdge {
    /// Constant `a_bar` and drift.
    pub fn constant(lower: usize, upper: usize, z_lo: f64, z_hi: f64, a_bar: f64, drift: f64) -> Self {
        GraphEdge {
            lower,
            upper,
            z_lo,
            z_hi,
            coeffs: EdgeCoefficients {
                edge: 0,
                z: vec![z_lo, z_hi],
                period: vec![1.0; 2],
                a_bar: vec![a_bar; 2],
                beta_bar: vec![drift; 2],
                drift_correction: vec![0.0; 2],
            },
        }
    }

    pub fn len(&self) -> f64 {
        self.z_hi - self.z_lo
    }
}

/// Graph, edge generators `(1/2) a_bar u'' + drift u'` and gluing data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDiffusionSpec {
    pub nodes: Vec<NodeKind>,
    pub edges: Vec<GraphEdge>,
    pub gluing: Vec<GluingEntry>,
}

/// A point of the graph: edge id and level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphState {
    pub edge: usize,
    pub h: f64,
}

impl GraphDiffusionSpec {
    pub fn new(nodes: Vec<NodeKind>, edges: Vec<GraphEdge>, gluing: Vec<GluingEntry>) -> Result<Self> {
        let s = GraphDiffusionSpec { nodes, edges, gluing };
        s.validate()?;
        Ok(s)
    }

    /// The averaged process of a Reeb model; the unbounded edge ends at the cap.
    pub fn from_model(m: &ReebModel) -> Result<Self> {
        let nodes = m
            .graph
            .vertices
            .iter()
            .map(|v| match v.kind {
                VertexKind::Minimum => NodeKind::Exterior,
                VertexKind::Saddle => NodeKind::Interior,
                VertexKind::OpenEnd => NodeKind::Cap,
            })
            .collect();
        let edges = m
            .graph
            .edges
            .iter()
            .map(|e| GraphEdge {
                lower: e.lower,
                upper: e.upper,
                z_lo: e.z_lo,
                z_hi: if e.unbounded { m.cap } else { e.z_hi },
                coeffs: m.coefficients[e.id].clone(),
            })
            .collect();
        GraphDiffusionSpec::new(nodes, edges, m.gluing.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.nodes.len();
        let mut level = vec![f64::NAN; nv];
        let mut degree = vec![0usize; nv];
        for (k, e) in self.edges.iter().enumerate() {
            if e.lower >= nv || e.upper >= nv || e.lower == e.upper {
                return Err(Error::invalid(format!("edge {k} has bad endpoints")));
            }
            if !(e.z_hi > e.z_lo) {
                return Err(Error::invalid(format!("edge {k} has empty range")));
            }
            if e.coeffs.z.is_empty() {
                return Err(Error::invalid(format!("edge {k} has no coefficient table")));
            }
            for (v, z) in [(e.lower, e.z_lo), (e.upper, e.z_hi)] {
                degree[v] += 1;
                if level[v].is_nan() {
                    level[v] = z;
                } else if (level[v] - z).abs() > 1e-9 * (1.0 + z.abs()) {
                    return Err(Error::invalid(format!("vertex {v} has inconsistent levels")));
                }
            }
        }
        for (v, kind) in self.nodes.iter().enumerate() {
            if *kind == NodeKind::Interior {
                let g = self
                    .gluing_at(v)
                    .ok_or_else(|| Error::invalid(format!("interior vertex {v} has no gluing data")))?;
                if g.edges.len() != degree[v] || g.gamma.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::invalid(format!("gluing at vertex {v} must give gamma > 0 per edge")));
                }
                for (&e, &s) in g.edges.iter().zip(&g.sign) {
                    let ed = self.edges.get(e).ok_or_else(|| Error::invalid("gluing names a missing edge"))?;
                    let expect = if ed.lower == v { 1.0 } else { -1.0 };
                    if (ed.lower != v && ed.upper != v) || s != expect {
                        return Err(Error::invalid(format!("gluing at vertex {v} disagrees with edge {e}")));
                    }
                }
            } else if degree[v] != 1 {
                return Err(Error::invalid(format!("terminal vertex {v} must have one edge")));
            }
        }
        Ok(())
    }

    pub fn gluing_at(&self, v: usize) -> Option<&GluingEntry> {
        self.gluing.iter().find(|g| g.vertex == v)
    }

    pub fn vertex_level(&self, v: usize) -> f64 {
        for e in &self.edges {
            if e.lower == v {
                return e.z_lo;
            }
            if e.upper == v {
                return e.z_hi;
            }
        }
        f64::NAN
    }

    /// `(a_bar, drift)` on `edge` at level `h`.
    pub fn coefficients(&self, edge: usize, h: f64) -> (f64, f64) {
        let s = self.edges[edge].coeffs.at(h);
        (s.a_bar, s.drift())
    }

    /// Largest `|drift|` and `a_bar` over every table.
    pub fn coefficient_bounds(&self) -> (f64, f64) {
        let (mut b, mut a) = (0.0f64, 0.0f64);
        for (id, e) in self.edges.iter().enumerate() {
            for k in [e.z_lo, e.z_hi] {
                let (ak, bk) = self.coefficients(id, k);
                a = a.max(ak);
                b = b.max(bk.abs());
            }
            let c = &e.coeffs;
            for i in 0..c.z.len() {
                a = a.max(c.a_bar[i]);
                b = b.max((c.beta_bar[i] + c.drift_correction[i]).abs());
            }
        }
        (b, a)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
