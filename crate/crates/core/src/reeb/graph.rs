use serde::{Deserialize, Serialize};

use super::field2d::{refine_critical, ScalarField2D};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexKind {
    Minimum,
    Saddle,
    OpenEnd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReebVertex {
    pub id: usize,
    pub kind: VertexKind,
    /// `None` for the open end.
    pub position: Option<[f64; 2]>,
    pub value: f64,
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReebEdge {
    pub id: usize,
    pub lower: usize,
    pub upper: usize,
    pub z_lo: f64,
    /// For the unbounded edge: the level where contours start touching the box.
    pub z_hi: f64,
    pub unbounded: bool,
    /// Minimum vertices enclosed by every contour of this edge.
    pub minima: Vec<usize>,
}

/// Tree of level-set components of a planar `H` with `H -> inf`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReebGraph {
    pub vertices: Vec<ReebVertex>,
    pub edges: Vec<ReebEdge>,
    pub boundary_min: f64,
}

/// Options for the sublevel sweep.
#[derive(Debug, Clone, Copy)]
pub struct ReebOptions {
    /// Branches with persistence below `persistence * (boundary_min - min H)`
    /// are treated as discretization noise.
    pub persistence: f64,
    /// Smallest accepted `|det Hess H|` at a critical point.
    pub det_floor: f64,
}

impl Default for ReebOptions {
    fn default() -> Self {
        ReebOptions { persistence: 1e-4, det_floor: 1e-8 }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

struct JoinNode {
    grid: usize,
    saddle: bool,
    children: Vec<usize>,
}

pub fn build_reeb_graph(field: &ScalarField2D) -> Result<ReebGraph> {
    build_reeb_graph_with(field, ReebOptions::default())
}

pub fn build_reeb_graph_with(field: &ScalarField2D, opts: ReebOptions) -> Result<ReebGraph> {
    let n = field.values.len();
    let vals = &field.values;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let boundary_min = field.boundary_min();
    let global_min = vals[order[0]];
    let tau = opts.persistence * (boundary_min - global_min).max(1e-300);

    let mut uf = UnionFind { parent: (0..n).collect() };
    let mut done = vec![false; n];
    // Per component root: current join-tree node and lowest value.
    let mut comp_node = vec![usize::MAX; n];
    let mut comp_min = vec![f64::INFINITY; n];
    let mut nodes: Vec<JoinNode> = Vec::new();
    let mut nb = Vec::with_capacity(6);
    let mut roots: Vec<usize> = Vec::with_capacity(6);
    let mut live = 0usize;

    for &v in &order {
        if vals[v] >= boundary_min {
            break;
        }
        field.neighbours(v, &mut nb);
        roots.clear();
        for &w in &nb {
            if done[w] {
                let r = uf.find(w);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        done[v] = true;
        if nb.iter().all(|&w| done[w]) && !field.is_boundary(v) {
            check_not_maximum(field, v, opts)?;
        }
        match roots.len() {
            0 => {
                comp_node[v] = nodes.len();
                comp_min[v] = vals[v];
                live += 1;
                nodes.push(JoinNode { grid: v, saddle: false, children: Vec::new() });
            }
            1 => {
                uf.parent[v] = roots[0];
            }
            _ => {
                let significant: Vec<usize> =
                    roots.iter().copied().filter(|&r| vals[v] - comp_min[r] > tau).collect();
                let lowest = *roots.iter().min_by(|&&a, &&b| comp_min[a].total_cmp(&comp_min[b])).unwrap();
                let node = match significant.len() {
                    0 => comp_node[lowest],
                    1 => comp_node[significant[0]],
                    2 => {
                        nodes.push(JoinNode {
                            grid: v,
                            saddle: true,
                            children: significant.iter().map(|&r| comp_node[r]).collect(),
                        });
                        nodes.len() - 1
                    }
                    k => {
                        return Err(Error::Degenerate(format!(
                            "{k} sublevel components merge at {:?}",
                            field.point(v)
                        )))
                    }
                };
                let m = comp_min[lowest];
                live -= roots.len() - 1;
                for &r in &roots {
                    uf.parent[r] = v;
                }
                comp_node[v] = node;
                comp_min[v] = m;
            }
        }
    }
    if live > 1 {
        return Err(Error::invalid("sublevel components still separate at the box boundary level"));
    }
    if nodes.is_empty() {
        return Err(Error::invalid("no interior minimum below the boundary level"));
    }
    let top = comp_node[uf.find(order[0])];
    assemble(field, &nodes, top, boundary_min, tau, opts)
}

fn check_not_maximum(field: &ScalarField2D, v: usize, opts: ReebOptions) -> Result<()> {
    if let Some(x) = refine_critical(field, field.point(v)) {
        let h = field.hessian(x);
        let det = h[0] * h[3] - h[1] * h[2];
        if det > opts.det_floor && h[0] + h[3] < 0.0 {
            return Err(Error::NotGeneric(format!("interior maximum near {x:?}")));
        }
    }
    Ok(())
}

fn assemble(
    field: &ScalarField2D,
    nodes: &[JoinNode],
    top: usize,
    boundary_min: f64,
    tau: f64,
    opts: ReebOptions,
) -> Result<ReebGraph> {
    // Reachable nodes in creation order (sorted by value).
    let mut keep = vec![false; nodes.len()];
    let mut stack = vec![top];
    while let Some(k) = stack.pop() {
        keep[k] = true;
        stack.extend(nodes[k].children.iter().copied());
    }
    let mut vid = vec![usize::MAX; nodes.len()];
    let mut vertices = Vec::new();
    for (k, node) in nodes.iter().enumerate() {
        if !keep[k] {
            continue;
        }
        let guess = field.point(node.grid);
        let x = refine_critical(field, guess).ok_or_else(|| {
            Error::Degenerate(format!("critical point near {guess:?} did not refine"))
        })?;
        let h = field.hessian(x);
        let det = h[0] * h[3] - h[1] * h[2];
        if det.abs() < opts.det_floor {
            return Err(Error::Degenerate(format!("Hessian determinant {det:e} at {x:?}")));
        }
        let kind = if node.saddle { VertexKind::Saddle } else { VertexKind::Minimum };
        if (kind == VertexKind::Saddle) != (det < 0.0) {
            return Err(Error::Degenerate(format!("critical point type mismatch at {x:?}")));
        }
        let value = field.value(x);
        if value >= boundary_min {
            return Err(Error::invalid("critical value above the box boundary minimum"));
        }
        vid[k] = vertices.len();
        vertices.push(ReebVertex { id: vertices.len(), kind, position: Some(x), value, edges: Vec::new() });
    }
    let mut saddle_vals: Vec<f64> =
        vertices.iter().filter(|v| v.kind == VertexKind::Saddle).map(|v| v.value).collect();
    saddle_vals.sort_by(f64::total_cmp);
    if saddle_vals.windows(2).any(|w| w[1] - w[0] < tau) {
        return Err(Error::NotGeneric("two saddles share a critical value".into()));
    }

    let open = vertices.len();
    vertices.push(ReebVertex {
        id: open,
        kind: VertexKind::OpenEnd,
        position: None,
        value: boundary_min,
        edges: Vec::new(),
    });

    let mut edges = Vec::new();
    let mut below: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (k, node) in nodes.iter().enumerate() {
        if !keep[k] {
            continue;
        }
        let mut kids = node.children.clone();
        // deterministic order: left to right, then bottom to top
        kids.sort_by(|&a, &b| {
            let (pa, pb) = (vertices[vid[a]].position.unwrap(), vertices[vid[b]].position.unwrap());
            pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
        });
        let mut mins = Vec::new();
        if kids.is_empty() {
            mins.push(vid[k]);
        }
        for c in kids {
            let id = edges.len();
            edges.push(ReebEdge {
                id,
                lower: vid[c],
                upper: vid[k],
                z_lo: vertices[vid[c]].value,
                z_hi: vertices[vid[k]].value,
                unbounded: false,
                minima: below[c].clone(),
            });
            mins.extend(below[c].iter().copied());
        }
        mins.sort_unstable();
        below[k] = mins;
    }
    edges.push(ReebEdge {
        id: edges.len(),
        lower: vid[top],
        upper: open,
        z_lo: vertices[vid[top]].value,
        z_hi: boundary_min,
        unbounded: true,
        minima: below[top].clone(),
    });
    for e in &edges {
        vertices[e.lower].edges.push(e.id);
        vertices[e.upper].edges.push(e.id);
    }
    Ok(ReebGraph { vertices, edges, boundary_min })
}

impl ReebGraph {
    pub fn minima(&self) -> impl Iterator<Item = &ReebVertex> {
        self.vertices.iter().filter(|v| v.kind == VertexKind::Minimum)
    }

    pub fn saddles(&self) -> impl Iterator<Item = &ReebVertex> {
        self.vertices.iter().filter(|v| v.kind == VertexKind::Saddle)
    }

    pub fn unbounded_edge(&self) -> usize {
        self.edges.iter().position(|e| e.unbounded).expect("graph always has an unbounded edge")
    }

    /// The edge leaving vertex `v` upwards.
    pub fn upward_edge(&self, v: usize) -> Option<usize> {
        self.vertices[v].edges.iter().copied().find(|&e| self.edges[e].lower == v)
    }

    pub fn largest_critical_value(&self) -> f64 {
        self.vertices
            .iter()
            .filter(|v| v.kind != VertexKind::OpenEnd)
            .map(|v| v.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn smallest_critical_value(&self) -> f64 {
        self.minima().map(|v| v.value).fold(f64::INFINITY, f64::min)
    }

    /// True when the graph is a tree with the expected vertex degrees.
    pub fn check_tree(&self) -> bool {
        let nv = self.vertices.len();
        if self.edges.len() + 1 != nv {
            return false;
        }
        self.vertices.iter().all(|v| match v.kind {
            VertexKind::Minimum | VertexKind::OpenEnd => v.edges.len() == 1,
            VertexKind::Saddle => v.edges.len() == 3,
        })
    }

    /// Edge at level `z` on the path from vertex `start` up to the open end.
    pub fn edge_at(&self, start: usize, z: f64) -> Result<usize> {
        let mut e = self
            .upward_edge(start)
            .ok_or_else(|| Error::invalid(format!("vertex {start} has no upward edge")))?;
        loop {
            let edge = &self.edges[e];
            if z < edge.z_lo {
                return Err(Error::invalid("level below the minimum"));
            }
            if z < edge.z_hi || edge.unbounded {
                return Ok(e);
            }
            e = self.upward_edge(edge.upper).expect("saddle has an upward edge");
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Maps `x` to `(H(x), edge id)`.
///
/// A steepest descent from `x` stays inside the sublevel component of
/// `H(x)` containing `x`, so the minimum it reaches fixes the edge.
pub fn project_y(field: &ScalarField2D, graph: &ReebGraph, x: [f64; 2]) -> Result<(f64, usize)> {
    let h = field.value(x);
    if h >= graph.boundary_min {
        return Err(Error::invalid("point above the closed-contour range"));
    }
    let scale = (graph.boundary_min - graph.smallest_critical_value()).max(1e-300);
    for v in graph.saddles() {
        if (h - v.value).abs() < 1e-10 * scale {
            return Err(Error::AtThreshold(format!("H(x) = {h} is a critical level")));
        }
    }
    // descent may also stall on a saddle when x lies on its stable manifold
    let m = descend(field, graph, x)?;
    Ok((h, graph.edge_at(m, h)?))
}

fn descend(field: &ScalarField2D, graph: &ReebGraph, x0: [f64; 2]) -> Result<usize> {
    let hstep = field.dx().max(field.dy());
    let near = |x: [f64; 2]| {
        graph
            .vertices
            .iter()
            .filter(|v| v.kind != VertexKind::OpenEnd)
            .map(|v| {
                let p = v.position.unwrap();
                (v.id, (p[0] - x[0]).hypot(p[1] - x[1]))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    };
    let mut x = x0;
    let mut hx = field.value(x);
    let mut s = 0.5 * hstep;
    for _ in 0..200_000 {
        let (id, d) = near(x);
        if d < 0.5 * hstep {
            return Ok(id);
        }
        let g = field.grad(x);
        let gn = g[0].hypot(g[1]);
        if gn < 1e-12 {
            break;
        }
        let y = [x[0] - s * g[0] / gn, x[1] - s * g[1] / gn];
        let hy = field.value(y);
        if hy < hx {
            x = y;
            hx = hy;
            s = (s * 1.5).min(0.5 * hstep);
        } else {
            s *= 0.5;
            if s < 1e-6 * hstep {
                break;
            }
        }
    }
    let (id, d) = near(x);
    if d < 4.0 * hstep {
        Ok(id)
    } else {
        Err(Error::AtThreshold(format!("descent from {x0:?} stalled at {x:?}")))
    }
}
