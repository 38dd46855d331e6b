use std::collections::HashMap;
use std::path::Path;

use super::field2d::ScalarField2D;
use super::graph::ReebGraph;
use crate::dynamics::point_in_polygon;
use crate::error::{Error, Result};

/// All closed components of `{H = z}` on the triangulated grid.
///
/// Crossing points sit on the exact level set (regula falsi along each grid
/// edge), so lengths are second-order accurate.
pub fn extract_contours(field: &ScalarField2D, z: f64) -> Vec<Vec<[f64; 2]>> {
    let (nx, ny) = (field.nx, field.ny);
    let vals = &field.values;
    let mut key_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut links: Vec<[usize; 2]> = Vec::new();

    let mut crossing = |a: usize, b: usize, points: &mut Vec<[f64; 2]>, links: &mut Vec<[usize; 2]>| {
        let key = (a.min(b), a.max(b));
        *key_of.entry(key).or_insert_with(|| {
            points.push(edge_root(field, key.0, key.1, z));
            links.push([usize::MAX; 2]);
            points.len() - 1
        })
    };
    let link = |p: usize, q: usize, links: &mut Vec<[usize; 2]>| {
        for (s, t) in [(p, q), (q, p)] {
            let slot = &mut links[s];
            if slot[0] == usize::MAX {
                slot[0] = t;
            } else {
                slot[1] = t;
            }
        }
    };

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            let (b, c, d) = (a + 1, a + nx + 1, a + nx);
            for tri in [[a, b, c], [a, c, d]] {
                let up = tri.map(|v| vals[v] >= z);
                if up[0] == up[1] && up[1] == up[2] {
                    continue;
                }
                let mut ends = [0usize; 2];
                let mut k = 0;
                for (s, t) in [(0, 1), (1, 2), (2, 0)] {
                    if up[s] != up[t] {
                        ends[k] = crossing(tri[s], tri[t], &mut points, &mut links);
                        k += 1;
                    }
                }
                link(ends[0], ends[1], &mut links);
            }
        }
    }

    let mut seen = vec![false; points.len()];
    let mut loops = Vec::new();
    for start in 0..points.len() {
        if seen[start] || links[start][1] == usize::MAX {
            continue;
        }
        let mut poly = Vec::new();
        let (mut prev, mut cur) = (usize::MAX, start);
        loop {
            seen[cur] = true;
            poly.push(points[cur]);
            let [p, q] = links[cur];
            let next = if p != prev { p } else { q };
            if next == usize::MAX || next == start || seen[next] {
                break;
            }
            prev = cur;
            cur = next;
        }
        if links[cur].contains(&start) && poly.len() >= 3 {
            loops.push(poly);
        }
    }
    loops
}

fn edge_root(field: &ScalarField2D, a: usize, b: usize, z: f64) -> [f64; 2] {
    let (pa, pb) = (field.point(a), field.point(b));
    let at = |t: f64| [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
    let (mut t0, mut t1) = (0.0, 1.0);
    let (mut f0, mut f1) = (field.values[a] - z, field.values[b] - z);
    let mut t = f0 / (f0 - f1);
    // Illinois variant of regula falsi
    let mut side = 0i8;
    for _ in 0..30 {
        let ft = field.value(at(t)) - z;
        if ft == 0.0 || (t1 - t0) < 1e-13 {
            break;
        }
        if (ft > 0.0) == (f0 > 0.0) {
            t0 = t;
            f0 = ft;
            if side == -1 {
                f1 *= 0.5;
            }
            side = -1;
        } else {
            t1 = t;
            f1 = ft;
            if side == 1 {
                f0 *= 0.5;
            }
            side = 1;
        }
        if ft.abs() < 1e-14 * (1.0 + z.abs()) {
            break;
        }
        t = (t0 * f1 - t1 * f0) / (f1 - f0);
    }
    at(t)
}

/// The component of `{H = z}` belonging to `edge`: the loop enclosing
/// exactly that edge's minima.
pub fn extract_contour(field: &ScalarField2D, graph: &ReebGraph, z: f64, edge: usize) -> Result<Vec<[f64; 2]>> {
    let e = graph.edges.get(edge).ok_or_else(|| Error::invalid(format!("no edge {edge}")))?;
    let span = e.z_hi - e.z_lo;
    if !(z > e.z_lo + 1e-12 * span.abs().max(1.0) && z < e.z_hi - 1e-12 * span.abs().max(1.0)) {
        return Err(Error::AtThreshold(format!("level {z} not strictly inside edge {edge}")));
    }
    let minima: Vec<(usize, [f64; 2])> = graph.minima().map(|v| (v.id, v.position.unwrap())).collect();
    for poly in extract_contours(field, z) {
        let inside: Vec<usize> =
            minima.iter().filter(|(_, p)| point_in_polygon(&poly, *p)).map(|(id, _)| *id).collect();
        if inside == e.minima {
            return Ok(poly);
        }
    }
    Err(Error::Degenerate(format!("no contour for edge {edge} at level {z}")))
}

pub fn polyline_length(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n).map(|k| {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    })
    .sum()
}

/// Writes a closed polyline as `x,y` rows, repeating the first point.
pub fn write_contour_csv(poly: &[[f64; 2]], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y"])?;
    for p in poly.iter().chain(poly.first()) {
        w.write_record([p[0].to_string(), p[1].to_string()])?;
    }
    w.flush()?;
    Ok(())
}
