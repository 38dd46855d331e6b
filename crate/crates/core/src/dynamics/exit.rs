use std::sync::Arc;

use super::integrate::{SdeScheme, Stepper};
use super::DiffusionSpec;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// An open region in state space.
pub trait Domain: Send + Sync {
    fn contains(&self, x: &[f64]) -> bool;

    /// Fraction `s in (0, 1]` along the chord `inside -> outside` where the
    /// boundary is met. The default bisects on `contains`.
    fn crossing(&self, inside: &[f64], outside: &[f64]) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut p = vec![0.0; inside.len()];
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            for i in 0..p.len() {
                p[i] = inside[i] + mid * (outside[i] - inside[i]);
            }
            if self.contains(&p) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Open interval `(lo, hi)` on one coordinate.
#[derive(Debug, Clone, Copy)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub coord: usize,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, coord: 0 }
    }

    pub fn on_coord(mut self, coord: usize) -> Self {
        self.coord = coord;
        self
    }
}

impl Domain for Interval {
    fn contains(&self, x: &[f64]) -> bool {
        let v = x[self.coord];
        v > self.lo && v < self.hi
    }

    fn crossing(&self, inside: &[f64], outside: &[f64]) -> f64 {
        let (a, b) = (inside[self.coord], outside[self.coord]);
        let wall = if b >= self.hi { self.hi } else { self.lo };
        if b == a {
            return 1.0;
        }
        ((wall - a) / (b - a)).clamp(0.0, 1.0)
    }
}

/// Simple closed polygon in the plane (first two coordinates).
#[derive(Debug, Clone)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid("polygon needs at least 3 vertices"));
        }
        Ok(Polygon { vertices })
    }

    /// Regular `n`-gon inscribed in the circle of radius `r` about `c`.
    pub fn regular(c: [f64; 2], r: f64, n: usize) -> Result<Self> {
        let v = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [c[0] + r * th.cos(), c[1] + r * th.sin()]
            })
            .collect();
        Polygon::new(v)
    }

    pub fn contains_point(&self, p: [f64; 2]) -> bool {
        point_in_polygon(&self.vertices, p)
    }

    /// Boundary sample points, `per_edge` per edge, edge start included.
    pub fn boundary_points(&self, per_edge: usize) -> Vec<[f64; 2]> {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n * per_edge);
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for k in 0..per_edge {
                let s = k as f64 / per_edge as f64;
                out.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
            }
        }
        out
    }
}

/// Even-odd rule.
pub fn point_in_polygon(v: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = v.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

impl Domain for Polygon {
    fn contains(&self, x: &[f64]) -> bool {
        self.contains_point([x[0], x[1]])
    }

    fn crossing(&self, inside: &[f64], outside: &[f64]) -> f64 {
        // smallest segment-edge intersection parameter
        let p = [inside[0], inside[1]];
        let d = [outside[0] - p[0], outside[1] - p[1]];
        let n = self.vertices.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = [b[0] - a[0], b[1] - a[1]];
            let den = d[0] * e[1] - d[1] * e[0];
            if den.abs() < 1e-300 {
                continue;
            }
            let w = [a[0] - p[0], a[1] - p[1]];
            let s = (w[0] * e[1] - w[1] * e[0]) / den;
            let u = (w[0] * d[1] - w[1] * d[0]) / den;
            if (-1e-12..=1.0 + 1e-12).contains(&s) && (-1e-12..=1.0 + 1e-12).contains(&u) {
                best = best.min(s);
            }
        }
        if best.is_finite() {
            best.clamp(0.0, 1.0)
        } else {
            1.0
        }
    }
}

/// Open Euclidean ball.
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Domain for Ball {
    fn contains(&self, x: &[f64]) -> bool {
        dist2(x, &self.center) < self.radius * self.radius
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Domain given by an arbitrary membership test.
#[derive(Clone)]
pub struct Predicate(pub Arc<dyn Fn(&[f64]) -> bool + Send + Sync>);

impl Predicate {
    pub fn new(f: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Predicate(Arc::new(f))
    }
}

impl Domain for Predicate {
    fn contains(&self, x: &[f64]) -> bool {
        (self.0)(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitEvent {
    /// Interpolated exit time.
    pub tau: f64,
    pub point: Vec<f64>,
    /// Index of the first state outside the domain.
    pub step: usize,
}

/// First exit from `domain`, Euler-Maruyama steps.
pub fn first_exit(
    spec: &DiffusionSpec,
    x0: &[f64],
    domain: &dyn Domain,
    dt: f64,
    t_max: f64,
    rng: &mut RngStream,
) -> Result<ExitEvent> {
    first_exit_with(spec, x0, domain, dt, t_max, rng, SdeScheme::EulerMaruyama)
}

pub fn first_exit_with(
    spec: &DiffusionSpec,
    x0: &[f64],
    domain: &dyn Domain,
    dt: f64,
    t_max: f64,
    rng: &mut RngStream,
    scheme: SdeScheme,
) -> Result<ExitEvent> {
    if !(dt > 0.0) || !(t_max > 0.0) {
        return Err(Error::invalid("need dt > 0 and T_max > 0"));
    }
    if !domain.contains(x0) {
        return Ok(ExitEvent {
            tau: 0.0,
            point: x0.to_vec(),
            step: 0,
        });
    }
    let radius = spec.blowup_radius(x0);
    let max_steps = (t_max / dt).ceil() as usize;
    let mut st = Stepper::new(spec, dt, scheme);
    let mut prev = x0.to_vec();
    let mut x = x0.to_vec();
    for k in 1..=max_steps {
        st.sde_step(&mut x, rng);
        let n2: f64 = x.iter().map(|v| v * v).sum();
        if !n2.is_finite() || n2 > radius * radius {
            return Err(Error::BlowUp { index: k });
        }
        if !domain.contains(&x) {
            let s = domain.crossing(&prev, &x);
            let point = prev.iter().zip(&x).map(|(a, b)| a + s * (b - a)).collect();
            return Ok(ExitEvent {
                tau: (k as f64 - 1.0 + s) * dt,
                point,
                step: k,
            });
        }
        prev.copy_from_slice(&x);
    }
    Err(Error::Timeout { t_max })
}
