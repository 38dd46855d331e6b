//! Discrete Freidlin-Wentzell action, its minimisation and quasipotentials.

mod minimize;

pub use minimize::{
    minimize_action, quasipotential_point, v_matrix, ActionConfig, EndSet, QuasipotentialResult,
    VMatrix,
};

use std::cell::Cell;
use std::io::Write;

use crate::dynamics::DiffusionSpec;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg::{outer_self, spd_inverse};
use crate::quad::adaptive_simpson;

/// `N + 1` points of a path on `[0, T]`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDiscretization {
    pub dim: usize,
    pub points: Vec<f64>,
    pub t: f64,
    pub fix_start: bool,
    pub fix_end: bool,
}

impl PathDiscretization {
    pub fn new(dim: usize, points: Vec<f64>, t: f64) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 || points.len() / dim < 3 {
            return Err(Error::invalid("path needs N >= 2 segments"));
        }
        if !(t > 0.0) {
            return Err(Error::invalid(format!("path time must be > 0, got {t}")));
        }
        Ok(PathDiscretization {
            dim,
            points,
            t,
            fix_start: true,
            fix_end: true,
        })
    }

    /// Straight line `a -> b` with `n` segments.
    pub fn straight(a: &[f64], b: &[f64], n: usize, t: f64) -> Result<Self> {
        let dim = a.len();
        let mut points = Vec::with_capacity((n + 1) * dim);
        for k in 0..=n {
            let s = k as f64 / n as f64;
            points.extend(a.iter().zip(b).map(|(p, q)| p + s * (q - p)));
        }
        PathDiscretization::new(dim, points, t)
    }

    pub fn segments(&self) -> usize {
        self.points.len() / self.dim - 1
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn ds(&self) -> f64 {
        self.t / self.segments() as f64
    }

    /// CSV `t,x1,..,xn`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        wr.write_record(&header)?;
        let ds = self.ds();
        for k in 0..=self.segments() {
            let mut rec = vec![(k as f64 * ds).to_string()];
            rec.extend(self.point(k).iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Scratch buffers for repeated action evaluations.
pub(crate) struct ActionWs {
    n: usize,
    m: Vec<f64>,
    b: Vec<f64>,
    jb: Vec<f64>,
    sig: Vec<f64>,
    a: Vec<f64>,
    ainv: Vec<f64>,
    r: Vec<f64>,
    g: Vec<f64>,
    scratch: Vec<f64>,
    mp: Vec<f64>,
    ainv_p: Vec<f64>,
    ainv_m: Vec<f64>,
    /// `a^{-1}` when sigma is constant.
    fixed_ainv: Option<Vec<f64>>,
}

impl ActionWs {
    pub(crate) fn new(spec: &DiffusionSpec) -> Result<Self> {
        let n = spec.dim;
        let mut ws = ActionWs {
            n,
            m: vec![0.0; n],
            b: vec![0.0; n],
            jb: vec![0.0; n * n],
            sig: vec![0.0; n * n],
            a: vec![0.0; n * n],
            ainv: vec![0.0; n * n],
            r: vec![0.0; n],
            g: vec![0.0; n],
            scratch: vec![0.0; n],
            mp: vec![0.0; n],
            ainv_p: vec![0.0; n * n],
            ainv_m: vec![0.0; n * n],
            fixed_ainv: None,
        };
        if spec.sigma.is_constant() {
            let zero = vec![0.0; n];
            inverse_diffusion(&spec.sigma, &zero, n, &mut ws.sig, &mut ws.a, &mut ws.ainv)?;
            ws.fixed_ainv = Some(ws.ainv.clone());
        }
        Ok(ws)
    }

    /// Largest eigenvalue bound of `a^{-1}` (its trace) at the point `x`.
    pub(crate) fn ainv_trace(&mut self, spec: &DiffusionSpec, x: &[f64]) -> Result<f64> {
        let n = self.n;
        if let Some(f) = &self.fixed_ainv {
            return Ok((0..n).map(|i| f[i * n + i]).sum());
        }
        inverse_diffusion(&spec.sigma, x, n, &mut self.sig, &mut self.a, &mut self.ainv)?;
        Ok((0..n).map(|i| self.ainv[i * n + i]).sum())
    }
}

fn inverse_diffusion(
    sigma: &Field,
    x: &[f64],
    n: usize,
    sig: &mut [f64],
    a: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    sigma.eval(x, sig);
    outer_self(sig, n, a);
    spd_inverse(a, n, out)
        .map_err(|_| Error::Singular(format!("diffusion matrix not invertible at {x:?}")))
}

/// `0.5 * r^T A r`.
fn quad_form(a: &[f64], r: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[i * n + j] * r[j];
        }
        s += r[i] * row;
    }
    0.5 * s
}

/// Discrete action of `pts` (with `n_seg` segments of length `ds`) and
/// optionally its gradient with respect to every point.
pub(crate) fn action_grad(
    spec: &DiffusionSpec,
    pts: &[f64],
    ds: f64,
    mut grad: Option<&mut [f64]>,
    ws: &mut ActionWs,
) -> Result<f64> {
    let n = ws.n;
    let n_seg = pts.len() / n - 1;
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let mut total = 0.0;
    for k in 0..n_seg {
        let (p, q) = (&pts[k * n..(k + 1) * n], &pts[(k + 1) * n..(k + 2) * n]);
        for i in 0..n {
            ws.m[i] = 0.5 * (p[i] + q[i]);
        }
        spec.total_drift(&ws.m, &mut ws.b, &mut ws.scratch);
        for i in 0..n {
            ws.r[i] = (q[i] - p[i]) / ds - ws.b[i];
        }
        let ainv: &[f64] = match &ws.fixed_ainv {
            Some(f) => f,
            None => {
                inverse_diffusion(&spec.sigma, &ws.m, n, &mut ws.sig, &mut ws.a, &mut ws.ainv)?;
                &ws.ainv
            }
        };
        let seg = ds * quad_form(ainv, &ws.r, n);
        if !seg.is_finite() {
            return Err(Error::invalid(format!("non-finite action on segment {k}")));
        }
        total += seg;
        let Some(g) = grad.as_deref_mut() else {
            continue;
        };
        // gk = ds * A r
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += ainv[i * n + j] * ws.r[j];
            }
            ws.g[i] = ds * s;
        }
        drift_jacobian(spec, &ws.m, &mut ws.jb, &mut ws.scratch);
        for j in 0..n {
            let mut jt = 0.0;
            for i in 0..n {
                jt += ws.jb[i * n + j] * ws.g[i];
            }
            g[k * n + j] += -ws.g[j] / ds - 0.5 * jt;
            g[(k + 1) * n + j] += ws.g[j] / ds - 0.5 * jt;
        }
        if ws.fixed_ainv.is_none() {
            // dependence of a^{-1} on the midpoint, by central differences
            for d in 0..n {
                let h = 1e-6 * (1.0 + ws.m[d].abs());
                ws.mp.copy_from_slice(&ws.m);
                ws.mp[d] += h;
                inverse_diffusion(&spec.sigma, &ws.mp, n, &mut ws.sig, &mut ws.a, &mut ws.ainv_p)?;
                ws.mp[d] -= 2.0 * h;
                inverse_diffusion(&spec.sigma, &ws.mp, n, &mut ws.sig, &mut ws.a, &mut ws.ainv_m)?;
                let dq = (quad_form(&ws.ainv_p, &ws.r, n) - quad_form(&ws.ainv_m, &ws.r, n))
                    / (2.0 * h);
                g[k * n + d] += 0.5 * ds * dq;
                g[(k + 1) * n + d] += 0.5 * ds * dq;
            }
        }
    }
    Ok(total)
}

/// Jacobian of `b + eps beta`.
fn drift_jacobian(spec: &DiffusionSpec, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    spec.drift.jacobian(x, out);
    if spec.eps != 0.0 && !spec.perturbation.is_constant() {
        let n = spec.dim;
        let mut jp = vec![0.0; n * n];
        spec.perturbation.jacobian(x, &mut jp);
        for (o, v) in out.iter_mut().zip(&jp) {
            *o += spec.eps * v;
        }
    }
    let _ = scratch;
}

/// Midpoint-rule action `sum_k ds/2 (a^{-1}(m_k)(v_k - b(m_k))).(v_k - b(m_k))`.
pub fn action(spec: &DiffusionSpec, path: &PathDiscretization) -> Result<f64> {
    if path.dim != spec.dim {
        return Err(Error::invalid("path dimension differs from the system"));
    }
    let mut ws = ActionWs::new(spec)?;
    action_grad(spec, &path.points, path.ds(), None, &mut ws)
}

/// Gradient of the discrete action with respect to every path point.
pub fn action_gradient(spec: &DiffusionSpec, path: &PathDiscretization) -> Result<(f64, Vec<f64>)> {
    let mut ws = ActionWs::new(spec)?;
    let mut g = vec![0.0; path.points.len()];
    let v = action_grad(spec, &path.points, path.ds(), Some(&mut g), &mut ws)?;
    Ok((v, g))
}

/// `2 int_{from}^{to} f / sigma^2 dx` (signed; callers orient the interval so
/// the result is the nonnegative exponent).
pub fn quasipotential_1d(
    f: &dyn Fn(f64) -> f64,
    sigma2: &dyn Fn(f64) -> f64,
    x_from: f64,
    x_to: f64,
) -> Result<f64> {
    let bad = Cell::new(None);
    let integrand = |x: f64| {
        let s = sigma2(x);
        if !(s > 0.0) {
            bad.set(Some((x, s)));
            return 0.0;
        }
        f(x) / s
    };
    let v = adaptive_simpson(&integrand, x_from, x_to, 1e-10)?;
    if let Some((x, s)) = bad.get() {
        return Err(Error::invalid(format!("sigma^2 = {s} <= 0 at x = {x}")));
    }
    Ok(2.0 * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate_ode;

    fn double_well_1d() -> DiffusionSpec {
        // b = -U', U = x^4/4 - x^2/2
        let b = Field::new(1, 1, |x, o| o[0] = x[0] - x[0].powi(3))
            .with_jacobian(|x, o| o[0] = 1.0 - 3.0 * x[0] * x[0]);
        DiffusionSpec::new(b).unwrap()
    }

    #[test]
    fn flow_line_costs_nothing() {
        let spec = double_well_1d();
        let tr = integrate_ode(&spec, &[0.3], 1e-3, 2.0).unwrap();
        let path = PathDiscretization::new(1, tr.states.clone(), 2.0).unwrap();
        assert!(action(&spec, &path).unwrap() < 1e-6);
    }

    #[test]
    fn free_particle_straight_line() {
        let spec = DiffusionSpec::new(Field::zero(2, 2)).unwrap();
        let path = PathDiscretization::straight(&[0.0, 0.0], &[3.0, 4.0], 10, 2.0).unwrap();
        assert!((action(&spec, &path).unwrap() - 25.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_heteroclinic_approaches_two_delta_u() {
        // phi' = +U'(phi) from near -1 up to near 0
        let up = Field::new(1, 1, |x, o| o[0] = x[0].powi(3) - x[0]);
        let rev = DiffusionSpec::new(up).unwrap();
        let t = 30.0;
        let tr = integrate_ode(&rev, &[-1.0 + 1e-9], 1e-3, t).unwrap();
        let path = PathDiscretization::new(1, tr.states.clone(), t).unwrap();
        let v = action(&double_well_1d(), &path).unwrap();
        let end = tr.last()[0];
        let exact = 2.0 * ((end.powi(4) / 4.0 - end * end / 2.0) + 0.25);
        assert!((v - exact).abs() < 1e-4, "{v} vs {exact}");
        assert!((v - 0.5).abs() < 1e-2);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let b = Field::new(2, 2, |x, o| {
            o[0] = -x[0] + x[1] * x[1];
            o[1] = -2.0 * x[1] + x[0] * x[1];
        });
        let sigma = Field::new(2, 4, |x, o| {
            o[0] = 1.0 + 0.2 * x[0] * x[0];
            o[1] = 0.1;
            o[2] = 0.0;
            o[3] = 1.0 + 0.1 * x[1].sin();
        });
        let spec = DiffusionSpec::new(b).unwrap().with_sigma(sigma).unwrap();
        let mut path = PathDiscretization::straight(&[0.1, 0.2], &[1.0, -0.5], 8, 1.5).unwrap();
        for (i, p) in path.points.iter_mut().enumerate() {
            *p += 0.05 * (i as f64 * 1.7).sin();
        }
        let (_, g) = action_gradient(&spec, &path).unwrap();
        for i in 0..path.points.len() {
            let h = 1e-6;
            let mut pp = path.clone();
            pp.points[i] += h;
            let mut pm = path.clone();
            pm.points[i] -= h;
            let fd = (action(&spec, &pp).unwrap() - action(&spec, &pm).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn one_dimensional_quadrature() {
        let one = |_: f64| 1.0;
        assert_eq!(quasipotential_1d(&|_| 0.0, &one, 0.0, 1.0).unwrap(), 0.0);
        let v = quasipotential_1d(&|x| x - x.powi(3), &one, 0.0, -1.0).unwrap();
        assert!((v - 0.5).abs() < 1e-10);
        let v = quasipotential_1d(&|_| 0.7, &one, 0.0, 2.0).unwrap();
        assert!((v - 2.8).abs() < 1e-12);
        assert!(quasipotential_1d(&|_| 1.0, &|x| x, -1.0, 1.0).is_err());
    }
}
