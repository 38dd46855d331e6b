use serde::Serialize;

use super::ReactionSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct PdeSolution {
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    /// One profile per requested time.
    pub u: Vec<Vec<f64>>,
    pub dt: f64,
    /// Grid updates that left `[0, 1 + 1e-6]` and were clipped back.
    pub clips: usize,
}

impl PdeSolution {
    /// Position of the `u = 1/2` crossing at each stored time.
    pub fn interfaces(&self) -> Vec<Option<f64>> {
        self.u.iter().map(|u| interface_position(&self.x, u, 0.5)).collect()
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "x", "u"])?;
        for (t, u) in self.times.iter().zip(&self.u) {
            for (x, v) in self.x.iter().zip(u) {
                w.serialize((t, x, v))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Rightmost downward crossing of `level`, linearly interpolated.
pub fn interface_position(x: &[f64], u: &[f64], level: f64) -> Option<f64> {
    (0..u.len().saturating_sub(1)).rev().find(|&i| u[i] >= level && u[i + 1] < level).map(|i| {
        let s = (u[i] - level) / (u[i] - u[i + 1]);
        x[i] + s * (x[i + 1] - x[i])
    })
}

/// Explicit scheme for `u_t = sqrt(eps) (a/2) u'' + c(x, u) u / sqrt(eps)`
/// on a line grid with zero-flux ends, stored at `times` (ascending).
/// The step defaults to `0.9 hx^2 / (2 sqrt(eps) a)`.
pub fn pde_solve_1d(spec: &ReactionSpec, eps: f64, times: &[f64], dt: Option<f64>) -> Result<PdeSolution> {
    let g = &spec.grid;
    if g.dim() != 1 {
        return Err(Error::invalid("the reference solver is one-dimensional"));
    }
    if !(eps >= 1e-3) {
        return Err(Error::invalid(format!("eps = {eps} below 1e-3: explicit scheme too stiff")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::invalid("snapshot times must be nonnegative and ascending"));
    }
    let se = eps.sqrt();
    let limit = 0.9 * g.hx * g.hx / (2.0 * se * spec.a);
    let dt = dt.unwrap_or(limit);
    if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("dt = {dt} violates the stability bound {limit:e}")));
    }
    let n = g.nx;
    let x: Vec<f64> = (0..n).map(|i| g.point(i)[0]).collect();
    let diff = 0.5 * se * spec.a / (g.hx * g.hx);
    let mut u = spec.initial_profile();
    let mut next = vec![0.0; n];
    let mut clips = 0;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        let m = (span / dt).ceil() as usize;
        let h = if m > 0 { span / m as f64 } else { 0.0 };
        for _ in 0..m {
            for i in 0..n {
                let l = if i == 0 { u[1] } else { u[i - 1] };
                let r = if i + 1 == n { u[n - 2] } else { u[i + 1] };
                let react = spec.rate_u([x[i], 0.0], u[i]) * u[i] / se;
                let v = u[i] + h * (diff * (l - 2.0 * u[i] + r) + react);
                if !v.is_finite() {
                    return Err(Error::BlowUp { index: i });
                }
                next[i] = if v < 0.0 || v > 1.0 + 1e-6 {
                    clips += 1;
                    v.clamp(0.0, 1.0 + 1e-6)
                } else {
                    v
                };
            }
            std::mem::swap(&mut u, &mut next);
        }
        t = target;
        out.push(u.clone());
    }
    Ok(PdeSolution { x, times: times.to_vec(), u: out, dt, clips })
}

#[cfg(test)]
mod tests {
    use super::super::{FrontGrid, Support};
    use super::*;
    use crate::field::Field;

    fn spec() -> ReactionSpec {
        let g = FrontGrid::line(-0.5, 1.0, 0.01).unwrap();
        ReactionSpec::logistic(g, 1.0, 1.0, Support::Interval { lo: -0.5, hi: 0.0 }).unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let s = spec().with_initial(Field::constant(1, vec![0.0])).unwrap();
        let sol = pde_solve_1d(&s, 0.01, &[0.5], None).unwrap();
        assert!(sol.u[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_is_an_equilibrium() {
        let s = spec().with_initial(Field::constant(1, vec![1.0])).unwrap();
        let sol = pde_solve_1d(&s, 0.01, &[0.5], None).unwrap();
        assert!(sol.u[0].iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_eq!(sol.clips, 0);
    }

    #[test]
    fn guards() {
        let s = spec();
        assert!(pde_solve_1d(&s, 1e-4, &[0.1], None).is_err());
        assert!(pde_solve_1d(&s, 0.01, &[0.1], Some(1.0)).is_err());
        assert!(pde_solve_1d(&s, 0.01, &[0.2, 0.1], None).is_err());
    }

    #[test]
    fn crossing_interpolates() {
        let x = [0.0, 1.0, 2.0];
        assert_eq!(interface_position(&x, &[1.0, 0.75, 0.25], 0.5), Some(1.5));
        assert_eq!(interface_position(&x, &[0.0, 0.0, 0.0], 0.5), None);
    }
}
