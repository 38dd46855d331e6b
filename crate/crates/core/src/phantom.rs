//! Slow-fast systems `delta X' = f(X, Y) + sqrt(eps) sigma W'`, `Y' = X`
//! without a finite invariant measure: noise-induced concentration at the
//! balance level `y*` where the two fast wells are equally deep.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::quasipotential_1d;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mc::ensemble;
use crate::quad::bisect;

const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SlowFastSpec {
    /// `f(x, y)`.
    pub f: Field,
    /// `sigma(x, y) > 0`.
    pub sigma: Field,
    pub y_grid: Vec<f64>,
    /// Interval scanned for the three roots of `f(., y)`.
    pub x_range: [f64; 2],
    /// `(eps, delta)` pairs, coarse to fine.
    pub schedule: Vec<(f64, f64)>,
}

impl SlowFastSpec {
    pub fn new(f: Field, sigma: Field, y_grid: Vec<f64>, x_range: [f64; 2]) -> Result<Self> {
        if f.dim_in() != 2 || f.dim_out() != 1 || sigma.dim_in() != 2 || sigma.dim_out() != 1 {
            return Err(Error::invalid("f and sigma must be scalar fields of (x, y)"));
        }
        if y_grid.len() < 3 || y_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("y grid must be increasing with at least 3 points"));
        }
        if !(x_range[0] < x_range[1]) {
            return Err(Error::invalid("empty x range"));
        }
        Ok(SlowFastSpec { f, sigma, y_grid, x_range, schedule: Vec::new() })
    }

    pub fn with_schedule(mut self, schedule: Vec<(f64, f64)>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn f(&self, x: f64, y: f64) -> f64 {
        self.f.eval_scalar(&[x, y])
    }

    pub fn sigma(&self, x: f64, y: f64) -> f64 {
        self.sigma.eval_scalar(&[x, y])
    }

    /// `(X_-, X_0, X_+)` at one level `y`.
    pub fn roots(&self, y: f64) -> Result<[f64; 3]> {
        let n = 4000;
        let [lo, hi] = self.x_range;
        let h = (hi - lo) / n as f64;
        let g = |x: f64| self.f(x, y);
        let mut roots = Vec::new();
        let (mut px, mut pv) = (lo, g(lo));
        for k in 1..=n {
            let x = lo + k as f64 * h;
            let v = g(x);
            if v == 0.0 {
                roots.push(x);
            } else if pv != 0.0 && v.signum() != pv.signum() {
                roots.push(bisect(&g, px, x, ROOT_TOL)?);
            }
            (px, pv) = (x, v);
        }
        if roots.len() != 3 {
            return Err(Error::invalid(format!("f(., {y}) has {} roots in {:?}, expected 3", roots.len(), self.x_range)));
        }
        let r = [roots[0], roots[1], roots[2]];
        if !(r[0] < 0.0 && 0.0 < r[1]) {
            return Err(Error::invalid(format!("branches at y = {y} not ordered X- < 0 < X0: {r:?}")));
        }
        // + - + - across the four intervals
        let probes = [r[0] - h, 0.5 * (r[0] + r[1]), 0.5 * (r[1] + r[2]), r[2] + h];
        let signs = probes.map(g);
        if !(signs[0] > 0.0 && signs[1] < 0.0 && signs[2] > 0.0 && signs[3] < 0.0) {
            return Err(Error::invalid(format!("f at y = {y} lacks the + - + - sign pattern")));
        }
        Ok(r)
    }

    /// `V_+(y), V_-(y)`: depths of the two fast wells.
    pub fn depths(&self, y: f64) -> Result<(f64, f64)> {
        let r = self.roots(y)?;
        let f = |x: f64| self.f(x, y);
        let s2 = |x: f64| self.sigma(x, y).powi(2);
        let vp = quasipotential_1d(&f, &s2, r[1], r[2])?;
        let vm = quasipotential_1d(&f, &s2, r[1], r[0])?;
        if !(vp >= 0.0 && vm >= 0.0) {
            return Err(Error::invalid(format!("negative well depth at y = {y}: {vp}, {vm}")));
        }
        Ok((vp, vm))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchTable {
    pub y: Vec<f64>,
    pub minus: Vec<f64>,
    pub zero: Vec<f64>,
    pub plus: Vec<f64>,
}

/// The three equilibrium curves tabulated on the y grid.
pub fn branches(spec: &SlowFastSpec) -> Result<BranchTable> {
    let mut t = BranchTable { y: spec.y_grid.clone(), minus: vec![], zero: vec![], plus: vec![] };
    for &y in &spec.y_grid {
        let r = spec.roots(y)?;
        t.minus.push(r[0]);
        t.zero.push(r[1]);
        t.plus.push(r[2]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthTable {
    pub y: Vec<f64>,
    pub v_plus: Vec<f64>,
    pub v_minus: Vec<f64>,
}

impl DepthTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["y", "v_plus", "v_minus"])?;
        for k in 0..self.y.len() {
            w.serialize((self.y[k], self.v_plus[k], self.v_minus[k]))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn v_branches(spec: &SlowFastSpec) -> Result<DepthTable> {
    let mut t = DepthTable { y: spec.y_grid.clone(), v_plus: vec![], v_minus: vec![] };
    for &y in &spec.y_grid {
        let (p, m) = spec.depths(y)?;
        t.v_plus.push(p);
        t.v_minus.push(m);
    }
    Ok(t)
}

/// Bracket of the crossing on a table: `V_+` must not increase, `V_-`
/// must not decrease, and `V_+ - V_-` must change sign.
pub fn crossing_bracket(t: &DepthTable) -> Result<(f64, f64)> {
    let scale = t.v_plus.iter().chain(&t.v_minus).fold(0.0f64, |a, v| a.max(v.abs()));
    let slack = 1e-12 * scale.max(1.0);
    if t.v_plus.windows(2).any(|w| w[1] > w[0] + slack) {
        return Err(Error::invalid("V_+ is not decreasing on the y grid"));
    }
    if t.v_minus.windows(2).any(|w| w[1] < w[0] - slack) {
        return Err(Error::invalid("V_- is not increasing on the y grid"));
    }
    let d: Vec<f64> = t.v_plus.iter().zip(&t.v_minus).map(|(p, m)| p - m).collect();
    let k = d
        .windows(2)
        .position(|w| w[0] >= 0.0 && w[1] <= 0.0)
        .ok_or_else(|| Error::invalid("V_+ - V_- has no sign change on the y grid"))?;
    Ok((t.y[k], t.y[k + 1]))
}

/// `y*` with `V_+(y*) = V_-(y*) = Lambda`, refined by bisection to 1e-8.
pub fn find_ystar(spec: &SlowFastSpec, t: &DepthTable) -> Result<(f64, f64)> {
    let (a, b) = crossing_bracket(t)?;
    let diff = |y: f64| spec.depths(y).map(|(p, m)| p - m).unwrap_or(f64::NAN);
    let y = bisect(&diff, a, b, 1e-8)?;
    let (p, m) = spec.depths(y)?;
    let lambda = 0.5 * (p + m);
    if !(lambda > 0.0) {
        return Err(Error::invalid("Lambda must be positive"));
    }
    Ok((y, lambda))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Weights {
    pub p_minus: f64,
    pub p_plus: f64,
    /// `f` at the two points used by the weight `f(X_-) / (f(X_-) - f(X_+))`;
    /// both vanish on the branches, so that formula is `0/0`.
    pub literal_f_minus: f64,
    pub literal_f_plus: f64,
    pub literal_is_indeterminate: bool,
}

/// Mass split from the zero mean slow velocity `P_- X_- + P_+ X_+ = 0`.
pub fn weights(spec: &SlowFastSpec, y_star: f64) -> Result<Weights> {
    let r = spec.roots(y_star)?;
    let (sm, sp) = (r[0].abs(), r[2].abs());
    if !(sm + sp > 0.0) {
        return Err(Error::invalid("zero slow speeds at both branches"));
    }
    let (fm, fp) = (spec.f(r[0], y_star), spec.f(r[2], y_star));
    let tiny = 1e-8 * (1.0 + fm.abs().max(fp.abs()));
    Ok(Weights {
        p_minus: sp / (sm + sp),
        p_plus: sm / (sm + sp),
        literal_f_minus: fm,
        literal_f_plus: fp,
        literal_is_indeterminate: (fm + fp).abs() < tiny,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScheduleCheck {
    pub eps: f64,
    pub delta: f64,
    pub ratio: f64,
    /// `(eps / delta) log(1 / delta) / Lambda`; admissible above 1.1.
    pub margin: f64,
    pub admissible: bool,
}

/// Largest `eps / delta` still called small.
pub const MAX_RATIO: f64 = 0.1;

pub fn check_schedule(lambda: f64, eps: f64, delta: f64) -> ScheduleCheck {
    let ratio = eps / delta;
    let margin = if delta > 0.0 && delta < 1.0 { ratio * (1.0 / delta).ln() / lambda } else { 0.0 };
    ScheduleCheck { eps, delta, ratio, margin, admissible: ratio > 0.0 && ratio < MAX_RATIO && margin > 1.1 }
}

/// `eps = m Lambda delta / log(1/delta)` for each `delta`.
pub fn schedule_for(lambda: f64, deltas: &[f64], m: f64) -> Vec<(f64, f64)> {
    deltas.iter().map(|&d| (m * lambda * d / (1.0 / d).ln(), d)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomResult {
    pub depths: DepthTable,
    pub y_star: f64,
    pub lambda: f64,
    pub weights: Weights,
    pub q_minus: [f64; 2],
    pub q_plus: [f64; 2],
    pub schedule: Vec<ScheduleCheck>,
}

impl PhantomResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Tables, balance point, weights and schedule checks.
pub fn analyse(spec: &SlowFastSpec) -> Result<PhantomResult> {
    let depths = v_branches(spec)?;
    let (y_star, lambda) = find_ystar(spec, &depths)?;
    let w = weights(spec, y_star)?;
    let r = spec.roots(y_star)?;
    Ok(PhantomResult {
        depths,
        y_star,
        lambda,
        weights: w,
        q_minus: [r[0], y_star],
        q_plus: [r[2], y_star],
        schedule: spec.schedule.iter().map(|&(e, d)| check_schedule(lambda, e, d)).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    pub t_end: f64,
    pub paths: usize,
    pub radius: f64,
    /// `dt = delta / steps_per_delta`, at least 50.
    pub steps_per_delta: f64,
    pub start: [f64; 2],
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { t_end: 8.0, paths: 4000, radius: 0.1, steps_per_delta: 50.0, start: [0.0, 0.3] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyPoint {
    pub eps: f64,
    pub delta: f64,
    pub mass_minus: f64,
    pub mass_plus: f64,
    pub y_mean: f64,
    /// Total variation from `(P_-, P_+, 0)` over (near `Q_-`, near `Q_+`, elsewhere).
    pub tv: f64,
}

impl VerifyPoint {
    pub fn near_total(&self) -> f64 {
        self.mass_minus + self.mass_plus
    }
}

/// Euler-Maruyama ensembles along the schedule; fraction of paths within
/// `radius` of `Q_-` and `Q_+` at `t_end`.
pub fn simulate_verify(spec: &SlowFastSpec, res: &PhantomResult, opts: &VerifyOptions, seed: u64) -> Result<Vec<VerifyPoint>> {
    if spec.schedule.is_empty() {
        return Err(Error::invalid("empty (eps, delta) schedule"));
    }
    if !(opts.steps_per_delta >= 50.0) {
        return Err(Error::invalid("time step must be at most delta / 50"));
    }
    let mut out = Vec::new();
    for (k, &(eps, delta)) in spec.schedule.iter().enumerate() {
        let c = check_schedule(res.lambda, eps, delta);
        if !c.admissible {
            return Err(Error::invalid(format!(
                "schedule point (eps {eps}, delta {delta}) inadmissible: eps/delta = {:.3e}, margin {:.3}",
                c.ratio, c.margin
            )));
        }
        let dt = delta / opts.steps_per_delta;
        let steps = (opts.t_end / dt).ceil() as usize;
        let (drift, noise) = (dt / delta, eps.sqrt() / delta * dt.sqrt());
        let finals: Vec<[f64; 2]> = ensemble(seed, &format!("phantom-{k}"), opts.paths, |_, rng| {
            let [mut x, mut y] = opts.start;
            for _ in 0..steps {
                let dx = spec.f(x, y) * drift + spec.sigma(x, y) * noise * rng.normal();
                y += x * dt;
                x += dx;
            }
            [x, y]
        });
        if finals.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::BlowUp { index: steps });
        }
        let near = |q: [f64; 2]| {
            finals.iter().filter(|p| (p[0] - q[0]).hypot(p[1] - q[1]) < opts.radius).count() as f64 / opts.paths as f64
        };
        let (mm, mp) = (near(res.q_minus), near(res.q_plus));
        let w = &res.weights;
        out.push(VerifyPoint {
            eps,
            delta,
            mass_minus: mm,
            mass_plus: mp,
            y_mean: finals.iter().map(|p| p[1]).sum::<f64>() / opts.paths as f64,
            tv: 0.5 * ((mm - w.p_minus).abs() + (mp - w.p_plus).abs() + (1.0 - mm - mp)),
        });
    }
    Ok(out)
}

pub fn write_verify_csv(points: &[VerifyPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(a: f64, c: f64, rho: f64) -> SlowFastSpec {
        let f = Field::new(2, 1, move |x, o| o[0] = -(x[0] - a) * (x[0] - rho) * (x[0] - c));
        SlowFastSpec::new(f, Field::constant(2, vec![1.0]), vec![-1.0, 0.0, 1.0], [-5.0, 5.0]).unwrap()
    }

    #[test]
    fn speed_balance_weights() {
        let w = weights(&cubic(-1.0, 2.0, 0.5), 0.0).unwrap();
        assert!((w.p_plus - 1.0 / 3.0).abs() < 1e-9 && (w.p_minus - 2.0 / 3.0).abs() < 1e-9);
        assert!(w.literal_is_indeterminate);
        let w = weights(&cubic(-1.5, 1.5, 0.3), 0.0).unwrap();
        assert!((w.p_plus - 0.5).abs() < 1e-9);
        assert!((w.p_minus + w.p_plus - 1.0).abs() < 1e-15);
    }

    #[test]
    fn root_count_enforced() {
        let f = Field::new(2, 1, |x, o| o[0] = -x[0]);
        let s = SlowFastSpec::new(f, Field::constant(2, vec![1.0]), vec![0.0, 1.0, 2.0], [-1.0, 1.0]).unwrap();
        assert!(branches(&s).is_err());
        // roots in the wrong order relative to zero
        assert!(cubic(0.5, 2.0, 1.0).roots(0.0).is_err());
    }

    #[test]
    fn admissibility() {
        let s = schedule_for(0.01, &[1e-3], 2.0);
        assert!(check_schedule(0.01, s[0].0, s[0].1).admissible);
        let s = schedule_for(0.01, &[1e-3], 1.05);
        assert!(!check_schedule(0.01, s[0].0, s[0].1).admissible);
        assert!(!check_schedule(0.01, 0.5e-3, 1e-3).admissible);
    }
}
