use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FrontGrid, ReactionSpec};
use crate::error::{Error, Result};

/// Stand-in for `-inf` off the reachable set.
pub const SENTINEL: f64 = -1e18;

/// Where the rate is sampled on a jump `y -> x`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateRule {
    #[default]
    Arrival,
    Midpoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DpOptions {
    pub dt: f64,
    /// Search radius in cells; the smallest admissible one when absent.
    pub window: Option<usize>,
    pub rate_rule: RateRule,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions { dt: 0.1, window: None, rate_rule: RateRule::Arrival }
    }
}

/// `V_0`, minimal budgets and the front `{V_1 = 0}` after every step.
#[derive(Debug, Clone, Serialize)]
pub struct FrontField {
    pub grid: FrontGrid,
    pub times: Vec<f64>,
    pub v0: Vec<Vec<f64>>,
    /// Smallest starting budget that keeps every prefix integral
    /// nonnegative; `-SENTINEL` where no path reaches the support.
    pub budget: Vec<Vec<f64>>,
    pub front: Vec<Vec<bool>>,
}

struct Offset {
    di: isize,
    dj: isize,
    penalty: f64,
    ring: bool,
}

struct Kernel<'a> {
    grid: &'a FrontGrid,
    offsets: Vec<Offset>,
    dt: f64,
    /// `c(x) dt` per cell, or on the half grid for midpoint sampling.
    gain: Vec<f64>,
    midpoint: bool,
    floor: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Total,
    Budget,
}

fn window_for(spec: &ReactionSpec, dt: f64, cmax: f64, window: Option<usize>) -> Result<usize> {
    let need = 3.0 * (spec.a * cmax).sqrt() * dt / spec.grid.hx;
    match window {
        Some(w) if (w as f64) < need * (1.0 - 1e-9) => Err(Error::invalid(format!(
            "window of {w} cells is below the reach 3 sqrt(a c_max) dt / hx = {need:.2}"
        ))),
        Some(w) => Ok(w),
        None => Ok((need * (1.0 - 1e-9)).ceil() as usize + 1),
    }
}

impl<'a> Kernel<'a> {
    fn new(spec: &'a ReactionSpec, dt: f64, opts: &DpOptions, t_total: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dp time step must be positive"));
        }
        let grid = &spec.grid;
        let rates = spec.rates();
        let cmax = rates.iter().cloned().fold(0.0, f64::max);
        let w = window_for(spec, dt, cmax, opts.window)? as isize;
        let jw = if grid.dim() == 1 { 0 } else { w };
        let scale = grid.hx * grid.hx / (2.0 * spec.a * dt);
        let mut offsets = Vec::new();
        for dj in -jw..=jw {
            for di in -w..=w {
                let r2 = di * di + dj * dj;
                if r2 <= w * w {
                    let ring = r2 > (w - 1) * (w - 1);
                    offsets.push(Offset { di, dj, penalty: r2 as f64 * scale, ring });
                }
            }
        }
        // nearest first, so ties go to the shortest jump
        offsets.sort_by(|a, b| a.penalty.total_cmp(&b.penalty));
        let midpoint = opts.rate_rule == RateRule::Midpoint;
        let gain = if midpoint {
            let (hx2, hy2) = (2 * grid.nx - 1, if grid.ny == 1 { 1 } else { 2 * grid.ny - 1 });
            (0..hx2 * hy2)
                .map(|k| {
                    let (i, j) = (k % hx2, k / hx2);
                    let p = [grid.origin[0] + 0.5 * i as f64 * grid.hx, grid.origin[1] + 0.5 * j as f64 * grid.hx];
                    spec.rate0(p) * dt
                })
                .collect()
        } else {
            rates.iter().map(|c| c * dt).collect()
        };
        Ok(Kernel { grid, offsets, dt, gain, midpoint, floor: -cmax * t_total })
    }

    /// One value-iteration step; returns the new grid and the number of
    /// relevant cells whose optimum sat on the window edge.
    fn step(&self, prev: &[f64], mode: Mode) -> (Vec<f64>, usize, usize) {
        let g = self.grid;
        let (nx, ny) = (g.nx as isize, g.ny as isize);
        let hw = 2 * g.nx - 1;
        let mut next = vec![0.0; prev.len()];
        let counts: Vec<(usize, usize)> = next
            .par_chunks_mut(g.nx)
            .enumerate()
            .map(|(j, row)| {
                let j = j as isize;
                let (mut hits, mut relevant) = (0, 0);
                for (i, out) in row.iter_mut().enumerate() {
                    let i = i as isize;
                    let here = (j * nx + i) as usize;
                    let mut best = f64::NEG_INFINITY;
                    let mut ring = false;
                    for o in &self.offsets {
                        let (yi, yj) = (i + o.di, j + o.dj);
                        if yi < 0 || yj < 0 || yi >= nx || yj >= ny {
                            continue;
                        }
                        let mut v = prev[(yj * nx + yi) as usize];
                        if v <= 0.5 * SENTINEL {
                            continue;
                        }
                        if mode == Mode::Budget {
                            v = v.min(0.0);
                        }
                        let gain = if self.midpoint {
                            self.gain[((2 * j + o.dj) as usize) * hw + (2 * i + o.di) as usize]
                        } else {
                            self.gain[here]
                        };
                        let cand = v - o.penalty + gain;
                        if cand > best {
                            best = cand;
                            ring = o.ring;
                        }
                    }
                    *out = if best == f64::NEG_INFINITY {
                        SENTINEL
                    } else if mode == Mode::Budget {
                        best.min(0.0)
                    } else {
                        best
                    };
                    if *out >= self.floor {
                        relevant += 1;
                        hits += usize::from(ring);
                    }
                }
                (hits, relevant)
            })
            .collect();
        let (h, r) = counts.iter().fold((0, 0), |a, c| (a.0 + c.0, a.1 + c.1));
        (next, h, r)
    }
}

fn step_count(t: f64, dt: f64) -> Result<usize> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be >= 0, got {t}")));
    }
    let m = t / dt;
    if (m - m.round()).abs() > 1e-9 * m.max(1.0) {
        return Err(Error::invalid(format!("dt = {dt} does not divide t = {t}")));
    }
    Ok(m.round() as usize)
}

fn initial(spec: &ReactionSpec) -> Vec<f64> {
    spec.support.mask(&spec.grid).iter().map(|&m| if m { 0.0 } else { SENTINEL }).collect()
}

struct Window {
    hits: usize,
    relevant: usize,
}

impl Window {
    fn check(&self) -> Result<()> {
        if self.relevant > 0 && self.hits as f64 > 0.01 * self.relevant as f64 {
            return Err(Error::invalid(format!(
                "window too small: {} of {} relevant cells optimised on its edge",
                self.hits, self.relevant
            )));
        }
        Ok(())
    }
}

fn run(spec: &ReactionSpec, t: f64, dt: f64, opts: &DpOptions, mode: Mode) -> Result<Vec<f64>> {
    let m = step_count(t, dt)?;
    let k = Kernel::new(spec, dt, opts, t)?;
    let mut w = initial(spec);
    let mut win = Window { hits: 0, relevant: 0 };
    for _ in 0..m {
        let (next, h, r) = k.step(&w, mode);
        win.hits += h;
        win.relevant += r;
        w = next;
    }
    win.check()?;
    Ok(w)
}

/// `V_0(t, .)` by value iteration from the support.
pub fn v0_dp(spec: &ReactionSpec, t: f64, opts: &DpOptions) -> Result<Vec<f64>> {
    run(spec, t, opts.dt, opts, Mode::Total)
}

/// Indicator of `{V_1(t, .) = 0}`: cells from which a path reaches the
/// support in time `t` without any prefix integral going negative.
pub fn v1_front(spec: &ReactionSpec, t: f64, opts: &DpOptions) -> Result<Vec<bool>> {
    let w = run(spec, t, opts.dt, opts, Mode::Budget)?;
    Ok(w.iter().map(|&v| v == 0.0).collect())
}

/// Both fields after each step up to `t`.
pub fn front_evolution(spec: &ReactionSpec, t: f64, opts: &DpOptions) -> Result<FrontField> {
    let m = step_count(t, opts.dt)?;
    let k = Kernel::new(spec, opts.dt, opts, t)?;
    let mut win = Window { hits: 0, relevant: 0 };
    let (mut v, mut b) = (initial(spec), initial(spec));
    let mut out = FrontField { grid: spec.grid, times: vec![0.0], v0: vec![], budget: vec![], front: vec![] };
    let push = |out: &mut FrontField, v: &[f64], b: &[f64]| {
        out.v0.push(v.to_vec());
        out.budget.push(b.iter().map(|&x| -x).collect());
        out.front.push(b.iter().map(|&x| x == 0.0).collect());
    };
    push(&mut out, &v, &b);
    for s in 1..=m {
        let (nv, h1, r1) = k.step(&v, Mode::Total);
        let (nb, h2, r2) = k.step(&b, Mode::Budget);
        win.hits += h1 + h2;
        win.relevant += r1 + r2;
        (v, b) = (nv, nb);
        out.times.push(s as f64 * k.dt);
        push(&mut out, &v, &b);
    }
    win.check()?;
    Ok(out)
}

impl FrontField {
    /// `(t, rightmost front point)` on a line grid.
    pub fn positions(&self) -> Vec<(f64, Option<f64>)> {
        self.times.iter().zip(&self.front).map(|(t, f)| (*t, self.grid.front_position(f))).collect()
    }

    /// `(t, area-equivalent radius)` on a plane grid.
    pub fn radii(&self) -> Vec<(f64, f64)> {
        self.times.iter().zip(&self.front).map(|(t, f)| (*t, self.grid.area_radius(f))).collect()
    }

    pub fn write_positions_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "position", "radius"])?;
        for (k, t) in self.times.iter().enumerate() {
            let pos = self.grid.front_position(&self.front[k]).unwrap_or(f64::NAN);
            w.serialize((t, pos, self.grid.area_radius(&self.front[k])))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// First `t` with `V_0(t, x) = 0`: a coarse sweep at `opts.dt` brackets the
/// crossing, bisection with fresh solves at divisible steps refines it.
pub fn front_time(spec: &ReactionSpec, x: [f64; 2], opts: &DpOptions, t_max: f64) -> Result<f64> {
    let idx = spec.grid.nearest(x).ok_or_else(|| Error::invalid(format!("{x:?} is off the grid")))?;
    if spec.support.contains(spec.grid.point(idx)) {
        return Ok(0.0);
    }
    let m_max = (t_max / opts.dt).ceil() as usize;
    let k = Kernel::new(spec, opts.dt, opts, t_max)?;
    let mut w = initial(spec);
    let mut hit = None;
    for s in 1..=m_max {
        w = k.step(&w, Mode::Total).0;
        if w[idx] >= 0.0 {
            hit = Some(s);
            break;
        }
    }
    let s = hit.ok_or(Error::Timeout { t_max })?;
    let (mut lo, mut hi) = ((s - 1) as f64 * opts.dt, s as f64 * opts.dt);
    let value_at = |t: f64| -> Result<f64> {
        let m = (t / opts.dt).ceil().max(1.0);
        Ok(run(spec, t, t / m, opts, Mode::Total)?[idx])
    };
    while hi - lo > 1e-3 * opts.dt {
        let mid = 0.5 * (lo + hi);
        if value_at(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::super::Support;
    use super::*;

    fn line_spec(c: f64) -> ReactionSpec {
        let g = FrontGrid::line(-1.0, 2.0, 0.01).unwrap();
        ReactionSpec::logistic(g, c, 1.0, Support::Interval { lo: -1.0, hi: 0.0 }).unwrap()
    }

    #[test]
    fn zero_time_is_support() {
        let s = line_spec(1.0);
        let o = DpOptions::default();
        let v = v0_dp(&s, 0.0, &o).unwrap();
        let f = v1_front(&s, 0.0, &o).unwrap();
        for k in 0..s.grid.len() {
            let inside = s.support.contains(s.grid.point(k));
            assert_eq!(f[k], inside);
            assert_eq!(v[k], if inside { 0.0 } else { SENTINEL });
        }
    }

    #[test]
    fn step_must_divide_time() {
        let s = line_spec(1.0);
        let o = DpOptions { dt: 0.3, ..DpOptions::default() };
        assert!(v0_dp(&s, 1.0, &o).is_err());
    }

    #[test]
    fn narrow_window_refused() {
        let s = line_spec(1.0);
        let o = DpOptions { dt: 0.1, window: Some(5), ..DpOptions::default() };
        assert!(v0_dp(&s, 1.0, &o).is_err());
    }

    #[test]
    fn one_dimensional_closed_form() {
        // V_0 = c t - d^2 / (2 a t) for the distance d to the support
        let s = line_spec(1.0);
        let o = DpOptions { dt: 0.05, ..DpOptions::default() };
        let v = v0_dp(&s, 1.0, &o).unwrap();
        for x in [0.2, 0.8, 1.4] {
            let k = s.grid.nearest([x, 0.0]).unwrap();
            let exact = 1.0 - x * x / 2.0;
            assert!((v[k] - exact).abs() < 0.01, "{x}: {} vs {exact}", v[k]);
        }
    }

    #[test]
    fn midpoint_rule_agrees_for_constant_rate() {
        let s = line_spec(1.0);
        let a = v0_dp(&s, 0.5, &DpOptions::default()).unwrap();
        let b = v0_dp(&s, 0.5, &DpOptions { rate_rule: RateRule::Midpoint, ..DpOptions::default() }).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
