use std::io::Write;

use super::DiffusionSpec;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SdeScheme {
    /// `X + (b + eps beta) dt + sqrt(eps) sigma sqrt(dt) xi`.
    #[default]
    EulerMaruyama,
    /// Classical RK4 for the drift plus the Euler-Maruyama noise increment.
    /// Used when a fast rotation must not pump energy (Hamiltonian averaging).
    Rk4Drift,
}

/// Uniformly sampled path, states stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub t_end: f64,
    pub dim: usize,
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// CSV with header `t,x1,..,xn`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        wr.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![self.time(k).to_string()];
            rec.extend(self.state(k).iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= dt) {
        return Err(Error::invalid(format!(
            "need dt > 0 and T >= dt (dt = {dt}, T = {t_end})"
        )));
    }
    Ok((t_end / dt + 1e-9).floor() as usize)
}

/// Reusable single-step integrator with preallocated buffers.
pub struct Stepper<'a> {
    spec: &'a DiffusionSpec,
    dt: f64,
    scheme: SdeScheme,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    scratch: Vec<f64>,
    sigma: Vec<f64>,
    xi: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(spec: &'a DiffusionSpec, dt: f64, scheme: SdeScheme) -> Self {
        let n = spec.dim;
        Stepper {
            spec,
            dt,
            scheme,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
            scratch: vec![0.0; n],
            sigma: vec![0.0; n * n],
            xi: vec![0.0; n],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn rk4(&mut self, x: &mut [f64]) {
        let (n, dt) = (self.spec.dim, self.dt);
        let [k1, k2, k3, k4] = &mut self.k;
        self.spec.total_drift(x, k1, &mut self.scratch);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        self.spec.total_drift(&self.tmp, k2, &mut self.scratch);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        self.spec.total_drift(&self.tmp, k3, &mut self.scratch);
        for i in 0..n {
            self.tmp[i] = x[i] + dt * k3[i];
        }
        self.spec.total_drift(&self.tmp, k4, &mut self.scratch);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Deterministic RK4 step of `b + eps beta`.
    pub fn ode_step(&mut self, x: &mut [f64]) {
        self.rk4(x);
    }

    /// One stochastic step; noise uses `sigma` at the pre-step state.
    pub fn sde_step(&mut self, x: &mut [f64], rng: &mut RngStream) {
        let n = self.spec.dim;
        let noisy = self.spec.eps > 0.0;
        if noisy {
            self.spec.sigma.eval(x, &mut self.sigma);
            rng.fill_normal(&mut self.xi);
        }
        match self.scheme {
            SdeScheme::EulerMaruyama => {
                self.spec.total_drift(x, &mut self.k[0], &mut self.scratch);
                for i in 0..n {
                    x[i] += self.k[0][i] * self.dt;
                }
            }
            SdeScheme::Rk4Drift => self.rk4(x),
        }
        if noisy {
            let amp = (self.spec.eps * self.dt).sqrt();
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += self.sigma[i * n + j] * self.xi[j];
                }
                x[i] += amp * s;
            }
        }
    }
}

fn check_state(x: &[f64], radius: f64, index: usize) -> Result<()> {
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    if !norm2.is_finite() || norm2 > radius * radius {
        return Err(Error::BlowUp { index });
    }
    Ok(())
}

/// RK4 path of `x' = b + eps beta` (noise ignored).
pub fn integrate_ode(spec: &DiffusionSpec, x0: &[f64], dt: f64, t_end: f64) -> Result<Trajectory> {
    let steps = step_count(dt, t_end)?;
    let radius = spec.blowup_radius(x0);
    let mut st = Stepper::new(spec, dt, SdeScheme::EulerMaruyama);
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity((steps + 1) * spec.dim);
    states.extend_from_slice(&x);
    for k in 1..=steps {
        st.ode_step(&mut x);
        check_state(&x, radius, k)?;
        states.extend_from_slice(&x);
    }
    Ok(Trajectory {
        dt,
        t_end,
        dim: spec.dim,
        states,
    })
}

/// Euler-Maruyama path.
pub fn integrate_sde(
    spec: &DiffusionSpec,
    x0: &[f64],
    dt: f64,
    t_end: f64,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    integrate_sde_with(spec, x0, dt, t_end, rng, SdeScheme::EulerMaruyama)
}

pub fn integrate_sde_with(
    spec: &DiffusionSpec,
    x0: &[f64],
    dt: f64,
    t_end: f64,
    rng: &mut RngStream,
    scheme: SdeScheme,
) -> Result<Trajectory> {
    let steps = step_count(dt, t_end)?;
    let radius = spec.blowup_radius(x0);
    let mut st = Stepper::new(spec, dt, scheme);
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity((steps + 1) * spec.dim);
    states.extend_from_slice(&x);
    for k in 1..=steps {
        st.sde_step(&mut x, rng);
        check_state(&x, radius, k)?;
        states.extend_from_slice(&x);
    }
    Ok(Trajectory {
        dt,
        t_end,
        dim: spec.dim,
        states,
    })
}

/// Outcome of comparing the perturbed and unperturbed deterministic flows
/// against `eps N t e^{K t}`.
#[derive(Debug, Clone)]
pub struct GronwallCheck {
    /// Largest `max_{s<=t}|X^eps_s - X_s| - eps N t e^{K t}` over the grid.
    pub worst_margin: f64,
    pub max_deviation: f64,
    pub violations: usize,
}

/// Pathwise bound for `sigma = 0`. `beta_bound` is `N >= sup|beta|`; the
/// Lipschitz constant comes from the spec.
pub fn check_gronwall(
    spec: &DiffusionSpec,
    x0: &[f64],
    dt: f64,
    t_end: f64,
    beta_bound: f64,
) -> Result<GronwallCheck> {
    let k = spec
        .lipschitz
        .ok_or_else(|| Error::invalid("Gronwall check needs a declared Lipschitz constant"))?;
    let unperturbed = spec.clone().with_eps(0.0)?;
    let a = integrate_ode(spec, x0, dt, t_end)?;
    let b = integrate_ode(&unperturbed, x0, dt, t_end)?;
    let mut running = 0.0f64;
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for i in 0..a.len() {
        let d: f64 = a
            .state(i)
            .iter()
            .zip(b.state(i))
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        running = running.max(d);
        let t = a.time(i);
        let bound = spec.eps * beta_bound * t * (k * t).exp();
        let margin = running - bound;
        worst = worst.max(margin);
        // allow for integrator round-off
        if margin > 1e-12 {
            violations += 1;
        }
    }
    Ok(GronwallCheck {
        worst_margin: worst,
        max_deviation: running,
        violations,
    })
}
