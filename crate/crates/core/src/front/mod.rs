//! Reaction-diffusion fronts of FKPP type: the variational fields `V_0`,
//! the zero set of `V_1` by dynamic programming, the Huygens front for a
//! constant rate and an explicit 1-D reference solver.

mod dp;
mod edt;
mod pde;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::point_in_polygon;
use crate::error::{Error, Result};
use crate::field::Field;

pub use dp::{front_evolution, front_time, v0_dp, v1_front, DpOptions, FrontField, RateRule, SENTINEL};
pub use edt::{distance_to_set, huygens_constant};
pub use pde::{interface_position, pde_solve_1d, PdeSolution};

/// Uniform cell-centred grid; `ny == 1` is a line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontGrid {
    pub origin: [f64; 2],
    pub hx: f64,
    pub nx: usize,
    pub ny: usize,
}

impl FrontGrid {
    /// Points `x0, x0 + hx, ...` up to `x1`.
    pub fn line(x0: f64, x1: f64, hx: f64) -> Result<Self> {
        let nx = ((x1 - x0) / hx).round() as usize + 1;
        FrontGrid { origin: [x0, 0.0], hx, nx, ny: 1 }.checked()
    }

    pub fn rect(x: [f64; 2], y: [f64; 2], hx: f64) -> Result<Self> {
        let nx = ((x[1] - x[0]) / hx).round() as usize + 1;
        let ny = ((y[1] - y[0]) / hx).round() as usize + 1;
        FrontGrid { origin: [x[0], y[0]], hx, nx, ny }.checked()
    }

    fn checked(self) -> Result<Self> {
        if !(self.hx > 0.0 && self.hx.is_finite()) || self.nx < 3 || self.ny == 0 || self.ny == 2 {
            return Err(Error::invalid(format!("bad front grid {self:?}")));
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = (idx % self.nx, idx / self.nx);
        [self.origin[0] + i as f64 * self.hx, self.origin[1] + j as f64 * self.hx]
    }

    /// Nearest grid index, `None` outside the grid.
    pub fn nearest(&self, x: [f64; 2]) -> Option<usize> {
        let i = ((x[0] - self.origin[0]) / self.hx).round();
        let j = if self.ny == 1 { 0.0 } else { ((x[1] - self.origin[1]) / self.hx).round() };
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some(j as usize * self.nx + i as usize)
    }

    /// Area (or length) covered by the marked cells.
    pub fn measure(&self, mask: &[bool]) -> f64 {
        let n = mask.iter().filter(|&&m| m).count() as f64;
        n * self.hx.powi(self.dim() as i32)
    }

    /// Radius of the disc with the same area as the marked set.
    pub fn area_radius(&self, mask: &[bool]) -> f64 {
        (self.measure(mask) / std::f64::consts::PI).sqrt()
    }

    /// Rightmost marked point of a line grid.
    pub fn front_position(&self, mask: &[bool]) -> Option<f64> {
        mask.iter().rposition(|&m| m).map(|i| self.point(i)[0])
    }

    /// Writes `x,y,value` rows.
    pub fn write_csv(&self, path: &Path, values: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "value"])?;
        for (k, v) in values.iter().enumerate() {
            let p = self.point(k);
            w.serialize((p[0], p[1], v))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Initial support `G_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Support {
    Interval { lo: f64, hi: f64 },
    Ball { center: [f64; 2], radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Support {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        match self {
            Support::Interval { lo, hi } => x[0] >= *lo && x[0] <= *hi,
            Support::Ball { center, radius } => {
                (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) <= radius * radius
            }
            Support::Polygon { vertices } => point_in_polygon(vertices, x),
        }
    }

    pub fn mask(&self, grid: &FrontGrid) -> Vec<bool> {
        (0..grid.len()).map(|k| self.contains(grid.point(k))).collect()
    }
}

/// `u_t = eps L u + c(x, u) u` data. `rate` takes `(x.., u)`.
#[derive(Debug, Clone)]
pub struct ReactionSpec {
    pub grid: FrontGrid,
    pub rate: Field,
    pub a: f64,
    pub support: Support,
    /// Initial profile `g` for the PDE; the indicator of the support if absent.
    pub initial: Option<Field>,
}

impl ReactionSpec {
    pub fn new(grid: FrontGrid, rate: Field, a: f64, support: Support) -> Result<Self> {
        let spec = ReactionSpec { grid, rate, a, support, initial: None };
        spec.validate()?;
        Ok(spec)
    }

    /// Rate `c(x, u) = c (1 - u)` with constant `c`.
    pub fn logistic(grid: FrontGrid, c: f64, a: f64, support: Support) -> Result<Self> {
        let d = grid.dim();
        let rate = Field::new(d + 1, 1, move |x, o| o[0] = c * (1.0 - x[d]));
        ReactionSpec::new(grid, rate, a, support)
    }

    /// Rate `c(x) (1 - u)` for a spatial profile `c(x)`.
    pub fn logistic_profile(
        grid: FrontGrid,
        c: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        a: f64,
        support: Support,
    ) -> Result<Self> {
        let d = grid.dim();
        let rate = Field::new(d + 1, 1, move |x, o| o[0] = c(&x[..d]) * (1.0 - x[d]));
        ReactionSpec::new(grid, rate, a, support)
    }

    pub fn with_initial(mut self, g: Field) -> Result<Self> {
        if g.dim_in() != self.grid.dim() || g.dim_out() != 1 {
            return Err(Error::invalid("initial profile must be scalar on the grid dimension"));
        }
        self.initial = Some(g);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.grid.dim();
        if self.rate.dim_in() != d + 1 || self.rate.dim_out() != 1 {
            return Err(Error::invalid(format!("rate must map (x, u) in R^{} to R", d + 1)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::invalid("diffusion scalar a must be positive"));
        }
        let c = self.rates();
        if let Some(k) = c.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("rate c(x, 0) must be positive, got {} at {:?}", c[k], self.grid.point(k))));
        }
        if !self.support.mask(&self.grid).iter().any(|&m| m) {
            return Err(Error::invalid("initial support covers no grid point"));
        }
        Ok(())
    }

    /// `c(x) = c(x, 0)` at a point.
    pub fn rate0(&self, x: [f64; 2]) -> f64 {
        self.rate_u(x, 0.0)
    }

    pub fn rate_u(&self, x: [f64; 2], u: f64) -> f64 {
        let d = self.grid.dim();
        let mut arg = [0.0; 3];
        arg[..d].copy_from_slice(&x[..d]);
        arg[d] = u;
        self.rate.eval_scalar(&arg[..d + 1])
    }

    /// `c(x, 0)` at every grid point.
    pub fn rates(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|k| self.rate0(self.grid.point(k))).collect()
    }

    /// FKPP sign and maximality conditions at every grid point for the
    /// sample levels `us`.
    pub fn check_fkpp(&self, us: &[f64]) -> Result<()> {
        for k in 0..self.grid.len() {
            let x = self.grid.point(k);
            let c0 = self.rate0(x);
            for &u in us {
                let c = self.rate_u(x, u);
                let ok = if u < 1.0 { c > 0.0 } else if u > 1.0 { c < 0.0 } else { true };
                if !ok || c > c0 * (1.0 + 1e-12) {
                    return Err(Error::invalid(format!("rate fails the FKPP conditions at {x:?}, u = {u}")));
                }
            }
        }
        Ok(())
    }

    pub fn initial_profile(&self) -> Vec<f64> {
        let d = self.grid.dim();
        (0..self.grid.len())
            .map(|k| {
                let x = self.grid.point(k);
                match &self.initial {
                    Some(g) => g.eval_scalar(&x[..d]),
                    None => f64::from(u8::from(self.support.contains(x))),
                }
            })
            .collect()
    }
}
