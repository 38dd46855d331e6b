//! Perturbed systems `dX = (b + eps beta) dt + sqrt(eps) sigma dW` and their
//! trajectories.

mod exit;
mod integrate;
mod occupation;

pub use exit::{
    first_exit, first_exit_with, point_in_polygon, Ball, Domain, ExitEvent, Interval, Polygon,
    Predicate,
};
pub use integrate::{
    check_gronwall, integrate_ode, integrate_sde, integrate_sde_with, GronwallCheck, SdeScheme,
    Stepper, Trajectory,
};
pub use occupation::{limit_cycle_average, occupation, Histogram, OccupationMeasure};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg::{outer_self, pivoted_cholesky};

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        BoundingBox { lower, upper }
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }
}

/// A perturbed system together with its noise coefficient.
#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    pub dim: usize,
    pub drift: Field,
    pub perturbation: Field,
    /// Row-major `dim x dim` noise matrix.
    pub sigma: Field,
    pub eps: f64,
    pub bbox: Option<BoundingBox>,
    /// Declared Lipschitz constant of `drift`, if known.
    pub lipschitz: Option<f64>,
}

impl DiffusionSpec {
    /// Unperturbed system `b` with `beta = 0`, `sigma = I`, `eps = 0`.
    pub fn new(drift: Field) -> Result<Self> {
        let dim = drift.dim_in();
        if drift.dim_out() != dim || dim == 0 {
            return Err(Error::invalid(format!(
                "drift must map R^n to R^n, got {} -> {}",
                drift.dim_in(),
                drift.dim_out()
            )));
        }
        Ok(DiffusionSpec {
            dim,
            drift,
            perturbation: Field::zero(dim, dim),
            sigma: Field::identity_matrix(dim),
            eps: 0.0,
            bbox: None,
            lipschitz: None,
        })
    }

    pub fn with_perturbation(mut self, beta: Field) -> Result<Self> {
        if beta.dim_in() != self.dim || beta.dim_out() != self.dim {
            return Err(Error::invalid("perturbation drift has wrong dimension"));
        }
        self.perturbation = beta;
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: Field) -> Result<Self> {
        if sigma.dim_in() != self.dim || sigma.dim_out() != self.dim * self.dim {
            return Err(Error::invalid("noise matrix must be n x n"));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be >= 0, got {eps}")));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn with_bbox(mut self, bbox: BoundingBox) -> Self {
        self.bbox = Some(bbox);
        self
    }

    pub fn with_lipschitz(mut self, k: f64) -> Self {
        self.lipschitz = Some(k);
        self
    }

    /// `b(x) + eps beta(x)`.
    #[inline]
    pub fn total_drift(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        self.drift.eval(x, out);
        if self.eps != 0.0 {
            self.perturbation.eval(x, scratch);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += self.eps * s;
            }
        }
    }

    /// `a(x) = sigma sigma^T`, row-major.
    pub fn diffusion_matrix(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let s = self.sigma.eval_vec(x);
        let mut a = vec![0.0; n * n];
        outer_self(&s, n, &mut a);
        a
    }

    /// Checks `a(x)` is positive semidefinite at each sample point.
    pub fn check_diffusion_psd(&self, points: &[Vec<f64>]) -> Result<()> {
        for p in points {
            let a = self.diffusion_matrix(p);
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("a(x) not finite at {p:?}")));
            }
            for i in 0..self.dim {
                for j in 0..i {
                    let (u, l) = (a[i * self.dim + j], a[j * self.dim + i]);
                    if (u - l).abs() > 1e-12 * (1.0 + u.abs()) {
                        return Err(Error::invalid(format!("a(x) not symmetric at {p:?}")));
                    }
                }
            }
            pivoted_cholesky(&a, self.dim, 1e-12)?;
        }
        Ok(())
    }

    /// Norm above which a state counts as blown up.
    pub(crate) fn blowup_radius(&self, x0: &[f64]) -> f64 {
        let diam = match &self.bbox {
            Some(b) => b.diameter(),
            None => 2.0 * x0.iter().map(|v| v * v).sum::<f64>().sqrt(),
        };
        1e6 * diam.max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_checks() {
        let b = Field::new(2, 1, |_, o| o[0] = 0.0);
        assert!(DiffusionSpec::new(b).is_err());
        let spec = DiffusionSpec::new(Field::zero(2, 2)).unwrap();
        assert!(spec.clone().with_sigma(Field::identity_matrix(3)).is_err());
        assert!(spec.with_eps(-1.0).is_err());
    }

    #[test]
    fn psd_check_catches_indefinite_noise() {
        let spec = DiffusionSpec::new(Field::zero(2, 2)).unwrap();
        assert!(spec.check_diffusion_psd(&[vec![0.0, 0.0]]).is_ok());
        // sigma sigma^T is always PSD; a non-finite sigma is what fails.
        let bad = spec
            .with_sigma(Field::new(2, 4, |x, o| {
                o.fill(0.0);
                o[0] = 1.0 / x[0];
            }))
            .unwrap();
        assert!(bad.check_diffusion_psd(&[vec![0.0, 1.0]]).is_err());
    }
}
