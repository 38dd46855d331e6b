use crate::error::{Error, Result};
use crate::field::Field;

/// Planar Hamiltonian sampled on a regular grid over a box.
#[derive(Debug, Clone)]
pub struct ScalarField2D {
    pub h: Field,
    /// `[x_min, x_max, y_min, y_max]`.
    pub bbox: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    /// Row-major samples, `values[j * nx + i] = H(x_i, y_j)`.
    pub values: Vec<f64>,
}

impl ScalarField2D {
    /// `h` must map `R^2 -> R`; its Jacobian (analytic when the field has
    /// one) is used as the gradient.
    pub fn new(h: Field, bbox: [f64; 4], nx: usize, ny: usize) -> Result<Self> {
        if h.dim_in() != 2 || h.dim_out() != 1 {
            return Err(Error::invalid("Hamiltonian must map R^2 -> R"));
        }
        if nx < 8 || ny < 8 || !(bbox[1] > bbox[0]) || !(bbox[3] > bbox[2]) {
            return Err(Error::invalid("grid needs at least 8x8 points over a nonempty box"));
        }
        let mut values = vec![0.0; nx * ny];
        let (dx, dy) = ((bbox[1] - bbox[0]) / (nx - 1) as f64, (bbox[3] - bbox[2]) / (ny - 1) as f64);
        let mut out = [0.0];
        for j in 0..ny {
            for i in 0..nx {
                h.eval(&[bbox[0] + i as f64 * dx, bbox[2] + j as f64 * dy], &mut out);
                if !out[0].is_finite() {
                    return Err(Error::invalid(format!("H not finite at grid point ({i}, {j})")));
                }
                values[j * nx + i] = out[0];
            }
        }
        Ok(ScalarField2D { h, bbox, nx, ny, values })
    }

    pub fn dx(&self) -> f64 {
        (self.bbox[1] - self.bbox[0]) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.bbox[3] - self.bbox[2]) / (self.ny - 1) as f64
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = (idx % self.nx, idx / self.nx);
        [self.bbox[0] + i as f64 * self.dx(), self.bbox[2] + j as f64 * self.dy()]
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.h.eval_scalar(&x)
    }

    pub fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        self.h.jacobian(&x, &mut g);
        g
    }

    /// Hessian by central differences of the gradient, row-major.
    pub fn hessian(&self, x: [f64; 2]) -> [f64; 4] {
        let h = 1e-5 * (1.0 + x[0].abs().max(x[1].abs()));
        let gxp = self.grad([x[0] + h, x[1]]);
        let gxm = self.grad([x[0] - h, x[1]]);
        let gyp = self.grad([x[0], x[1] + h]);
        let gym = self.grad([x[0], x[1] - h]);
        let hxx = (gxp[0] - gxm[0]) / (2.0 * h);
        let hyy = (gyp[1] - gym[1]) / (2.0 * h);
        let hxy = 0.5 * ((gxp[1] - gxm[1]) + (gyp[0] - gym[0])) / (2.0 * h);
        [hxx, hxy, hxy, hyy]
    }

    /// Smallest sampled value on the box boundary.
    pub fn boundary_min(&self) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let mut m = f64::INFINITY;
        for i in 0..nx {
            m = m.min(self.values[i]).min(self.values[(ny - 1) * nx + i]);
        }
        for j in 0..ny {
            m = m.min(self.values[j * nx]).min(self.values[j * nx + nx - 1]);
        }
        m
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = (idx % self.nx, idx / self.nx);
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    /// Neighbours in the triangulation that splits every cell along its
    /// `(i, j) -> (i + 1, j + 1)` diagonal, in cyclic order.
    pub fn neighbours(&self, idx: usize, out: &mut Vec<usize>) {
        out.clear();
        let (i, j) = ((idx % self.nx) as isize, (idx / self.nx) as isize);
        const RING: [(isize, isize); 6] = [(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)];
        for (di, dj) in RING {
            let (a, b) = (i + di, j + dj);
            if a >= 0 && b >= 0 && (a as usize) < self.nx && (b as usize) < self.ny {
                out.push(b as usize * self.nx + a as usize);
            }
        }
    }
}

/// Newton iteration for `grad H = 0` from `x0`.
pub(crate) fn refine_critical(f: &ScalarField2D, x0: [f64; 2]) -> Option<[f64; 2]> {
    let mut x = x0;
    let step_cap = 2.0 * f.dx().max(f.dy());
    for _ in 0..50 {
        let g = f.grad(x);
        let hs = f.hessian(x);
        let det = hs[0] * hs[3] - hs[1] * hs[2];
        if det.abs() < 1e-300 {
            return None;
        }
        let sx = (hs[3] * g[0] - hs[1] * g[1]) / det;
        let sy = (-hs[2] * g[0] + hs[0] * g[1]) / det;
        let norm = (sx * sx + sy * sy).sqrt();
        let scale = if norm > step_cap { step_cap / norm } else { 1.0 };
        x = [x[0] - scale * sx, x[1] - scale * sy];
        if norm < 1e-13 {
            break;
        }
    }
    let g = f.grad(x);
    let d = ((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2)).sqrt();
    if (g[0] * g[0] + g[1] * g[1]).sqrt() < 1e-8 && d < 4.0 * f.dx().max(f.dy()) {
        Some(x)
    } else {
        None
    }
}
