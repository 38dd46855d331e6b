//! Numeric field handles shared by every solver.

use std::fmt;
use std::sync::Arc;

use crate::dsl::{CompiledExpr, DslError, FieldDef};

type EvalFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A map `R^dim_in -> R^dim_out`, optionally with an analytic Jacobian.
///
/// Matrix-valued fields (noise `sigma`, diffusion `a`) are stored row-major
/// with `dim_out = n * n`.
#[derive(Clone)]
pub struct Field {
    dim_in: usize,
    dim_out: usize,
    eval: Arc<EvalFn>,
    jacobian: Option<Arc<EvalFn>>,
    constant: bool,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("constant", &self.constant)
            .finish()
    }
}

impl Field {
    pub fn new(
        dim_in: usize,
        dim_out: usize,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Field {
            dim_in,
            dim_out,
            eval: Arc::new(f),
            jacobian: None,
            constant: false,
        }
    }

    /// Attaches a row-major `dim_out x dim_in` Jacobian.
    pub fn with_jacobian(mut self, j: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    pub fn constant(dim_in: usize, value: Vec<f64>) -> Self {
        let dim_out = value.len();
        let v = value.clone();
        let mut f = Field::new(dim_in, dim_out, move |_, out| out.copy_from_slice(&v))
            .with_jacobian(|_, out| out.fill(0.0));
        f.constant = true;
        f
    }

    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        Field::constant(dim_in, vec![0.0; dim_out])
    }

    pub fn identity_matrix(n: usize) -> Self {
        Field::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = s;
        }
        Field::constant(n, m)
    }

    /// Builds a field from a parsed definition; the Jacobian is symbolic when
    /// every component is differentiable.
    pub fn from_def(def: &FieldDef) -> Result<Self, DslError> {
        let comps = def.compile()?;
        let constant = def.is_constant();
        let eval = move |x: &[f64], out: &mut [f64]| {
            for (o, c) in out.iter_mut().zip(&comps) {
                *o = c.eval(x);
            }
        };
        let mut field = Field::new(def.arity(), def.dim(), eval);
        field.constant = constant;
        if let Ok(jac) = def.jacobian() {
            let vars: Vec<&str> = def.vars.iter().map(|s| s.as_str()).collect();
            let compiled = jac
                .iter()
                .map(|e| CompiledExpr::new(e, &vars))
                .collect::<Result<Vec<_>, _>>()?;
            field.jacobian = Some(Arc::new(move |x: &[f64], out: &mut [f64]| {
                for (o, c) in out.iter_mut().zip(&compiled) {
                    *o = c.eval(x);
                }
            }));
        }
        Ok(field)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    pub fn eval_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out];
        self.eval(x, &mut out);
        out
    }

    /// Scalar convenience for `dim_out == 1`.
    #[inline]
    pub fn eval_scalar(&self, x: &[f64]) -> f64 {
        let mut out = [0.0];
        (self.eval)(x, &mut out);
        out[0]
    }

    /// Row-major Jacobian; central differences when no analytic form exists.
    pub fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        if let Some(j) = &self.jacobian {
            j(x, out);
            return;
        }
        let (m, n) = (self.dim_out, self.dim_in);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; m];
        let mut fm = vec![0.0; m];
        for k in 0..n {
            let h = 1e-6 * (1.0 + x[k].abs());
            xp[k] = x[k] + h;
            self.eval(&xp, &mut fp);
            xp[k] = x[k] - h;
            self.eval(&xp, &mut fm);
            xp[k] = x[k];
            for i in 0..m {
                out[i * n + k] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
    }
}
