//! Expression language for user-defined fields.
//!
//! Sources are ordinary infix arithmetic over the variables `x`, `x1`..`xn`,
//! `t`, `u`, `y`, `z`, real literals, the constant `pi`, and the functions
//! `sin cos exp log sqrt abs tanh min max`. Precedence from tightest:
//! `^` (right-associative), unary minus, `* /`, `+ -`.

mod compile;
mod deriv;
mod expr;
mod field_def;
mod parse;

pub use compile::CompiledExpr;
pub use expr::{BinOp, Expr, Func};
pub use field_def::{FieldDef, FieldSource};
pub use parse::parse;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("`{0}` is not differentiable")]
    NotDifferentiable(&'static str),
    #[error("invalid field definition: {0}")]
    Field(String),
}

/// Symbolic gradient of `expr` with respect to each of `vars`.
pub fn grad(expr: &Expr, vars: &[&str]) -> Result<Vec<Expr>, DslError> {
    vars.iter().map(|v| expr.derivative(v)).collect()
}
