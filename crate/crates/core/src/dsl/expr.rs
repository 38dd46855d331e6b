use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::DslError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Min,
    Max,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    pub(crate) fn apply1(self, a: f64) -> Result<f64, DslError> {
        let v = match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Log => {
                if a <= 0.0 {
                    return Err(DslError::Domain(format!("log of nonpositive value {a}")));
                }
                a.ln()
            }
            Func::Sqrt => {
                if a < 0.0 {
                    return Err(DslError::Domain(format!("sqrt of negative value {a}")));
                }
                a.sqrt()
            }
            Func::Abs => a.abs(),
            Func::Tanh => a.tanh(),
            Func::Min | Func::Max => unreachable!("binary function applied to one argument"),
        };
        Ok(v)
    }

    pub(crate) fn apply2(self, a: f64, b: f64) -> f64 {
        match self {
            Func::Min => a.min(b),
            Func::Max => a.max(b),
            _ => unreachable!("unary function applied to two arguments"),
        }
    }
}

/// Abstract syntax tree of a field expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

pub(crate) fn binary(op: BinOp, a: f64, b: f64) -> Result<f64, DslError> {
    match op {
        BinOp::Add => Ok(a + b),
        BinOp::Sub => Ok(a - b),
        BinOp::Mul => Ok(a * b),
        BinOp::Div => {
            if b == 0.0 {
                Err(DslError::Domain("division by zero".into()))
            } else {
                Ok(a / b)
            }
        }
        BinOp::Pow => power(a, b),
    }
}

pub(crate) fn power(base: f64, exp: f64) -> Result<f64, DslError> {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        let k = exp as i32;
        if k < 0 && base == 0.0 {
            return Err(DslError::Domain("division by zero in negative power".into()));
        }
        if k.unsigned_abs() <= 8 {
            let mut acc = 1.0;
            for _ in 0..k.unsigned_abs() {
                acc *= base;
            }
            return Ok(if k < 0 { 1.0 / acc } else { acc });
        }
        return Ok(base.powi(k));
    }
    if base <= 0.0 {
        return Err(DslError::Domain(format!(
            "non-integer exponent {exp} needs a positive base, got {base}"
        )));
    }
    Ok(base.powf(exp))
}

fn finite(v: f64) -> Result<f64, DslError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DslError::Domain(format!("non-finite result {v}")))
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    /// Evaluates with variables looked up through `lookup`.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, DslError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(name) => lookup(name).ok_or_else(|| DslError::Unbound(name.clone()))?,
            Expr::Neg(a) => -a.eval_with(lookup)?,
            Expr::Bin(op, a, b) => binary(*op, a.eval_with(lookup)?, b.eval_with(lookup)?)?,
            Expr::Call(f, args) => {
                if f.arity() == 2 {
                    f.apply2(args[0].eval_with(lookup)?, args[1].eval_with(lookup)?)
                } else {
                    f.apply1(args[0].eval_with(lookup)?)?
                }
            }
        };
        finite(v)
    }

    pub fn eval(&self, bindings: &HashMap<String, f64>) -> Result<f64, DslError> {
        self.eval_with(&|name| bindings.get(name).copied())
    }

    /// Evaluates with `vars[i]` bound to `values[i]`.
    pub fn eval_at(&self, vars: &[&str], values: &[f64]) -> Result<f64, DslError> {
        self.eval_with(&|name| vars.iter().position(|v| *v == name).map(|i| values[i]))
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(a) => a.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.variables().is_empty()
    }

    pub(crate) fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) => a.depth(),
            Expr::Bin(_, a, b) => a.depth().max(1 + b.depth()),
            Expr::Call(_, args) => args
                .iter()
                .enumerate()
                .map(|(i, a)| i + a.depth())
                .max()
                .unwrap_or(1),
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesised; reparsing yields an expression that evaluates
    /// bit-identically.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if v.is_sign_negative() {
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}
