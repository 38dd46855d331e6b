use super::expr::{BinOp, Expr, Func};
use super::DslError;

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Expr::Bin(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        return num(0.0);
    }
    if is_num(&b, 1.0) {
        return a;
    }
    Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 1.0) {
        return a;
    }
    if is_num(&b, 0.0) {
        return num(1.0);
    }
    Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b))
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, vec![a])
}

impl Expr {
    /// Symbolic partial derivative with respect to `var`.
    ///
    /// `abs`, `min` and `max` are rejected even where they happen to be
    /// smooth, so a derivative never silently picks a subgradient.
    pub fn derivative(&self, var: &str) -> Result<Expr, DslError> {
        Ok(match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(n) => num(if n == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(var)?),
            Expr::Bin(op, a, b) => {
                let da = a.derivative(var)?;
                let db = b.derivative(var)?;
                let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b.clone()), mul(a, db)),
                    BinOp::Div => div(
                        sub(mul(da, b.clone()), mul(a, db)),
                        pow(b, num(2.0)),
                    ),
                    BinOp::Pow => {
                        if is_num(&db, 0.0) {
                            // d(a^k) = k a^(k-1) a'
                            let km1 = match &b {
                                Expr::Num(k) => num(k - 1.0),
                                _ => sub(b.clone(), num(1.0)),
                            };
                            mul(mul(b, pow(a, km1)), da)
                        } else {
                            // d(a^b) = a^b (b' ln a + b a'/a)
                            let whole = pow(a.clone(), b.clone());
                            let inner = add(
                                mul(db, call(Func::Log, a.clone())),
                                div(mul(b, da), a),
                            );
                            mul(whole, inner)
                        }
                    }
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, a.clone()),
                    Func::Cos => neg(call(Func::Sin, a.clone())),
                    Func::Exp => call(Func::Exp, a.clone()),
                    Func::Log => div(num(1.0), a.clone()),
                    Func::Sqrt => div(num(0.5), call(Func::Sqrt, a.clone())),
                    Func::Tanh => sub(num(1.0), pow(call(Func::Tanh, a.clone()), num(2.0))),
                    Func::Abs | Func::Min | Func::Max => {
                        return Err(DslError::NotDifferentiable(f.name()))
                    }
                };
                mul(outer, a.derivative(var)?)
            }
        })
    }
}
