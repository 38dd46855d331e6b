use super::expr::{binary, BinOp, Expr, Func};
use super::DslError;

const MAX_STACK: usize = 64;

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Load(usize),
    Neg,
    Bin(BinOp),
    Call1(Func),
    Call2(Func),
}

/// Flat stack program for fast repeated evaluation on positional inputs.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    arity: usize,
}

impl CompiledExpr {
    /// Resolves variable names against `vars` (position = input slot).
    pub fn new(expr: &Expr, vars: &[&str]) -> Result<Self, DslError> {
        if expr.depth() > MAX_STACK {
            return Err(DslError::Field(format!(
                "expression nesting exceeds {MAX_STACK}"
            )));
        }
        let mut ops = Vec::new();
        emit(expr, vars, &mut ops)?;
        Ok(CompiledExpr {
            ops,
            arity: vars.len(),
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn try_eval(&self, input: &[f64]) -> Result<f64, DslError> {
        let mut stack = [0.0f64; MAX_STACK];
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(v) => {
                    stack[sp] = v;
                    sp += 1;
                }
                Op::Load(i) => {
                    stack[sp] = input[i];
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::Bin(b) => {
                    sp -= 1;
                    stack[sp - 1] = binary(b, stack[sp - 1], stack[sp])?;
                }
                Op::Call1(f) => stack[sp - 1] = f.apply1(stack[sp - 1])?,
                Op::Call2(f) => {
                    sp -= 1;
                    stack[sp - 1] = f.apply2(stack[sp - 1], stack[sp]);
                }
            }
        }
        let v = stack[0];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DslError::Domain(format!("non-finite result {v}")))
        }
    }

    /// Hot-path evaluation: domain errors surface as NaN.
    #[inline]
    pub fn eval(&self, input: &[f64]) -> f64 {
        self.try_eval(input).unwrap_or(f64::NAN)
    }
}

fn emit(e: &Expr, vars: &[&str], ops: &mut Vec<Op>) -> Result<(), DslError> {
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::Var(n) => {
            let i = vars
                .iter()
                .position(|v| v == n)
                .ok_or_else(|| DslError::Unbound(n.clone()))?;
            ops.push(Op::Load(i));
        }
        Expr::Neg(a) => {
            emit(a, vars, ops)?;
            ops.push(Op::Neg);
        }
        Expr::Bin(op, a, b) => {
            emit(a, vars, ops)?;
            emit(b, vars, ops)?;
            ops.push(Op::Bin(*op));
        }
        Expr::Call(f, args) => {
            for a in args {
                emit(a, vars, ops)?;
            }
            ops.push(if f.arity() == 2 {
                Op::Call2(*f)
            } else {
                Op::Call1(*f)
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn matches_tree_evaluation() {
        let src = "exp(-x1^2) * cos(3*x2) + max(x1, x2) / (1 + tanh(x1))";
        let e = parse(src).unwrap();
        let c = CompiledExpr::new(&e, &["x1", "x2"]).unwrap();
        for &(a, b) in &[(0.3, -1.2), (2.0, 0.5), (-0.7, 0.0)] {
            assert_eq!(c.eval(&[a, b]), e.eval_at(&["x1", "x2"], &[a, b]).unwrap());
        }
    }

    #[test]
    fn division_by_zero_is_domain_error() {
        let e = parse("x1/x2").unwrap();
        let c = CompiledExpr::new(&e, &["x1", "x2"]).unwrap();
        assert!(matches!(c.try_eval(&[1.0, 0.0]), Err(DslError::Domain(_))));
        assert!(c.eval(&[1.0, 0.0]).is_nan());
    }

    #[test]
    fn unresolved_variable() {
        let e = parse("x1 + y").unwrap();
        assert!(matches!(
            CompiledExpr::new(&e, &["x1"]),
            Err(DslError::Unbound(v)) if v == "y"
        ));
    }
}
