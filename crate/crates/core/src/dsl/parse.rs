use super::expr::{BinOp, Expr, Func};
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_variable(name: &str) -> bool {
    match name {
        "x" | "t" | "u" | "y" | "z" => true,
        _ => {
            name.len() > 1
                && name.starts_with('x')
                && name[1..].bytes().all(|b| b.is_ascii_digit())
                && !name[1..].starts_with('0')
        }
    }
}

fn lex(source: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    let err = |line, column, message: String| DslError::Parse {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                let exp_start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i == exp_start {
                    let text: String = chars[start..i].iter().collect();
                    return Err(err(tl, tc, format!("malformed number `{text}`")));
                }
            }
            let text: String = chars[start..i].iter().collect();
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                return Err(err(tl, tc, format!("malformed number `{text}{}`", chars[i])));
            }
            let v: f64 = text
                .parse()
                .map_err(|_| err(tl, tc, format!("malformed number `{text}`")))?;
            col += i - start;
            out.push(Token {
                tok: Tok::Num(v),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(text),
                line: tl,
                column: tc,
            });
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => return Err(err(tl, tc, format!("unexpected character `{c}`"))),
        };
        out.push(Token {
            tok,
            line: tl,
            column: tc,
        });
        i += 1;
        col += 1;
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(t: &Token, message: impl Into<String>) -> DslError {
        DslError::Parse {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), DslError> {
        let t = self.next();
        if t.tok == want {
            Ok(())
        } else {
            Err(Self::error_at(&t, format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.peek().tok == Tok::Op('-') {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Op('^') {
            self.next();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, DslError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(ref name) => {
                if let Some(func) = Func::from_name(name) {
                    if self.peek().tok != Tok::LParen {
                        return Err(Self::error_at(&t, format!("function `{name}` needs `(`")));
                    }
                    self.next();
                    let mut args = vec![self.expr()?];
                    while self.peek().tok == Tok::Comma {
                        self.next();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    if args.len() != func.arity() {
                        return Err(Self::error_at(
                            &t,
                            format!("`{name}` takes {} argument(s), got {}", func.arity(), args.len()),
                        ));
                    }
                    Ok(Expr::Call(func, args))
                } else if name == "pi" {
                    Ok(Expr::Num(std::f64::consts::PI))
                } else if is_variable(name) {
                    Ok(Expr::Var(name.clone()))
                } else {
                    Err(Self::error_at(&t, format!("unknown identifier `{name}`")))
                }
            }
            Tok::End => Err(Self::error_at(&t, "unexpected end of input")),
            Tok::RParen => Err(Self::error_at(&t, "unbalanced `)`")),
            _ => Err(Self::error_at(&t, "expected a value")),
        }
    }
}

/// Parses infix source text into an expression tree.
pub fn parse(source: &str) -> Result<Expr, DslError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    let t = p.peek().clone();
    match t.tok {
        Tok::End => Ok(e),
        Tok::RParen => Err(Parser::error_at(&t, "unbalanced `)`")),
        _ => Err(Parser::error_at(&t, "unexpected token after expression")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(src: &str, vals: &[f64]) -> f64 {
        let vars = ["x1", "x2"];
        parse(src).unwrap().eval_at(&vars, vals).unwrap()
    }

    #[test]
    fn sum_of_squares() {
        assert_eq!(at("x1^2 + x2^2", &[1.0, 2.0]), 5.0);
    }

    #[test]
    fn unbalanced_paren_reports_column() {
        match parse("(x1") {
            Err(DslError::Parse { line, column, .. }) => {
                assert_eq!((line, column), (1, 4));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn sin_zero() {
        assert_eq!(at("sin(0)", &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(at("-x1^2", &[3.0, 0.0]), -9.0);
        assert_eq!(at("2^3^2", &[0.0, 0.0]), 512.0);
        assert_eq!(at("1 - 2 - 3", &[0.0, 0.0]), -4.0);
        assert_eq!(at("8 / 4 / 2", &[0.0, 0.0]), 1.0);
        assert_eq!(at("2 * -x1", &[3.0, 0.0]), -6.0);
        assert_eq!(at("x1^-1", &[4.0, 0.0]), 0.25);
        assert_eq!(at("min(x1, x2) + max(x1, x2)", &[1.0, 5.0]), 6.0);
    }

    #[test]
    fn unknown_identifier_position() {
        match parse("x1 + foo") {
            Err(DslError::Parse { column, message, .. }) => {
                assert_eq!(column, 6);
                assert!(message.contains("foo"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_numbers() {
        assert!(matches!(parse("1.2.3"), Err(DslError::Parse { column: 1, .. })));
        assert!(matches!(parse("x1 + 2e"), Err(DslError::Parse { column: 6, .. })));
        assert!(matches!(parse("3x1"), Err(DslError::Parse { .. })));
    }

    #[test]
    fn multiline_positions() {
        match parse("x1 +\n  (x2") {
            Err(DslError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 6)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stray_close_paren() {
        assert!(matches!(parse("x1)"), Err(DslError::Parse { column: 3, .. })));
    }
}
