//! Small arithmetic expressions for coefficient profiles `λ(x)` and
//! nonlinearities `f(u)`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ['-'] base ('^' num)?
//! base   := num | 'x' | 'u' | fn '(' expr ')' | '(' expr ')'
//! fn     := sin | cos | exp | tanh | abs | sech
//! ```
//!
//! A leading minus on a factor is accepted as shorthand for `0 - factor`.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64 as C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    X,
    U,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Abs,
    Sech,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "sech" => Func::Sech,
            _ => return None,
        })
    }

    fn eval(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Tanh => v.tanh(),
            Func::Abs => v.abs(),
            Func::Sech => 1.0 / v.cosh(),
        }
    }

    fn eval_c(self, v: C64) -> C64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Tanh => v.tanh(),
            Func::Abs => C64::new(v.norm(), 0.0),
            Func::Sech => v.cosh().inv(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, f64),
    Call(Func, Box<Node>),
}

/// Parse failure with a 1-based column into the expression text.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprError {
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ExprError {}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            column: self.pos + 1,
            message: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if c == b'*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let neg = if self.s.get(self.pos) == Some(&b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let e = self.number()?;
            return Ok(Node::Pow(Box::new(base), if neg { -e } else { e }));
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.s.len() && matches!(self.s[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.s.len() && matches!(self.s[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                self.err("expected a number")
            }
        }
    }

    fn base(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => self.err("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Node::Num(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
                match name {
                    "x" => Ok(Node::Var(Var::X)),
                    "u" => Ok(Node::Var(Var::U)),
                    _ => {
                        let Some(f) = Func::from_name(name) else {
                            self.pos = start;
                            return self.err(format!("unknown name '{name}'"));
                        };
                        if self.peek() != Some(b'(') {
                            return self.err(format!("expected '(' after {name}"));
                        }
                        self.pos += 1;
                        let arg = self.expr()?;
                        if self.peek() != Some(b')') {
                            return self.err("expected ')'");
                        }
                        self.pos += 1;
                        Ok(Node::Call(f, Box::new(arg)))
                    }
                }
            }
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
        }
    }
}

fn eval(n: &Node, v: f64) -> f64 {
    match n {
        Node::Num(c) => *c,
        Node::Var(_) => v,
        Node::Neg(a) => -eval(a, v),
        Node::Add(a, b) => eval(a, v) + eval(b, v),
        Node::Sub(a, b) => eval(a, v) - eval(b, v),
        Node::Mul(a, b) => eval(a, v) * eval(b, v),
        Node::Div(a, b) => eval(a, v) / eval(b, v),
        Node::Pow(a, e) => {
            let b = eval(a, v);
            if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                b.powi(*e as i32)
            } else {
                b.powf(*e)
            }
        }
        Node::Call(f, a) => f.eval(eval(a, v)),
    }
}

fn eval_c(n: &Node, v: C64) -> C64 {
    match n {
        Node::Num(c) => C64::new(*c, 0.0),
        Node::Var(_) => v,
        Node::Neg(a) => -eval_c(a, v),
        Node::Add(a, b) => eval_c(a, v) + eval_c(b, v),
        Node::Sub(a, b) => eval_c(a, v) - eval_c(b, v),
        Node::Mul(a, b) => eval_c(a, v) * eval_c(b, v),
        Node::Div(a, b) => eval_c(a, v) / eval_c(b, v),
        Node::Pow(a, e) => {
            let b = eval_c(a, v);
            if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                b.powi(*e as i32)
            } else {
                b.powf(*e)
            }
        }
        Node::Call(f, a) => f.eval_c(eval_c(a, v)),
    }
}

fn collect_vars(n: &Node, out: &mut BTreeSet<Var>) {
    match n {
        Node::Num(_) => {}
        Node::Var(v) => {
            out.insert(*v);
        }
        Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => collect_vars(a, out),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { s: text.as_bytes(), pos: 0 };
        let root = p.expr()?;
        if p.peek().is_some() {
            return p.err("unexpected trailing input");
        }
        Ok(Expr {
            source: text.trim().to_string(),
            root,
        })
    }

    /// Parses and checks that only `allowed` appears as a variable.
    pub fn parse_in(text: &str, allowed: Var) -> Result<Expr, ExprError> {
        let e = Expr::parse(text)?;
        if let Some(v) = e.variables().into_iter().find(|v| *v != allowed) {
            let (bad, good) = match (v, allowed) {
                (Var::X, _) => ("x", "u"),
                (Var::U, _) => ("u", "x"),
            };
            let column = text.find(bad).map_or(1, |i| i + 1);
            return Err(ExprError {
                column,
                message: format!("this expression may only use '{good}', found '{bad}'"),
            });
        }
        Ok(e)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut s = BTreeSet::new();
        collect_vars(&self.root, &mut s);
        s
    }

    /// Evaluates with the (single) variable set to `v`.
    pub fn eval(&self, v: f64) -> f64 {
        eval(&self.root, v)
    }

    pub fn eval_complex(&self, v: C64) -> C64 {
        eval_c(&self.root, v)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn precedence_and_functions() {
        let e = Expr::parse("1 + 0.5*sech(x)").unwrap();
        assert_eq!(e.eval(0.0), 1.5);
        let e = Expr::parse("2*x^2 - x/4 + (x+1)^3").unwrap();
        assert_eq!(e.eval(2.0), 8.0 - 0.5 + 27.0);
        assert_eq!(Expr::parse("-x^2").unwrap().eval(3.0), -9.0);
        assert_eq!(Expr::parse("1e-1*u").unwrap().eval(2.0), 0.2);
    }

    #[test]
    fn errors_carry_columns() {
        let e = Expr::parse("1 + foo(x)").unwrap_err();
        assert_eq!(e.column, 5);
        let e = Expr::parse("sin x").unwrap_err();
        assert!(e.message.contains("'('"));
        assert!(Expr::parse("(x + 1").is_err());
        assert!(Expr::parse("x 2").is_err());
        let e = Expr::parse_in("0.1*sin(x)", Var::U).unwrap_err();
        assert_eq!(e.column, 9);
    }

    #[test]
    fn complex_agrees_on_real_axis() {
        let e = Expr::parse("0.1*sin(u) + u/(1+u^2) - tanh(u)*abs(u) + exp(-u^2)").unwrap();
        for &v in &[-2.0, -0.3, 0.0, 0.7, 3.0] {
            let c = e.eval_complex(C64::new(v, 0.0));
            assert!((c.re - e.eval(v)).abs() <= 1e-15 * e.eval(v).abs().max(1.0));
            assert!(c.im.abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn matches_direct_evaluation(v in -5.0f64..5.0) {
            let e = Expr::parse("0.3*cos(2*x) + sech(x)^2 - x^3/7 + exp(-abs(x))").unwrap();
            let direct = 0.3 * (2.0 * v).cos() + (1.0 / v.cosh()).powi(2) - v.powi(3) / 7.0 + (-v.abs()).exp();
            prop_assert!((e.eval(v) - direct).abs() <= 1e-14 * direct.abs().max(1e-300));
        }
    }
}
