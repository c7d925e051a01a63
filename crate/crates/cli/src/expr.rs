//! A small expression language for user-supplied functions.
//!
//! Grammar: numbers, named variables, the constants `pi` and `e`, binary `+ - * / ^`,
//! unary minus, parentheses and the functions `exp`, `log`, `sin`, `cos`. Expressions
//! are evaluated over any [`Real`], so jets and dual numbers give exact derivatives.

use std::fmt;

use nijhydro::fields::Univariate;
use nijhydro::jet::Jet1D;
use nijhydro::Real;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot parse `{source_text}` at byte {position}: {message}")]
pub struct ParseError {
    pub source_text: String,
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Log,
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let err = |position, message: &str| ParseError {
        source_text: src.to_string(),
        position,
        message: message.to_string(),
    };
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part: 1e-3, 2.5E+4
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let v: f64 = src[start..i].parse().map_err(|_| err(start, "malformed number"))?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else {
            return Err(err(i, &format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    vars: &'a [&'a str],
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        let position = self.tokens.get(self.pos).map_or(self.src.len(), |t| t.0);
        ParseError {
            source_text: self.src.to_string(),
            position,
            message: message.into(),
        }
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((_, Token::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            // right-associative; `-x^2` is `-(x^2)` but `x^-2` is allowed
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.err("unexpected end of expression"));
        };
        match tok {
            Token::Num(v) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Token::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Token::Ident(name) => {
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "log" => Some(Func::Log),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    _ => None,
                };
                if let Some(f) = func {
                    self.pos += 1;
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    self.pos += 1;
                    return Ok(Node::Var(i));
                }
                let c = match name.as_str() {
                    "pi" => std::f64::consts::PI,
                    "e" => std::f64::consts::E,
                    _ => {
                        return Err(self.err(format!(
                            "unknown name `{name}` (variables: {})",
                            self.vars.join(", ")
                        )))
                    }
                };
                self.pos += 1;
                Ok(Node::Const(c))
            }
            Token::Op(c) => Err(self.err(format!("unexpected `{c}`"))),
        }
    }
}

/// A parsed expression over a fixed list of variables.
#[derive(Clone, PartialEq)]
pub struct Expr {
    text: String,
    vars: Vec<String>,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?} in {:?})", self.text, self.vars)
    }
}

impl Expr {
    pub fn parse(src: &str, vars: &[&str]) -> Result<Self, ParseError> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            src,
            vars,
            tokens,
            pos: 0,
        };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Self {
            text: src.to_string(),
            vars: vars.iter().map(|v| v.to_string()).collect(),
            root,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// Evaluates at `args`, which must have one entry per variable.
    pub fn eval<R: Real>(&self, args: &[R]) -> R {
        assert_eq!(args.len(), self.vars.len(), "expression arity");
        eval_node(&self.root, args)
    }
}

fn eval_node<R: Real>(n: &Node, args: &[R]) -> R {
    match n {
        Node::Const(c) => args[0].lift(*c),
        Node::Var(i) => args[*i].clone(),
        Node::Neg(a) => -eval_node(a, args),
        Node::Add(a, b) => eval_node(a, args) + eval_node(b, args),
        Node::Sub(a, b) => eval_node(a, args) - eval_node(b, args),
        Node::Mul(a, b) => eval_node(a, args) * eval_node(b, args),
        Node::Div(a, b) => eval_node(a, args) / eval_node(b, args),
        Node::Pow(a, b) => {
            let base = eval_node(a, args);
            match constant_value(b) {
                Some(p) if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 => base.powi(p as i32),
                Some(p) => base.powf(p),
                None => (eval_node(b, args) * base.ln()).exp(),
            }
        }
        Node::Call(f, a) => {
            let x = eval_node(a, args);
            match f {
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
            }
        }
    }
}

fn constant_value(n: &Node) -> Option<f64> {
    match n {
        Node::Const(c) => Some(*c),
        Node::Neg(a) => constant_value(a).map(|v| -v),
        Node::Add(a, b) => Some(constant_value(a)? + constant_value(b)?),
        Node::Sub(a, b) => Some(constant_value(a)? - constant_value(b)?),
        Node::Mul(a, b) => Some(constant_value(a)? * constant_value(b)?),
        Node::Div(a, b) => Some(constant_value(a)? / constant_value(b)?),
        Node::Pow(a, b) => Some(constant_value(a)?.powf(constant_value(b)?)),
        _ => None,
    }
}

/// A one-variable expression as a [`Univariate`] function.
#[derive(Debug, Clone)]
pub struct ExprFn(pub Expr);

impl ExprFn {
    pub fn parse(src: &str, var: &str) -> Result<Self, ParseError> {
        Ok(Self(Expr::parse(src, &[var])?))
    }
}

impl Univariate for ExprFn {
    fn jet(&self, s: f64, order: usize) -> nijhydro::Result<Jet1D> {
        let j = self.0.eval(&[Jet1D::variable(s, order)]);
        if !j.is_finite() {
            return Err(nijhydro::Error::Evaluation(format!(
                "`{}` is not finite at {s}",
                self.0.text()
            )));
        }
        Ok(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nijhydro::dual::Dual2;

    fn ev(src: &str, x: f64) -> f64 {
        Expr::parse(src, &["x"]).unwrap().eval(&[x])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0), 512.0);
        assert_eq!(ev("-x^2", 3.0), -9.0);
        assert_eq!(ev("x^-1", 4.0), 0.25);
        assert_eq!(ev("(1 - x) / 2 - 1", 5.0), -3.0);
        assert_eq!(ev("1.5e-1 * 2E1", 0.0), 3.0);
    }

    #[test]
    fn functions_and_constants() {
        assert!((ev("sin(pi/2) + cos(0) + log(e) + exp(0)", 0.0) - 4.0).abs() < 1e-15);
        assert!((ev("x ^ x", 2.0) - 4.0).abs() < 1e-14);
        assert!((ev("x ^ 0.5", 9.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn jets_carry_derivatives() {
        let f = ExprFn::parse("sin(s) * s^2", "s").unwrap();
        let j = f.jet(0.7, 3).unwrap();
        let (s, c) = (0.7f64.sin(), 0.7f64.cos());
        assert!((j.derivative(1) - (c * 0.49 + 2.0 * 0.7 * s)).abs() < 1e-14);
        assert!((j.derivative(3) - (-c * 0.49 - 6.0 * 0.7 * s + 6.0 * c)).abs() < 1e-12);
        assert!(ExprFn::parse("log(s)", "s").unwrap().jet(-1.0, 1).is_err());
    }

    #[test]
    fn several_variables_with_duals() {
        let e = Expr::parse("u1 * u2^2 + exp(u3)", &["u1", "u2", "u3"]).unwrap();
        let d = e.eval(&Dual2::variables(&[1.0, 2.0, 0.0]));
        assert_eq!(d.value, 5.0);
        assert_eq!(d.grad, vec![4.0, 4.0, 1.0]);
        assert_eq!(d.hess_at(0, 1), 4.0);
    }

    #[test]
    fn malformed_input_is_located() {
        for (src, pos) in [("1 +", 3), ("x $ 2", 2), ("foo(x)", 0), ("(x", 2), ("x x", 2), ("sin x", 4)] {
            let e = Expr::parse(src, &["x"]).unwrap_err();
            assert_eq!(e.position, pos, "{src}: {e}");
        }
    }
}
