//! Small arithmetic expressions with symbolic differentiation.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers, named variables and the
//! functions `sin cos exp ln pow gamma`. `^` is right-associative and binds tighter than
//! unary minus, so `-x^2` is `-(x^2)`.

use std::fmt;

use fuzzyfrac::frac_ops::gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{msg} at column {col} of '{src}'")]
pub struct ParseError {
    pub msg: String,
    /// 1-based
    pub col: usize,
    pub src: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Gamma,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "gamma" => Func::Gamma,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Gamma => "gamma",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Gamma => gamma(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// index into the variable table given at parse time
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let err = |msg: String, col: usize| ParseError {
        msg,
        col,
        src: src.to_string(),
    };
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| err(format!("bad number '{s}'"), start + 1))?;
            out.push((Tok::Num(v), start + 1));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start + 1));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), i + 1));
            i += 1;
        } else {
            return Err(err(format!("unexpected character '{c}'"), i + 1));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [&'a str],
    src: &'a str,
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let col = self
            .toks
            .get(self.pos)
            .map(|t| t.1)
            .unwrap_or(self.src.chars().count() + 1);
        Err(ParseError {
            msg: msg.into(),
            col,
            src: self.src.to_string(),
        })
    }

    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some((Tok::Op(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some((tok, _)) = self.toks.get(self.pos).cloned() else {
            return self.err("unexpected end of expression");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.toks.get(self.pos + 1).map(|t| &t.0) == Some(&Tok::Op('(')) {
                    if name == "pow" {
                        self.pos += 2;
                        let a = self.expr()?;
                        self.expect(',')?;
                        let b = self.expr()?;
                        self.expect(')')?;
                        return Ok(Expr::Pow(Box::new(a), Box::new(b)));
                    }
                    let Some(f) = Func::from_name(&name) else {
                        return self.err(format!("unknown function '{name}'"));
                    };
                    self.pos += 2;
                    let a = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(f, Box::new(a)));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => {
                        self.pos += 1;
                        Ok(Expr::Var(i))
                    }
                    None => self.err(format!("unknown variable '{name}' (expected one of {})", self.vars.join(" "))),
                }
            }
            Tok::Op(c) => self.err(format!("unexpected '{c}'")),
        }
    }
}

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn is(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x + y),
        _ if is(&a, 0.0) => b,
        _ if is(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        _ if is(&b, 0.0) => a,
        _ if is(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x * y),
        _ if is(&a, 0.0) || is(&b, 0.0) => num(0.0),
        _ if is(&a, 1.0) => b,
        _ if is(&b, 1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is(&a, 0.0) => num(0.0),
        _ if is(&b, 1.0) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is(&b, 0.0) => num(1.0),
        _ if is(&b, 1.0) => a,
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

impl Expr {
    /// Parse `src`; identifiers other than function names must appear in `vars`.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, ParseError> {
        let toks = lex(src)?;
        let mut p = Parser { toks, pos: 0, vars, src };
        let e = p.expr()?;
        if p.pos < p.toks.len() {
            return p.err("trailing input");
        }
        Ok(e)
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => {
                let (x, y) = (a.eval(vars), b.eval(vars));
                if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
                    x.powi(y as i32)
                } else {
                    x.powf(y)
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(vars)),
        }
    }

    pub fn depends_on(&self, var: usize) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(i) => *i == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
        }
    }

    /// Symbolic derivative in variable `var`; `None` where a function has no derivative rule.
    pub fn derivative(&self, var: usize) -> Option<Expr> {
        if !self.depends_on(var) {
            return Some(num(0.0));
        }
        Some(match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(i) => num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(var)?),
            Expr::Add(a, b) => add(a.derivative(var)?, b.derivative(var)?),
            Expr::Sub(a, b) => sub(a.derivative(var)?, b.derivative(var)?),
            Expr::Mul(a, b) => add(
                mul(a.derivative(var)?, (**b).clone()),
                mul((**a).clone(), b.derivative(var)?),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.derivative(var)?, (**b).clone()),
                    mul((**a).clone(), b.derivative(var)?),
                ),
                pow((**b).clone(), num(2.0)),
            ),
            Expr::Pow(a, b) => {
                let (a, b) = ((**a).clone(), (**b).clone());
                if !b.depends_on(var) {
                    // b * a^(b-1) * a'
                    mul(
                        mul(b.clone(), pow(a.clone(), sub(b, num(1.0)))),
                        a.derivative(var)?,
                    )
                } else {
                    // a^b * (b' ln a + b a'/a)
                    mul(
                        pow(a.clone(), b.clone()),
                        add(
                            mul(b.derivative(var)?, call(Func::Ln, a.clone())),
                            div(mul(b, a.derivative(var)?), a),
                        ),
                    )
                }
            }
            Expr::Call(f, a) => {
                let inner = a.derivative(var)?;
                let outer = match f {
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Exp => call(Func::Exp, (**a).clone()),
                    Func::Ln => div(num(1.0), (**a).clone()),
                    Func::Gamma => return None,
                };
                mul(outer, inner)
            }
        })
    }

    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, vars: Option<&[&str]>) -> fmt::Result {
        let w = |e: &Expr, f: &mut fmt::Formatter<'_>| e.fmt_with(f, vars);
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => match vars {
                Some(v) => f.write_str(v[*i]),
                None => write!(f, "v{i}"),
            },
            Expr::Neg(a) => {
                f.write_str("(-")?;
                w(a, f)?;
                f.write_str(")")
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    Expr::Mul(..) => "*",
                    Expr::Div(..) => "/",
                    _ => "^",
                };
                f.write_str("(")?;
                w(a, f)?;
                f.write_str(op)?;
                w(b, f)?;
                f.write_str(")")
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                w(a, f)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, None)
    }
}
