//! A small arithmetic expression language for metric, map and displacement components.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-2^2 = -4` and
//! `2^3^2 = 512`. Variables are `x1`, `x2`, `x3`; functions are `sin cos exp log sqrt`.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Parse tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    /// Zero-based coordinate index (`x1` is `Var(0)`).
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    /// Byte offset into the source text.
    pub offset: usize,
    pub expected: Vec<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at offset {}: {}", self.offset, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    LogDomain(f64),
    SqrtDomain(f64),
    DivisionByZero,
    NonFinite,
    MissingVariable(usize),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::LogDomain(v) => write!(f, "log of non-positive argument {v}"),
            EvalError::SqrtDomain(v) => write!(f, "sqrt of non-positive argument {v}"),
            EvalError::DivisionByZero => write!(f, "division by zero"),
            EvalError::NonFinite => write!(f, "non-finite result"),
            EvalError::MissingVariable(i) => write!(f, "variable x{} is not bound", i + 1),
        }
    }
}

impl std::error::Error for EvalError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((Tok::End, start));
        }
        let c = bytes[start];
        if c.is_ascii_digit() || c == b'.' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut e = end + 1;
                if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                    e += 1;
                }
                if e < bytes.len() && bytes[e].is_ascii_digit() {
                    while e < bytes.len() && bytes[e].is_ascii_digit() {
                        e += 1;
                    }
                    end = e;
                }
            }
            let text = &self.src[start..end];
            let v: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                expected: vec!["number".into()],
                message: format!("malformed number '{text}'"),
            })?;
            self.pos = end;
            return Ok((Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        if b"+-*/^()".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Sym(c as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError {
            offset: start,
            expected: vec![],
            message: format!("unexpected character '{ch}'"),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

const OPERAND: &[&str] = &["number", "identifier", "(", "-"];

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, at) = lexer.next()?;
        Ok(Self { lexer, tok, at })
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn fail(&self, expected: &[&str]) -> ParseError {
        let found = match &self.tok {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Sym(c) => format!("'{c}'"),
            Tok::End => "end of input".into(),
        };
        ParseError {
            offset: self.at,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            message: format!("unexpected {found}"),
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.tok == Tok::Sym(c) {
            self.bump()
        } else {
            Err(self.fail(&[&c.to_string()]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Sym('-') {
            self.bump()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok == Tok::Sym('^') {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.at;
                if name == "pi" {
                    self.bump()?;
                    return Ok(Expr::Pi);
                }
                if let Some(idx) = variable_index(&name) {
                    self.bump()?;
                    return Ok(Expr::Var(idx));
                }
                if let Some(func) = Func::from_name(&name) {
                    self.bump()?;
                    self.expect_sym('(')?;
                    let arg = self.expr()?;
                    self.expect_sym(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                Err(ParseError {
                    offset: at,
                    expected: vec!["x1".into(), "x2".into(), "x3".into(), "pi".into(), "function".into()],
                    message: format!("unknown identifier '{name}'"),
                })
            }
            _ => Err(self.fail(OPERAND)),
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    match name {
        "x1" => Some(0),
        "x2" => Some(1),
        "x3" => Some(2),
        _ => None,
    }
}

/// Parses a complete expression; trailing input is an error.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.fail(&["+", "-", "*", "/", "^", "end of input"]));
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(i) => *x.get(*i).ok_or(EvalError::MissingVariable(*i))?,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x)?, b.eval(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(x)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(EvalError::LogDomain(a));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a <= 0.0 {
                            return Err(EvalError::SqrtDomain(a));
                        }
                        a.sqrt()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Call(_, a) => a.arity(),
            Expr::Bin(_, a, b) => a.arity().max(b.arity()),
        }
    }

    fn is_const(&self, c: f64) -> bool {
        matches!(self, Expr::Num(v) if *v == c)
    }

    fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    fn add(a: Expr, b: Expr) -> Expr {
        if a.is_const(0.0) {
            return b;
        }
        if b.is_const(0.0) {
            return a;
        }
        Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }

    fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_const(0.0) {
            return a;
        }
        if a.is_const(0.0) {
            return Expr::Neg(Box::new(b));
        }
        Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
    }

    fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_const(0.0) || b.is_const(0.0) {
            return Expr::num(0.0);
        }
        if a.is_const(1.0) {
            return b;
        }
        if b.is_const(1.0) {
            return a;
        }
        Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }

    fn div(a: Expr, b: Expr) -> Expr {
        if a.is_const(0.0) {
            return Expr::num(0.0);
        }
        if b.is_const(1.0) {
            return a;
        }
        Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
    }

    fn neg(a: Expr) -> Expr {
        match a {
            Expr::Num(v) => Expr::Num(-v),
            a => Expr::Neg(Box::new(a)),
        }
    }

    /// Symbolic partial derivative with respect to coordinate `var` (zero-based).
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi => Expr::num(0.0),
            Expr::Var(i) => Expr::num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.diff(var)),
            Expr::Bin(op, a, b) => {
                let (da, db) = (a.diff(var), b.diff(var));
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinOp::Add => Expr::add(da, db),
                    BinOp::Sub => Expr::sub(da, db),
                    BinOp::Mul => Expr::add(Expr::mul(da, b), Expr::mul(a, db)),
                    BinOp::Div => Expr::div(
                        Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a, db)),
                        Expr::mul(b.clone(), b),
                    ),
                    BinOp::Pow => {
                        if db.is_const(0.0) {
                            // d(a^c) = c a^(c-1) da
                            let c1 = Expr::sub(b.clone(), Expr::num(1.0));
                            let pw = Expr::Bin(BinOp::Pow, Box::new(a), Box::new(c1));
                            Expr::mul(Expr::mul(b, pw), da)
                        } else {
                            // d(a^b) = a^b (db ln a + b da / a)
                            let whole = Expr::Bin(BinOp::Pow, Box::new(a.clone()), Box::new(b.clone()));
                            let t1 = Expr::mul(db, Expr::Call(Func::Log, Box::new(a.clone())));
                            let t2 = Expr::div(Expr::mul(b, da), a);
                            Expr::mul(whole, Expr::add(t1, t2))
                        }
                    }
                }
            }
            Expr::Call(f, a) => {
                let da = a.diff(var);
                if da.is_const(0.0) {
                    return Expr::num(0.0);
                }
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::Call(Func::Cos, Box::new(a)),
                    Func::Cos => Expr::neg(Expr::Call(Func::Sin, Box::new(a))),
                    Func::Exp => Expr::Call(Func::Exp, Box::new(a)),
                    Func::Log => Expr::div(Expr::num(1.0), a),
                    Func::Sqrt => Expr::div(
                        Expr::num(1.0),
                        Expr::mul(Expr::num(2.0), Expr::Call(Func::Sqrt, Box::new(a))),
                    ),
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// Checks `|e(x) − e(x + 2π e_a)| ≤ 1e-9` on a `5^dim` probe lattice for every axis.
    pub fn check_periodic(&self, dim: usize) -> Result<(), PeriodicityError> {
        if self.arity() > dim {
            return Err(PeriodicityError::UnknownVariable(self.arity()));
        }
        let probes = 5usize.pow(dim as u32);
        let two_pi = 2.0 * std::f64::consts::PI;
        for p in 0..probes {
            let mut x = [0.0; 3];
            let mut rem = p;
            for xa in x.iter_mut().take(dim) {
                *xa = two_pi * ((rem % 5) as f64 + 0.37) / 5.0;
                rem /= 5;
            }
            let base = self.eval(&x).map_err(PeriodicityError::Eval)?;
            for a in 0..dim {
                let mut y = x;
                y[a] += two_pi;
                let shifted = self.eval(&y).map_err(PeriodicityError::Eval)?;
                let gap = (shifted - base).abs();
                if gap > 1e-9 {
                    return Err(PeriodicityError::NotPeriodic { axis: a, gap });
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PeriodicityError {
    UnknownVariable(usize),
    Eval(EvalError),
    NotPeriodic { axis: usize, gap: f64 },
}

impl fmt::Display for PeriodicityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeriodicityError::UnknownVariable(k) => write!(f, "uses x{k} beyond the manifold dimension"),
            PeriodicityError::Eval(e) => write!(f, "{e}"),
            PeriodicityError::NotPeriodic { axis, gap } => {
                write!(f, "not 2π-periodic along x{} (gap {gap:e})", axis + 1)
            }
        }
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| {
            if prec(e) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v:?})")
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Pi => write!(f, "pi"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, a, b) => {
                let (sym, p) = match op {
                    BinOp::Add => ('+', 1),
                    BinOp::Sub => ('-', 1),
                    BinOp::Mul => ('*', 2),
                    BinOp::Div => ('/', 2),
                    BinOp::Pow => ('^', 4),
                };
                if *op == BinOp::Pow {
                    wrap(f, a, 5)?;
                    write!(f, "^")?;
                    return wrap(f, b, 3);
                }
                wrap(f, a, p)?;
                write!(f, " {sym} ")?;
                wrap(f, b, p + 1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str) -> f64 {
        parse_expression(s).unwrap().eval(&[0.3, 0.7, 1.1]).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2^3^2"), 512.0);
        assert_eq!(ev("-2^2"), -4.0);
        assert_eq!(ev("2^-1"), 0.5);
        assert_eq!(ev("1 - 2 - 3"), -4.0);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(parse_expression("1 + 0.1*sin(x1)*cos(2*x2)").unwrap().eval(&[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn error_positions() {
        let e = parse_expression("sin(x1").unwrap_err();
        assert_eq!(e.offset, 6);
        assert_eq!(e.expected, vec![")".to_string()]);
        let e = parse_expression("foo(x1)").unwrap_err();
        assert_eq!(e.offset, 0);
        let e = parse_expression("1 +").unwrap_err();
        assert_eq!(e.offset, 3);
    }

    #[test]
    fn eval_domain_errors() {
        let e = parse_expression("log(x1)").unwrap();
        assert_eq!(e.eval(&[0.0]), Err(EvalError::LogDomain(0.0)));
        let e = parse_expression("sqrt(-1)").unwrap();
        assert!(matches!(e.eval(&[]), Err(EvalError::SqrtDomain(_))));
        let e = parse_expression("1/(x1-x1)").unwrap();
        assert_eq!(e.eval(&[1.0]), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for s in ["sin(x1)*cos(2*x2)", "exp(0.2*sin(x1))", "sqrt(2 + cos(x2))", "log(3 + sin(x1 + x2))", "(1 + 0.5*sin(x1))^3", "x1^x2", "1/(2 + cos(x1))"] {
            let e = parse_expression(s).unwrap();
            for var in 0..2 {
                let d = e.diff(var);
                let x = [0.4, 1.3];
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[var] += h;
                xm[var] -= h;
                let fd = (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h);
                assert!((d.eval(&x).unwrap() - fd).abs() < 1e-7, "{s} d/dx{}", var + 1);
            }
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["-2^2", "(1 - x1) - x2", "1 - (x1 - x2)", "2^3^2", "(2^3)^2", "-(x1 + 1)", "sin(x1)/(2*x2)", "x1 - -x2"] {
            let e = parse_expression(s).unwrap();
            let again = parse_expression(&e.to_string()).unwrap();
            assert_eq!(e, again, "{s} -> {e}");
        }
    }

    #[test]
    fn periodicity() {
        assert!(parse_expression("sin(x1)").unwrap().check_periodic(2).is_ok());
        assert!(matches!(
            parse_expression("x1").unwrap().check_periodic(2),
            Err(PeriodicityError::NotPeriodic { axis: 0, .. })
        ));
        assert!(parse_expression("cos(x3)").unwrap().check_periodic(2).is_err());
    }
}
