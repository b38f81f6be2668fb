//! A small expression language for rapidity and acceleration profiles.
//!
//! ```text
//! spec    := ("eta" | "alpha") "=" expr
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" unary)?
//! primary := number | "tau" | "pi" | func "(" expr ")" | "(" expr ")"
//! func    := sin | cos | tanh | exp | ln | sqrt | abs
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-tau^2`
//! is `-(tau^2)` and `2^-1` is `2^(-1)`. Whitespace is ignored.

use crate::error::TrajectoryError;
use crate::taylor::{Jet, MAX_ORDER};
use crate::trajectory::{AccelerationProfile, JetProfile, Onset, ProfileTrajectory};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
    Syntax { offset: usize, expected: Vec<String>, found: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` at byte {offset} takes {expected} argument(s), got {found}")]
    Arity { name: String, offset: usize, expected: usize, found: usize },
    #[error("domain error at byte {offset}: {what}")]
    Domain { what: String, offset: usize },
    #[error("derivative order {0} exceeds the supported maximum of 4")]
    Order(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(&self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Tau,
    Pi,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Expression node with the byte offset of its first token. Equality ignores
/// offsets.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub offset: usize,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Eta,
    Alpha,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, DslError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| DslError::Syntax {
                offset: start,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if b"+-*/^()=,".contains(&c) {
            out.push((Tok::Sym(c as char), i));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap();
            return Err(DslError::Syntax {
                offset: i,
                expected: vec!["expression".into()],
                found: format!("`{ch}`"),
            });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> DslError {
        DslError::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), DslError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&c.to_string()]))
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        while let Tok::Sym(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            let offset = lhs.offset;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), offset };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        while let Tok::Sym(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            let offset = lhs.offset;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), offset };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if *self.peek() == Tok::Sym('-') {
            let (_, offset) = self.bump();
            let inner = self.unary()?;
            return Ok(Expr { kind: ExprKind::Neg(Box::new(inner)), offset });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exponent = self.unary()?;
            let offset = base.offset;
            return Ok(Expr { kind: ExprKind::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)), offset });
        }
        Ok(base)
    }

    fn arguments(&mut self) -> Result<Vec<Expr>, DslError> {
        self.expect('(')?;
        let mut args = Vec::new();
        if *self.peek() == Tok::Sym(')') {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek() {
                Tok::Sym(',') => {
                    self.bump();
                }
                Tok::Sym(')') => {
                    self.bump();
                    return Ok(args);
                }
                _ => return Err(self.error(&[")", ","])),
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Num(v), offset })
            }
            Tok::Sym('(') => {
                self.bump();
                let mut inner = self.expr()?;
                self.expect(')')?;
                inner.offset = offset;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                let called = *self.peek() == Tok::Sym('(');
                if let Some(func) = Func::from_name(&name) {
                    if !called {
                        return Err(DslError::Arity { name, offset, expected: 1, found: 0 });
                    }
                    let mut args = self.arguments()?;
                    if args.len() != 1 {
                        return Err(DslError::Arity { name, offset, expected: 1, found: args.len() });
                    }
                    return Ok(Expr { kind: ExprKind::Call(func, Box::new(args.remove(0))), offset });
                }
                let kind = match name.as_str() {
                    "tau" => ExprKind::Tau,
                    "pi" => ExprKind::Pi,
                    _ => return Err(DslError::UnknownIdentifier { name, offset }),
                };
                if called {
                    let found = self.arguments()?.len();
                    return Err(DslError::Arity { name, offset, expected: 0, found });
                }
                Ok(Expr { kind, offset })
            }
            _ => Err(self.error(&["number", "identifier", "(", "-"])),
        }
    }
}

/// Parses a bare expression (no `eta =` / `alpha =` prefix).
pub fn parse_expr(source: &str) -> Result<Expr, DslError> {
    let mut p = Parser { toks: lex(source)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}

pub fn parse(source: &str) -> Result<ProfileSpec, DslError> {
    let mut p = Parser { toks: lex(source)?, pos: 0 };
    let kind = match p.peek().clone() {
        Tok::Ident(name) if name == "eta" => ProfileKind::Eta,
        Tok::Ident(name) if name == "alpha" => ProfileKind::Alpha,
        _ => return Err(p.error(&["eta", "alpha"])),
    };
    p.bump();
    p.expect('=')?;
    let expr = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(ProfileSpec { kind, expr })
}

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        ExprKind::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        ExprKind::Neg(_) => 3,
        ExprKind::Binary(BinOp::Pow, ..) => 4,
        ExprKind::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
        _ => 5,
    }
}

fn write_prec(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "(")?;
        write_expr(f, e)?;
        write!(f, ")")
    } else {
        write_expr(f, e)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match &e.kind {
        ExprKind::Num(v) => write!(f, "{v}"),
        ExprKind::Tau => write!(f, "tau"),
        ExprKind::Pi => write!(f, "pi"),
        ExprKind::Neg(x) => {
            write!(f, "-")?;
            write_prec(f, x, 3)
        }
        ExprKind::Binary(op, l, r) => {
            let (lmin, rmin) = match op {
                BinOp::Add | BinOp::Sub => (1, 2),
                BinOp::Mul | BinOp::Div => (2, 3),
                BinOp::Pow => (5, 3),
            };
            write_prec(f, l, lmin)?;
            match op {
                BinOp::Pow => write!(f, "^")?,
                _ => write!(f, " {} ", op.symbol())?,
            }
            write_prec(f, r, rmin)
        }
        ExprKind::Call(func, x) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, x)?;
            write!(f, ")")
        }
    }
}

/// Canonical form: minimal parentheses, shortest round-trip numbers.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

impl fmt::Display for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            ProfileKind::Eta => "eta",
            ProfileKind::Alpha => "alpha",
        };
        write!(f, "{k} = {}", self.expr)
    }
}

fn domain(what: impl Into<String>, offset: usize) -> DslError {
    DslError::Domain { what: what.into(), offset }
}

fn constant_integer(j: &Jet) -> Option<i64> {
    let v = j.value();
    let is_const = j.coeffs[1..].iter().all(|c| *c == 0.0);
    (is_const && v.fract() == 0.0 && v.abs() <= 1024.0).then_some(v as i64)
}

/// Evaluates the expression as a Taylor jet in `tau`.
pub fn eval_jet(e: &Expr, tau: &Jet) -> Result<Jet, DslError> {
    let out = match &e.kind {
        ExprKind::Num(v) => Jet::constant(*v),
        ExprKind::Tau => *tau,
        ExprKind::Pi => Jet::constant(std::f64::consts::PI),
        ExprKind::Neg(x) => -eval_jet(x, tau)?,
        ExprKind::Binary(op, l, r) => {
            let a = eval_jet(l, tau)?;
            let b = eval_jet(r, tau)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b.value() == 0.0 {
                        return Err(domain("division by zero", r.offset));
                    }
                    a / b
                }
                BinOp::Pow => {
                    if let Some(n) = constant_integer(&b) {
                        if n < 0 && a.value() == 0.0 {
                            return Err(domain("zero raised to a negative power", e.offset));
                        }
                        a.powi(n)
                    } else if a.value() > 0.0 {
                        a.powj(&b)
                    } else {
                        return Err(domain("non-positive base with non-integer exponent", e.offset));
                    }
                }
            }
        }
        ExprKind::Call(func, x) => {
            let a = eval_jet(x, tau)?;
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tanh => a.tanh(),
                Func::Exp => a.exp(),
                Func::Ln => {
                    if a.value() <= 0.0 {
                        return Err(domain("logarithm of a non-positive value", e.offset));
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if a.value() <= 0.0 {
                        return Err(domain("square root of a non-positive value", e.offset));
                    }
                    a.sqrt()
                }
                Func::Abs => {
                    if a.value() == 0.0 {
                        return Err(domain("abs is not differentiable at zero", e.offset));
                    }
                    a.scale(a.value().signum())
                }
            }
        }
    };
    if !out.is_finite() {
        return Err(domain("non-finite value", e.offset));
    }
    Ok(out)
}

/// Value and derivatives `1..=order` of the expression at `tau`.
pub fn evaluate_with_derivatives(e: &Expr, tau: f64, order: usize) -> Result<Vec<f64>, DslError> {
    if order > MAX_ORDER {
        return Err(DslError::Order(order));
    }
    Ok(eval_jet(e, &Jet::variable(tau))?.derivatives(order))
}

impl ProfileSpec {
    /// Builds the trajectory. `onset` freezes the motion before the given
    /// proper time (rapidity held at its onset value for `eta` profiles, at
    /// zero for `alpha` profiles, which require an onset). `panel` sets the
    /// position-checkpoint spacing.
    pub fn trajectory(&self, onset: Option<f64>, panel: f64) -> Result<ProfileTrajectory, TrajectoryError> {
        let expr = Arc::new(self.expr.clone());
        let name = self.to_string();
        match self.kind {
            ProfileKind::Eta => {
                let e2 = expr.clone();
                let profile = JetProfile::fallible(
                    move |t| eval_jet(&e2, &t).map_err(|err| TrajectoryError::Profile(err.to_string())),
                    name,
                );
                let onset = match onset {
                    Some(t) => {
                        let eta = eval_jet(&expr, &Jet::variable(t))
                            .map_err(|err| TrajectoryError::Profile(err.to_string()))?
                            .value();
                        Some(Onset { tau: t, eta_before: eta })
                    }
                    None => None,
                };
                ProfileTrajectory::new(Arc::new(profile), onset, panel)
            }
            ProfileKind::Alpha => {
                let t0 = onset.ok_or_else(|| {
                    TrajectoryError::InvalidParameter("acceleration profiles need an onset time".into())
                })?;
                let profile = AccelerationProfile::fallible(
                    move |t| eval_jet(&expr, &t).map_err(|err| TrajectoryError::Profile(err.to_string())),
                    t0,
                    0.0,
                    name,
                );
                ProfileTrajectory::new(Arc::new(profile), Some(Onset { tau: t0, eta_before: 0.0 }), panel)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Trajectory;

    #[test]
    fn parses_grammar_examples() {
        let s = parse("eta = 0.2*tanh(tau/5)").unwrap();
        assert_eq!(s.kind, ProfileKind::Eta);
        assert_eq!(s.to_string(), "eta = 0.2 * tanh(tau / 5)");
        let s = parse("alpha = 0.01*sin(0.05*tau)").unwrap();
        assert_eq!(s.kind, ProfileKind::Alpha);
    }

    #[test]
    fn unclosed_paren_reports_offset_and_expectation() {
        match parse("eta = 2*(tau") {
            Err(DslError::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 12);
                assert_eq!(expected, vec![")".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identifier_and_arity_errors() {
        assert!(matches!(parse("eta = foo(tau)"), Err(DslError::UnknownIdentifier { offset: 6, .. })));
        assert!(matches!(parse("eta = sin(tau, 1)"), Err(DslError::Arity { found: 2, .. })));
        assert!(matches!(parse("eta = tau(1)"), Err(DslError::Arity { expected: 0, .. })));
        assert!(matches!(parse("eta = sin"), Err(DslError::Arity { found: 0, .. })));
        assert!(matches!(parse("beta = tau"), Err(DslError::Syntax { offset: 0, .. })));
        assert!(matches!(parse("eta = 1 $ 2"), Err(DslError::Syntax { offset: 8, .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("-tau^2").unwrap();
        assert!(matches!(e.kind, ExprKind::Neg(_)));
        let v = evaluate_with_derivatives(&parse_expr("2^3^2").unwrap(), 0.0, 0).unwrap();
        assert_eq!(v[0], 512.0);
        let v = evaluate_with_derivatives(&parse_expr("2^-1 + 8/4/2 - 1 - 1").unwrap(), 0.0, 0).unwrap();
        assert_eq!(v[0], -0.5);
        let v = evaluate_with_derivatives(&parse_expr("  pi*  2 ").unwrap(), 0.0, 0).unwrap();
        assert_eq!(v[0], 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn derivative_examples() {
        let d = evaluate_with_derivatives(&parse_expr("tau^2").unwrap(), 3.0, 2).unwrap();
        assert_eq!(d, vec![9.0, 6.0, 2.0]);
        let d = evaluate_with_derivatives(&parse_expr("exp(tau)").unwrap(), 0.0, 3).unwrap();
        assert_eq!(d, vec![1.0, 1.0, 1.0, 1.0]);
        let d = evaluate_with_derivatives(&parse_expr("0.2*tanh(tau/5)").unwrap(), 0.0, 1).unwrap();
        assert_eq!(d[0], 0.0);
        assert!((d[1] - 0.04).abs() < 1e-17);
        assert!(evaluate_with_derivatives(&parse_expr("tau").unwrap(), 0.0, 5).is_err());
    }

    #[test]
    fn domain_errors_carry_location() {
        let e = parse_expr("1 + ln(tau)").unwrap();
        assert_eq!(
            evaluate_with_derivatives(&e, -1.0, 1),
            Err(DslError::Domain { what: "logarithm of a non-positive value".into(), offset: 4 })
        );
        let e = parse_expr("1/(tau-1)").unwrap();
        assert!(matches!(evaluate_with_derivatives(&e, 1.0, 1), Err(DslError::Domain { offset: 2, .. })));
        let e = parse_expr("tau^0.5").unwrap();
        assert!(evaluate_with_derivatives(&e, -2.0, 1).is_err());
        let e = parse_expr("tau^3").unwrap();
        assert_eq!(evaluate_with_derivatives(&e, -2.0, 1).unwrap(), vec![-8.0, 12.0]);
    }

    #[test]
    fn printer_round_trips() {
        for src in ["-(tau+1)^2", "(-tau)^2", "(2^3)^2", "2^3^2", "tau - (1 - tau)", "-(-tau)", "1e-7*tau", "2^-tau"] {
            let e = parse_expr(src).unwrap();
            let again = parse_expr(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }

    #[test]
    fn eta_profile_trajectory_freezes_before_onset() {
        let t = parse("eta = 0.1*sin(tau)").unwrap().trajectory(Some(1.0), 0.1).unwrap();
        let before = t.rapidity(0.0).unwrap();
        assert_eq!(before.eta, 0.1 * 1f64.sin());
        assert_eq!(before.alpha, 0.0);
        assert!((t.rapidity(2.0).unwrap().alpha - 0.1 * 2f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn alpha_profile_integrates_to_rapidity() {
        let t = parse("alpha = 0.2").unwrap().trajectory(Some(0.0), 0.25).unwrap();
        let j = t.rapidity(3.0).unwrap();
        assert!((j.eta - 0.6).abs() < 1e-13);
        assert_eq!(j.alpha, 0.2);
        let t = parse("alpha = 0.01*sin(0.05*tau)").unwrap().trajectory(Some(0.0), 0.25).unwrap();
        let j = t.rapidity(10.0).unwrap();
        assert!((j.eta - 0.2 * (1.0 - 0.5f64.cos())).abs() < 1e-13);
        assert!(parse("alpha = 1").unwrap().trajectory(None, 0.25).is_err());
    }
}
