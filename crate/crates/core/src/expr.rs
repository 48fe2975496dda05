//! A small arithmetic language for μ(t), φ(t) and ℸ(t, w).
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;            (* right-associative *)
//! primary = number | variable | func "(" expr ")" | "(" expr ")" ;
//! variable = "t" | "w" digit { digit } ;        (* w1 .. wn *)
//! func    = "sin" | "cos" | "exp" | "log" | "sqrt" | "abs" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! Evaluation never returns NaN or infinity silently: every operation checks
//! its domain and reports an [`ExprError::Domain`] instead.

use std::fmt;

use crate::error::ExprError;

type EResult<T> = std::result::Result<T, ExprError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    /// Zero-based state component: `w1` is `W(0)`.
    W(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
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
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable values for evaluation. `t` may be absent for closed expressions.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub t: Option<f64>,
    pub w: &'a [f64],
}

impl<'a> Bindings<'a> {
    pub fn t(t: f64) -> Self {
        Bindings { t: Some(t), w: &[] }
    }

    pub fn tw(t: f64, w: &'a [f64]) -> Self {
        Bindings { t: Some(t), w }
    }

    fn get(&self, v: Var) -> EResult<f64> {
        match v {
            Var::T => self.t.ok_or_else(|| ExprError::Unbound("t".into())),
            Var::W(i) => self.w.get(i).copied().ok_or_else(|| ExprError::Unbound(format!("w{}", i + 1))),
        }
    }
}

pub fn parse(source: &str) -> EResult<Expr> {
    Expr::parse(source)
}

impl Expr {
    pub fn parse(source: &str) -> EResult<Expr> {
        let mut p = Parser { src: source.as_bytes(), pos: 0 };
        p.skip_ws();
        if p.at_end() {
            return Err(ExprError::Syntax { pos: 0, msg: "empty expression".into() });
        }
        let e = p.expr()?;
        p.skip_ws();
        if !p.at_end() {
            return Err(p.err(format!("unexpected `{}`", p.peek_char())));
        }
        Ok(e)
    }

    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 0.0)
    }

    /// Largest state index referenced (`w3` → `Some(2)`).
    pub fn max_w_index(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Var(Var::T) => None,
            Expr::Var(Var::W(i)) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_w_index(),
            Expr::Bin(_, a, b) => match (a.max_w_index(), b.max_w_index()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Replaces `w_i` by the literal `w[i]`; indices past `w` are kept.
    pub fn substitute_state(&self, w: &[f64]) -> Expr {
        match self {
            Expr::Var(Var::W(i)) if *i < w.len() => Expr::Num(w[*i]),
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute_state(w))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute_state(w))),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.substitute_state(w)), Box::new(b.substitute_state(w))),
        }
    }

    pub fn uses_state(&self) -> bool {
        self.max_w_index().is_some()
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Bin(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn eval(&self, b: &Bindings) -> EResult<f64> {
        let v = match self {
            Expr::Num(x) => return Ok(*x),
            Expr::Var(v) => return b.get(*v),
            Expr::Neg(a) => -a.eval(b)?,
            Expr::Bin(op, l, r) => {
                let x = l.eval(b)?;
                let y = r.eval(b)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(ExprError::Domain(format!("division by zero ({x}/0)")));
                        }
                        x / y
                    }
                    BinOp::Pow => pow(x, y)?,
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval(b)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Abs => x.abs(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(ExprError::Domain(format!("log of nonpositive value {x}")));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt of negative value {x}")));
                        }
                        x.sqrt()
                    }
                }
            }
        };
        finite(v, self)
    }

    /// Value and partial derivative with respect to `wrt` (forward-mode
    /// dual numbers). The derivative may be infinite, e.g. `sqrt(t)` at 0.
    pub fn eval_dual(&self, b: &Bindings, wrt: Var) -> EResult<(f64, f64)> {
        let (v, d) = match self {
            Expr::Num(x) => return Ok((*x, 0.0)),
            Expr::Var(v) => return Ok((b.get(*v)?, if *v == wrt { 1.0 } else { 0.0 })),
            Expr::Neg(a) => {
                let (x, dx) = a.eval_dual(b, wrt)?;
                (-x, -dx)
            }
            Expr::Bin(op, l, r) => {
                let (x, dx) = l.eval_dual(b, wrt)?;
                let (y, dy) = r.eval_dual(b, wrt)?;
                match op {
                    BinOp::Add => (x + y, dx + dy),
                    BinOp::Sub => (x - y, dx - dy),
                    BinOp::Mul => (x * y, dx * y + x * dy),
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(ExprError::Domain(format!("division by zero ({x}/0)")));
                        }
                        (x / y, (dx * y - x * dy) / (y * y))
                    }
                    BinOp::Pow => {
                        let v = pow(x, y)?;
                        let mut d = 0.0;
                        if dx != 0.0 {
                            d += if y == 0.0 { 0.0 } else { y * pow(x, y - 1.0).unwrap_or(f64::INFINITY) * dx };
                        }
                        if dy != 0.0 {
                            if x <= 0.0 {
                                return Err(ExprError::Domain(format!(
                                    "derivative of {x}^y with respect to the exponent"
                                )));
                            }
                            d += v * x.ln() * dy;
                        }
                        (v, d)
                    }
                }
            }
            Expr::Call(f, a) => {
                let (x, dx) = a.eval_dual(b, wrt)?;
                match f {
                    Func::Sin => (x.sin(), x.cos() * dx),
                    Func::Cos => (x.cos(), -x.sin() * dx),
                    Func::Exp => {
                        let e = x.exp();
                        (e, e * dx)
                    }
                    Func::Abs => (x.abs(), if x < 0.0 { -dx } else { dx }),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(ExprError::Domain(format!("log of nonpositive value {x}")));
                        }
                        (x.ln(), dx / x)
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt of negative value {x}")));
                        }
                        let s = x.sqrt();
                        (s, if dx == 0.0 { 0.0 } else { dx / (2.0 * s) })
                    }
                }
            }
        };
        Ok((finite(v, self)?, d))
    }
}

fn finite(v: f64, e: &Expr) -> EResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::Domain(format!("non-finite result of `{e}`")))
    }
}

fn pow(x: f64, y: f64) -> EResult<f64> {
    let integral = y.fract() == 0.0 && y.abs() <= i32::MAX as f64;
    if x == 0.0 && y < 0.0 {
        return Err(ExprError::Domain(format!("0^{y} (division by zero)")));
    }
    if x < 0.0 && !integral {
        return Err(ExprError::Domain(format!("negative base {x} with non-integer exponent {y}")));
    }
    Ok(if integral { x.powi(y as i32) } else { x.powf(y) })
}

/// Fully parenthesised output; `parse(e.to_string())` is structurally `e`
/// for every tree with non-negative finite literals (the only ones the
/// parser can produce).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Var(Var::W(i)) => write!(f, "w{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_char(&self) -> char {
        self.peek().map(char::from).unwrap_or('\0')
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn err(&self, msg: impl Into<String>) -> ExprError {
        ExprError::Syntax { pos: self.pos, msg: msg.into() }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> EResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> EResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> EResult<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> EResult<Expr> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> EResult<Expr> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(_) => Err(self.err(format!("unexpected `{}`", self.peek_char()))),
        }
    }

    fn number(&mut self) -> EResult<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(ExprError::Syntax { pos: start, msg: "malformed number".into() });
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                return Err(self.err("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let x: f64 = text
            .parse()
            .map_err(|_| ExprError::Syntax { pos: start, msg: format!("malformed number `{text}`") })?;
        if !x.is_finite() {
            return Err(ExprError::Syntax { pos: start, msg: format!("number `{text}` overflows") });
        }
        Ok(Expr::Num(x))
    }

    fn identifier(&mut self) -> EResult<Expr> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.err(format!("expected `(` after `{name}`")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err("expected `)`"));
            }
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        if name == "t" {
            return Ok(Expr::Var(Var::T));
        }
        if let Some(idx) = name.strip_prefix('w') {
            if !idx.is_empty() && !idx.starts_with('0') && idx.bytes().all(|c| c.is_ascii_digit()) {
                if let Ok(k) = idx.parse::<usize>() {
                    return Ok(Expr::Var(Var::W(k - 1)));
                }
            }
        }
        Err(ExprError::UnknownIdentifier { name: name.to_string(), pos: start })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, t: f64) -> f64 {
        parse(s).unwrap().eval(&Bindings::t(t)).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2+3*4", 0.0), 14.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("-2^2", 0.0), -4.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("8/4/2", 0.0), 1.0);
        assert_eq!(ev("8-4-2", 0.0), 2.0);
    }

    #[test]
    fn tree_shapes() {
        let two_t_plus_one = Expr::bin(
            BinOp::Add,
            Expr::bin(BinOp::Mul, Expr::Num(2.0), Expr::Var(Var::T)),
            Expr::Num(1.0),
        );
        assert_eq!(parse("2*t+1").unwrap(), two_t_plus_one);
        assert_eq!(parse("t^3").unwrap(), Expr::bin(BinOp::Pow, Expr::Var(Var::T), Expr::Num(3.0)));
        let forcing = parse("exp(t)/(4*(1+exp(t)))*sin(w1)").unwrap();
        assert_eq!(forcing.max_w_index(), Some(0));
        let v = forcing.eval(&Bindings::tw(0.0, &[std::f64::consts::FRAC_PI_2])).unwrap();
        assert!((v - 0.125).abs() < 1e-15);
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(ev("2*t+1", 0.0), 1.0);
        assert!((ev("t^3", -0.3) + 0.027).abs() < 1e-16);
        assert!((ev("sqrt(t)", 0.36) - 0.6).abs() < 1e-16);
        assert_eq!(ev("1.5e2 + .5", 0.0), 150.5);
    }

    #[test]
    fn errors_are_reported() {
        assert!(matches!(parse("2*x"), Err(ExprError::UnknownIdentifier { pos: 2, .. })));
        assert!(matches!(parse("w0"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("(1+2"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse(""), Err(ExprError::Syntax { pos: 0, .. })));
        assert!(matches!(parse("1 2"), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(parse("sin t"), Err(ExprError::Syntax { .. })));
        let b = Bindings::t(-1.0);
        assert!(matches!(parse("log(t)").unwrap().eval(&b), Err(ExprError::Domain(_))));
        assert!(matches!(parse("sqrt(t)").unwrap().eval(&b), Err(ExprError::Domain(_))));
        assert!(matches!(parse("1/(t+1)").unwrap().eval(&b), Err(ExprError::Domain(_))));
        assert!(matches!(parse("t^0.5").unwrap().eval(&b), Err(ExprError::Domain(_))));
        assert!(matches!(parse("exp(1000)").unwrap().eval(&b), Err(ExprError::Domain(_))));
        assert!(matches!(parse("w2").unwrap().eval(&Bindings::tw(0.0, &[1.0])), Err(ExprError::Unbound(_))));
        assert!(matches!(parse("t").unwrap().eval(&Bindings::default()), Err(ExprError::Unbound(_))));
    }

    #[test]
    fn dual_derivatives() {
        let e = parse("t^3 + sin(2*t) - exp(t)/t").unwrap();
        let t = 0.7;
        let (v, d) = e.eval_dual(&Bindings::t(t), Var::T).unwrap();
        assert_eq!(v, e.eval(&Bindings::t(t)).unwrap());
        let exact = 3.0 * t * t + 2.0 * (2.0 * t).cos() - (t.exp() * t - t.exp()) / (t * t);
        assert!((d - exact).abs() < 1e-13);
        let g = parse("exp(t)/(4*(1+exp(t)))*sin(w1)").unwrap();
        let (_, dw) = g.eval_dual(&Bindings::tw(0.2, &[0.4]), Var::W(0)).unwrap();
        assert!((dw - 0.2f64.exp() / (4.0 * (1.0 + 0.2f64.exp())) * 0.4f64.cos()).abs() < 1e-15);
    }
}
