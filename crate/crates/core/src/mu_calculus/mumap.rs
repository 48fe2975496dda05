//! The increasing reparametrisation μ and its inverse.

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Var};

#[derive(Debug, Clone, PartialEq)]
pub enum MuKind {
    Identity,
    /// √t for t ≥ 0, −√(−t) for t < 0.
    SqrtOddExtended,
    /// ln(1 + t), requires t > −1.
    Log1p,
    /// sign(t)·|t|^p, p > 0.
    Power(f64),
    Custom(Expr),
}

/// A strictly increasing map μ on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuMap {
    kind: MuKind,
    lo: f64,
    hi: f64,
}

impl MuMap {
    pub fn new(kind: MuKind, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::invalid(format!("empty μ domain [{lo}, {hi}]")));
        }
        match &kind {
            MuKind::Log1p if lo <= -1.0 => {
                return Err(Error::invalid("log1p μ needs a domain inside (−1, ∞)"));
            }
            MuKind::Power(p) if !(*p > 0.0) => {
                return Err(Error::invalid(format!("power μ needs p > 0, got {p}")));
            }
            MuKind::Custom(e) if e.uses_state() => {
                return Err(Error::invalid("μ must not reference state variables w1..wn"));
            }
            _ => {}
        }
        let mu = MuMap { kind, lo, hi };
        mu.validate()?;
        Ok(mu)
    }

    pub fn identity(lo: f64, hi: f64) -> Self {
        MuMap { kind: MuKind::Identity, lo, hi }
    }

    pub fn kind(&self) -> &MuKind {
        &self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.kind, MuKind::Identity) || matches!(self.kind, MuKind::Power(p) if p == 1.0)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { t, lo: self.lo, hi: self.hi })
        }
    }

    /// μ(t). Custom expressions that fail to evaluate yield NaN; `new`
    /// rejects maps that fail anywhere on a dense sample of the domain.
    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            MuKind::Identity => t,
            MuKind::SqrtOddExtended => t.signum() * t.abs().sqrt(),
            MuKind::Log1p => t.ln_1p(),
            MuKind::Power(p) => t.signum() * t.abs().powf(*p),
            MuKind::Custom(e) => e.eval(&Bindings::t(t)).unwrap_or(f64::NAN),
        }
    }

    /// μ′(t); may be +∞ at isolated points (e.g. √t at 0).
    pub fn deriv(&self, t: f64) -> f64 {
        match &self.kind {
            MuKind::Identity => 1.0,
            MuKind::SqrtOddExtended => 0.5 / t.abs().sqrt(),
            MuKind::Log1p => 1.0 / (1.0 + t),
            MuKind::Power(p) => p * t.abs().powf(p - 1.0),
            MuKind::Custom(e) => e.eval_dual(&Bindings::t(t), Var::T).map(|(_, d)| d).unwrap_or(f64::NAN),
        }
    }

    /// μ⁻¹(u), clamped to the domain.
    pub fn inverse(&self, u: f64) -> f64 {
        let t = match &self.kind {
            MuKind::Identity => u,
            MuKind::SqrtOddExtended => u.signum() * u * u,
            MuKind::Log1p => u.exp_m1(),
            MuKind::Power(p) => u.signum() * u.abs().powf(1.0 / p),
            MuKind::Custom(_) => return self.invert_numerically(u),
        };
        t.clamp(self.lo, self.hi)
    }

    fn invert_numerically(&self, u: f64) -> f64 {
        let (mut a, mut b) = (self.lo, self.hi);
        if u <= self.eval(a) {
            return a;
        }
        if u >= self.eval(b) {
            return b;
        }
        let mut t = 0.5 * (a + b);
        for _ in 0..200 {
            let f = self.eval(t) - u;
            if f == 0.0 {
                return t;
            }
            if f > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let d = self.deriv(t);
            let newton = t - f / d;
            t = if d.is_finite() && d > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
                break;
            }
        }
        t
    }

    /// Sampled checks: strictly increasing, positive derivative, and
    /// derivative consistent with central differences away from the ends.
    pub fn validate(&self) -> Result<()> {
        const SAMPLES: usize = 1000;
        let span = self.hi - self.lo;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=SAMPLES {
            let t = self.lo + span * k as f64 / SAMPLES as f64;
            let u = self.eval(t);
            if !u.is_finite() {
                return Err(Error::invalid(format!("μ({t}) is not finite")));
            }
            if u <= prev {
                return Err(Error::invalid(format!("μ is not strictly increasing near t = {t}")));
            }
            prev = u;
            if k > 0 && k < SAMPLES && !(self.deriv(t) > 0.0) {
                return Err(Error::invalid(format!("μ′({t}) is not positive")));
            }
        }
        let h = 1e-6 * span;
        for k in 1..=100 {
            let t = self.lo + span * (k as f64 - 0.5) / 100.0;
            if t - self.lo < 1e3 * h || self.hi - t < 1e3 * h || t.abs() < 1e3 * h {
                continue;
            }
            let fd = (self.eval(t + h) - self.eval(t - h)) / (2.0 * h);
            let d = self.deriv(t);
            if (fd - d).abs() > 1e-6 * d.abs().max(1e-300) {
                return Err(Error::invalid(format!("μ′ inconsistent with μ at t = {t}: {d} vs {fd}")));
            }
        }
        Ok(())
    }
}
