//! μ-fractional calculus: the μ-Riemann–Liouville integral, the μ-Caputo
//! derivative, Γ, and the quadrature machinery shared by the solvers.

mod mumap;
pub mod quadrature;
mod special;

pub use mumap::{MuKind, MuMap};
pub use quadrature::{gauss_legendre, panel, split_points, KernelCentre, QuadNode};
pub use special::{gamma, recip_gamma, PlusKernel};

use crate::error::{Error, Result};
use crate::Vector;

pub const DEFAULT_NODES: usize = 64;

fn check_interval(mu: &MuMap, a: f64, t: f64) -> Result<()> {
    mu.check(a)?;
    mu.check(t)?;
    if a > t {
        return Err(Error::invalid(format!("integration interval reversed: a = {a} > t = {t}")));
    }
    Ok(())
}

/// `(1/Γ(α)) ∫_a^t (μ(t) − μ(s))^(α−1) f(s) μ′(s) ds`.
///
/// `breakpoints` are points in `(a, t)` where `f` may lose smoothness.
pub fn rl_integral<F>(f: F, alpha: f64, mu: &MuMap, a: f64, t: f64, nodes: usize, breakpoints: &[f64]) -> Result<Vector>
where
    F: Fn(f64) -> Result<Vector>,
{
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("order α = {alpha} outside (0, 1]")));
    }
    check_interval(mu, a, t)?;
    let mut acc: Option<Vector> = None;
    let ut = mu.eval(t);
    let pts = split_points(a, t, breakpoints);
    for win in pts.windows(2) {
        let centre = KernelCentre { u: ut, kappa: alpha };
        for q in panel(mu, win[0], win[1], Some(centre), nodes) {
            let v = f(q.s)?;
            let k = if alpha == 1.0 { 1.0 } else { q.dist.powf(alpha - 1.0) };
            match &mut acc {
                Some(sum) => sum.axpy(q.weight * k, &v, 1.0),
                None => acc = Some(v * (q.weight * k)),
            }
        }
    }
    let sum = match acc {
        Some(s) => s,
        None => f(t)? * 0.0,
    };
    Ok(sum * recip_gamma(alpha))
}

/// How the first derivative inside a Caputo derivative was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference { step: f64 },
}

#[derive(Debug, Clone)]
pub struct CaputoValue {
    pub value: Vector,
    pub derivative: DerivativeSource,
}

/// Central difference with step `1e-6·(domain width)`, one-sided at the
/// domain ends.
pub fn finite_difference<F>(f: &F, mu: &MuMap, s: f64) -> Result<(Vector, f64)>
where
    F: Fn(f64) -> Result<Vector>,
{
    let (lo, hi) = mu.domain();
    let h = 1e-6 * (hi - lo);
    let d = if s - h < lo {
        (f(s + h)? - f(s)?) / h
    } else if s + h > hi {
        (f(s)? - f(s - h)?) / h
    } else {
        (f(s + h)? - f(s - h)?) / (2.0 * h)
    };
    Ok((d, h))
}

/// Order-α μ-Caputo derivative with base point `a`:
/// the order-(1−α) μ-RL integral of `f′/μ′`.
///
/// `df` is the analytic derivative when available; otherwise central
/// differences are used and reported in the result.
#[allow(clippy::too_many_arguments)]
pub fn caputo_deriv<F, D>(
    f: F,
    df: Option<D>,
    alpha: f64,
    mu: &MuMap,
    a: f64,
    t: f64,
    nodes: usize,
    breakpoints: &[f64],
) -> Result<CaputoValue>
where
    F: Fn(f64) -> Result<Vector>,
    D: Fn(f64) -> Result<Vector>,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("order α = {alpha} outside (0, 1)")));
    }
    let mut source = DerivativeSource::Analytic;
    let step = 1e-6 * (mu.domain().1 - mu.domain().0);
    let per_u = |s: f64| -> Result<Vector> {
        let d = match &df {
            Some(df) => df(s)?,
            None => finite_difference(&f, mu, s)?.0,
        };
        let m = mu.deriv(s);
        Ok(if m.is_infinite() { d * 0.0 } else { d / m })
    };
    if df.is_none() {
        source = DerivativeSource::FiniteDifference { step };
    }
    let value = rl_integral(per_u, 1.0 - alpha, mu, a, t, nodes, breakpoints)?;
    Ok(CaputoValue { value, derivative: source })
}

/// Convenience for scalar integrands.
pub fn scalar<F: Fn(f64) -> f64>(f: F) -> impl Fn(f64) -> Result<Vector> {
    move |s| Ok(Vector::from_element(1, f(s)))
}

/// Placeholder type for calls without an analytic derivative.
pub type NoDerivative = fn(f64) -> Result<Vector>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((gamma(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((gamma(0.5).unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!((gamma(5.0).unwrap() - 24.0).abs() < 1e-12);
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.5).is_err());
        assert_eq!(recip_gamma(0.0), 0.0);
        assert_eq!(recip_gamma(-3.0), 0.0);
        assert!((recip_gamma(-0.5) + 0.5 / std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn plus_kernel_truncates() {
        for p in [-0.7, 0.0, 0.3, 2.0] {
            assert_eq!(PlusKernel::eval(0.0, p), 0.0);
            assert_eq!(PlusKernel::eval(-1e-300, p), 0.0);
        }
        assert_eq!(PlusKernel::eval(4.0, 0.5), 2.0);
    }

    #[test]
    fn rl_of_constant_is_power() {
        let mu = MuMap::identity(-1.0, 2.0);
        let v = rl_integral(scalar(|_| 1.0), 0.5, &mu, 0.0, 1.0, 64, &[]).unwrap();
        assert!((v[0] - 1.0 / gamma(1.5).unwrap()).abs() < 1e-13);
        let v = rl_integral(scalar(|s| s), 0.5, &mu, 0.0, 1.0, 64, &[]).unwrap();
        assert!((v[0] - 1.0 / gamma(2.5).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn caputo_of_constant_is_zero() {
        let mu = MuMap::new(MuKind::SqrtOddExtended, -1.0, 1.0).unwrap();
        let v = caputo_deriv(scalar(|_| 3.0), None::<NoDerivative>, 0.4, &mu, -0.5, 0.7, 64, &[0.0]).unwrap();
        assert_eq!(v.value[0], 0.0);
        assert!(matches!(v.derivative, DerivativeSource::FiniteDifference { .. }));
    }

    #[test]
    fn mu_presets_validate() {
        assert!(MuMap::new(MuKind::SqrtOddExtended, -0.3, 0.6).is_ok());
        assert!(MuMap::new(MuKind::Log1p, -0.5, 2.0).is_ok());
        assert!(MuMap::new(MuKind::Power(0.75), -1.0, 1.0).is_ok());
        // μ′(0) = 0 violates the nondegeneracy requirement.
        assert!(MuMap::new(MuKind::Power(1.5), -1.0, 1.0).is_err());
        assert!(MuMap::new(MuKind::Power(1.5), 0.5, 2.0).is_ok());
        let e = crate::expr::parse("t^3+t").unwrap();
        let mu = MuMap::new(MuKind::Custom(e), -1.0, 1.0).unwrap();
        assert!((mu.eval(mu.inverse(0.7)) - 0.7).abs() < 1e-14);
        let bad = crate::expr::parse("t^2").unwrap();
        assert!(MuMap::new(MuKind::Custom(bad), -1.0, 1.0).is_err());
        assert!(MuMap::new(MuKind::Custom(crate::expr::parse("w1").unwrap()), 0.0, 1.0).is_err());
    }
}
