//! The delayed Mittag-Leffler type matrix function
//!
//! ```text
//! X^{α,β}(t, s) = Σ_k Σ_i Q_{k+1}(i) [μ(t) − μ(s + lag(i))]₊^{kα+β−1} / Γ(kα+β),
//! ```
//!
//! and `X ≡ Θ` for `t < 0`.
//!
//! Multi-indices sharing a lag are merged up front, so one evaluation costs
//! `O(levels × distinct lags × n²)`. The k-sum stops once three consecutive
//! layers fall below `tol` relative to the partial sum.
//!
//! For `β = 1` the leading term is a step: `[0]₊⁰` is taken as 1 at every lag,
//! which keeps `X^{α,1}(·, s)` right-continuous at each `s + lag(i)` and
//! gives `X(0, 0) = I`, `X(0, r_j) = Θ`.

use crate::error::{Error, Result};
use crate::mu_calculus::{recip_gamma, MuMap};
use crate::q_lattice::QTable;
use crate::{inf_norm, Matrix};

pub const DEFAULT_TOL: f64 = 1e-10;
const SMALL_LAYERS: usize = 3;

#[derive(Debug, Clone)]
pub struct MlfValue {
    pub value: Matrix,
    /// Number of k-layers summed.
    pub k_used: usize,
    pub tail_estimate: f64,
    pub terms_summed: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
struct LagGroup {
    lag: f64,
    /// `Σ_{lag(i) = lag} Q_{k+1}(i)` for `k = 0..K−1`.
    sums: Vec<Matrix>,
    /// Last k with a nonzero sum (the group is inert beyond it).
    last_nonzero: Option<usize>,
}

/// Prepared evaluator for fixed `(α, β)` over one lattice.
#[derive(Debug, Clone)]
pub struct XSeries {
    alpha: f64,
    beta: f64,
    n: usize,
    lag_budget: f64,
    groups: Vec<LagGroup>,
    inv_gamma: Vec<f64>,
    tol: f64,
}

impl XSeries {
    pub fn new(table: &QTable, alpha: f64, beta: f64, tol: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("α = {alpha} outside (0, 1]")));
        }
        if !(beta > 0.0) {
            return Err(Error::invalid(format!("β = {beta} must be positive")));
        }
        Self::unchecked(table, alpha, beta, tol)
    }

    /// `β` may be any real here; used for `∂X/∂μ(t) = X^{α,β−1}`.
    pub(crate) fn unchecked(table: &QTable, alpha: f64, beta: f64, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::invalid(format!("tolerance {tol} must be positive")));
        }
        let n = table.n();
        let levels = table.level_max();
        let mut groups: Vec<LagGroup> = Vec::new();
        for (p, &lag) in table.lags().iter().enumerate() {
            let gi = match groups.iter().position(|g| (g.lag - lag).abs() <= 1e-12 * (1.0 + lag)) {
                Some(gi) => gi,
                None => {
                    groups.push(LagGroup { lag, sums: vec![Matrix::zeros(n, n); levels], last_nonzero: None });
                    groups.len() - 1
                }
            };
            for k in 0..levels {
                groups[gi].sums[k] += table.at(k + 1, p);
            }
        }
        for g in &mut groups {
            g.last_nonzero = g.sums.iter().rposition(|m| m.iter().any(|x| *x != 0.0));
        }
        groups.retain(|g| g.last_nonzero.is_some());
        let inv_gamma = (0..levels).map(|k| recip_gamma(k as f64 * alpha + beta)).collect();
        Ok(XSeries { alpha, beta, n, lag_budget: table.lag_budget(), groups, inv_gamma, tol })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Distinct lags carrying nonzero coefficients.
    pub fn lags(&self) -> impl Iterator<Item = f64> + '_ {
        self.groups.iter().filter(|g| g.last_nonzero.is_some()).map(|g| g.lag)
    }

    pub fn eval(&self, mu: &MuMap, t: f64, s: f64) -> Result<MlfValue> {
        self.eval_impl(mu, t, s, None)
    }

    /// As [`eval`](Self::eval), but the group at lag `lag` uses the kernel
    /// argument `x = μ(t) − μ(s + lag)` supplied by the caller (a quadrature
    /// node knows it without cancellation).
    pub fn eval_pinned(&self, mu: &MuMap, t: f64, s: f64, lag: f64, x: f64) -> Result<MlfValue> {
        self.eval_impl(mu, t, s, Some((lag, x)))
    }

    fn eval_impl(&self, mu: &MuMap, t: f64, s: f64, pin: Option<(f64, f64)>) -> Result<MlfValue> {
        let n = self.n;
        let zero = |converged| MlfValue { value: Matrix::zeros(n, n), k_used: 0, tail_estimate: 0.0, terms_summed: 0, converged };
        if t < 0.0 {
            return Ok(zero(true));
        }
        if t - s > self.lag_budget * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::invalid(format!(
                "X({t}, {s}) needs lags up to {} but the lattice stops at {}",
                t - s,
                self.lag_budget
            )));
        }
        let ut = mu.eval(t);
        let snap = 64.0 * f64::EPSILON * (1.0 + t.abs());
        // (group, base power x^{β−1}, x^α) for the active groups.
        let mut active: Vec<(usize, f64, f64)> = Vec::with_capacity(self.groups.len());
        let mut value = Matrix::zeros(n, n);
        let mut terms = 0;
        for (gi, g) in self.groups.iter().enumerate() {
            let arg = s + g.lag;
            if let Some((lag, x)) = pin {
                if (g.lag - lag).abs() <= 1e-12 * (1.0 + lag) {
                    if x > 0.0 {
                        active.push((gi, x.powf(self.beta - 1.0), x.powf(self.alpha)));
                    } else if x == 0.0 && self.beta == 1.0 {
                        value += &g.sums[0];
                        terms += 1;
                    }
                    continue;
                }
            }
            if (t - arg).abs() <= snap {
                // x = 0: only the step term of β = 1 survives.
                if self.beta == 1.0 {
                    value += &g.sums[0];
                    terms += 1;
                }
                continue;
            }
            let x = ut - mu.eval(arg);
            if x > 0.0 {
                active.push((gi, x.powf(self.beta - 1.0), x.powf(self.alpha)));
            }
        }
        if active.is_empty() {
            return Ok(MlfValue { value, k_used: 1, tail_estimate: 0.0, terms_summed: terms, converged: true });
        }
        let levels = self.inv_gamma.len();
        let mut small = 0;
        let mut last = 0.0;
        let mut layer = Matrix::zeros(n, n);
        for k in 0..levels {
            layer.fill(0.0);
            let mut any = false;
            for (gi, pw, step) in active.iter_mut() {
                let g = &self.groups[*gi];
                if g.last_nonzero.is_some_and(|l| k <= l) {
                    let c = *pw * self.inv_gamma[k];
                    if c != 0.0 {
                        for (a, q) in layer.as_mut_slice().iter_mut().zip(g.sums[k].as_slice()) {
                            *a += c * q;
                        }
                        any = true;
                        terms += 1;
                    }
                }
                *pw *= *step;
            }
            if any {
                value += &layer;
            }
            last = if any { inf_norm(&layer) } else { 0.0 };
            if last <= self.tol * inf_norm(&value) {
                small += 1;
                if small >= SMALL_LAYERS {
                    return Ok(MlfValue { value, k_used: k + 1, tail_estimate: last, terms_summed: terms, converged: true });
                }
            } else {
                small = 0;
            }
        }
        Ok(MlfValue { value, k_used: levels, tail_estimate: last, terms_summed: terms, converged: false })
    }

    /// `∂X^{α,β}(t, s)/∂μ(t)`, i.e. the same series with `β − 1`.
    pub fn mu_derivative(table: &QTable, alpha: f64, beta: f64, tol: f64) -> Result<XSeries> {
        Self::unchecked(table, alpha, beta - 1.0, tol)
    }
}

pub fn eval_x(alpha: f64, beta: f64, t: f64, s: f64, table: &QTable, mu: &MuMap, tol: f64) -> Result<MlfValue> {
    if s < 0.0 {
        return Err(Error::invalid(format!("X(t, s) requires s ≥ 0, got {s}")));
    }
    XSeries::new(table, alpha, beta, tol)?.eval(mu, t, s)
}

/// Scalar majorant series value (an upper bound for `‖X^{α,β}(t, 0)‖`).
pub fn norm_bound_x(alpha: f64, beta: f64, t: f64, majorant: &QTable, mu: &MuMap, tol: f64) -> Result<f64> {
    if majorant.n() != 1 {
        return Err(Error::Dimension("majorant lattice must be 1×1".into()));
    }
    let v = eval_x(alpha, beta, t, 0.0, majorant, mu, tol)?;
    if !v.converged {
        return Err(Error::NotConverged {
            what: "majorant series".into(),
            detail: format!("tail {} after {} layers", v.tail_estimate, v.k_used),
        });
    }
    Ok(v.value[(0, 0)])
}
