//! Reference solver: product integration of the equivalent Volterra equation
//!
//! ```text
//! w(t) = φ(0) + Σ A_i [w(t − r_i) − φ(−r_i)]
//!        + (1/Γ(α)) ∫_0^t (μ(t) − μ(s))^{α−1} [B w(s) + Σ F_i w(s − r_i) + ℸ(s, w(s))] dμ(s)
//! ```
//!
//! The kernel is integrated exactly in `u = μ(s)` against a piecewise
//! interpolant of the bracket: piecewise linear (product trapezoid, the
//! default) or piecewise constant from the left (product rectangle). The
//! current point enters implicitly and is resolved by corrector sweeps. No
//! part of this module uses the coefficient lattice.

use crate::error::{Error, Result};
use crate::grid::{Lookup, TimeGrid};
use crate::mu_calculus::recip_gamma;
use crate::system::DelaySystem;
use crate::trajectory::{Method, PointDiagnostics, Trajectory};
use crate::{vec_inf_norm, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProductRule {
    #[default]
    Trapezoid,
    Rectangle,
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Grid nodes per unit of μ.
    pub steps_per_unit: usize,
    pub corrector_iterations: usize,
    /// Delayed-value interpolation order; only 1 (linear) is supported.
    pub interpolation_order: usize,
    pub rule: ProductRule,
    pub corrector_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            steps_per_unit: 4096,
            corrector_iterations: 50,
            interpolation_order: 1,
            rule: ProductRule::Trapezoid,
            corrector_tol: 1e-13,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_unit < 8 {
            return Err(Error::invalid(format!("oracle needs N ≥ 8 steps per unit, got {}", self.steps_per_unit)));
        }
        if self.corrector_iterations < 1 {
            return Err(Error::invalid("oracle needs at least one corrector iteration"));
        }
        if self.interpolation_order != 1 {
            return Err(Error::invalid("only linear (order 1) delayed interpolation is supported"));
        }
        Ok(())
    }
}

/// Quadrature weights `W_k` with `∫_0^{t_n} (U − u)^{α−1} g du ≈ Σ_k W_k g_k`
/// over forward nodes `z..=n` (index relative to `z`).
fn weights(u: &[f64], n: usize, alpha: f64, rule: ProductRule, out: &mut Vec<f64>) {
    out.clear();
    out.resize(n + 1, 0.0);
    let big_u = u[n];
    let mut pa = (big_u - u[0]).powf(alpha);
    for k in 0..n {
        let a = big_u - u[k];
        let b = big_u - u[k + 1];
        let pb = if k + 1 == n { 0.0 } else { b.powf(alpha) };
        let i0 = (pa - pb) / alpha;
        match rule {
            ProductRule::Rectangle => out[k] += i0,
            ProductRule::Trapezoid => {
                let h = u[k + 1] - u[k];
                let i1 = a * i0 - (a * pa - b * pb) / (alpha + 1.0);
                out[k] += i0 - i1 / h;
                out[k + 1] += i1 / h;
            }
        }
        pa = pb;
    }
}

struct Ctx<'a> {
    sys: &'a DelaySystem,
    grid: &'a TimeGrid,
    phi0: Vector,
    phi_r: Vec<Vector>,
}

impl Ctx<'_> {
    fn value(&self, values: &[Vector], t: f64) -> Result<Vector> {
        Ok(match self.grid.lookup(&self.sys.mu, t) {
            Lookup::History(s) => self.sys.phi(s)?,
            Lookup::Node(k) => values[k].clone(),
            Lookup::Interp { left, theta } => &values[left] * (1.0 - theta) + &values[left + 1] * theta,
        })
    }

    /// `φ(0) + Σ A_i [w(t − r_i) − φ(−r_i)]`.
    fn neutral(&self, values: &[Vector], t: f64) -> Result<Vector> {
        let c = &self.sys.coeffs;
        let mut v = self.phi0.clone();
        for (i, (a, r)) in c.a.iter().zip(&c.delays).enumerate() {
            v += a * (self.value(values, t - r)? - &self.phi_r[i]);
        }
        Ok(v)
    }

    /// `B w(t) + Σ F_i w(t − r_i) + ℸ(t, w(t))` at node `k`.
    fn bracket(&self, values: &[Vector], k: usize) -> Result<Vector> {
        let t = self.grid.times()[k];
        let c = &self.sys.coeffs;
        let w = &values[k];
        let mut g = &c.b * w + self.sys.forcing_at(t, w)?;
        for (f, r) in c.f.iter().zip(&c.delays) {
            if f.iter().any(|x| *x != 0.0) {
                g += f * self.value(values, t - r)?;
            }
        }
        Ok(g)
    }
}

fn context<'a>(sys: &'a DelaySystem, grid: &'a TimeGrid) -> Result<Ctx<'a>> {
    let phi_r = sys.coeffs.delays.iter().map(|r| sys.phi(-r)).collect::<Result<_>>()?;
    Ok(Ctx { sys, grid, phi0: sys.phi(0.0)?, phi_r })
}

pub fn solve_reference(sys: &DelaySystem, cfg: &OracleConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = TimeGrid::build(&sys.mu, &sys.coeffs.delays, sys.horizon, cfg.steps_per_unit)?;
    solve_reference_on(sys, cfg, grid)
}

pub fn solve_reference_on(sys: &DelaySystem, cfg: &OracleConfig, grid: TimeGrid) -> Result<Trajectory> {
    cfg.validate()?;
    sys.validate()?;
    let ctx = context(sys, &grid)?;
    let times = grid.times();
    let z = grid.zero_index();
    let u: Vec<f64> = times[z..].iter().map(|&t| sys.mu.eval(t)).collect();
    let inv_g = recip_gamma(sys.alpha);
    let mut values: Vec<Vector> = times[..z].iter().map(|&t| sys.phi(t)).collect::<Result<_>>()?;
    values.push(ctx.phi0.clone());
    let mut brackets = vec![ctx.bracket(&values, z)?];
    let mut w = Vec::new();
    let mut worst_change = 0.0f64;
    for n in 1..u.len() {
        let idx = z + n;
        weights(&u, n, sys.alpha, cfg.rule, &mut w);
        let mut known = Vector::zeros(sys.n());
        for (k, g) in brackets.iter().enumerate() {
            known.axpy(w[k], g, 1.0);
        }
        let implicit = w[n];
        values.push(values[idx - 1].clone());
        let mut change = f64::INFINITY;
        for _ in 0..cfg.corrector_iterations {
            let base = ctx.neutral(&values, times[idx])?;
            let g = ctx.bracket(&values, idx)?;
            let next = base + (&known + &g * implicit) * inv_g;
            change = vec_inf_norm(&(&next - &values[idx]));
            let scale = 1.0 + vec_inf_norm(&next);
            values[idx] = next;
            if implicit == 0.0 || change <= cfg.corrector_tol * scale {
                break;
            }
        }
        let scale = 1.0 + vec_inf_norm(&values[idx]);
        if implicit != 0.0 && change > 1e3 * cfg.corrector_tol * scale {
            return Err(Error::NotConverged {
                what: "oracle corrector".into(),
                detail: format!("step {n} (t = {}): last change {change:e}", times[idx]),
            });
        }
        worst_change = worst_change.max(change / scale);
        brackets.push(ctx.bracket(&values, idx)?);
    }
    let diagnostics = vec![PointDiagnostics::default(); values.len()];
    let mut traj = Trajectory { grid, values, method: Method::Oracle, diagnostics, meta: Default::default() };
    traj.meta.insert("rule".into(), format!("{:?}", cfg.rule));
    traj.meta.insert("corrector_iterations".into(), cfg.corrector_iterations.to_string());
    traj.meta.insert("max_corrector_change".into(), format!("{worst_change:e}"));
    Ok(traj)
}

/// Sup-norm defect of `traj` in the discretised integral equation on its
/// own grid.
pub fn residual(sys: &DelaySystem, traj: &Trajectory, cfg: &OracleConfig) -> Result<f64> {
    let grid = &traj.grid;
    if traj.values.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} values for {} grid points", traj.values.len(), grid.len())));
    }
    let r = sys.r_max();
    if (grid.times()[0] + r).abs() > 1e-12 || (grid.horizon() - sys.horizon).abs() > 1e-12 {
        return Err(Error::GridMismatch(format!(
            "trajectory covers [{}, {}], system needs [{}, {}]",
            grid.times()[0],
            grid.horizon(),
            -r,
            sys.horizon
        )));
    }
    for b in crate::grid::breakpoints(&sys.coeffs.delays, sys.horizon) {
        if grid.node_index(b).is_none() {
            return Err(Error::GridMismatch(format!("breakpoint {b} is not a node of the trajectory grid")));
        }
    }
    let ctx = context(sys, grid)?;
    let z = grid.zero_index();
    let times = grid.times();
    let u: Vec<f64> = times[z..].iter().map(|&t| sys.mu.eval(t)).collect();
    let brackets: Vec<Vector> = (z..times.len()).map(|k| ctx.bracket(&traj.values, k)).collect::<Result<_>>()?;
    let inv_g = recip_gamma(sys.alpha);
    let mut worst = vec_inf_norm(&(&traj.values[z] - &ctx.phi0));
    let mut w = Vec::new();
    for n in 1..u.len() {
        weights(&u, n, sys.alpha, cfg.rule, &mut w);
        let mut integral = Vector::zeros(sys.n());
        for k in 0..=n {
            integral.axpy(w[k], &brackets[k], 1.0);
        }
        let rhs = ctx.neutral(&traj.values, times[z + n])? + integral * inv_g;
        worst = worst.max(vec_inf_norm(&(&traj.values[z + n] - rhs)));
    }
    Ok(worst)
}
