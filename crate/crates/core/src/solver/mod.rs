//! Closed-form solution and Picard iteration.
//!
//! For `t ∈ [0, T]` the solution is the sum of three terms:
//!
//! ```text
//! homogeneous  [X^{α,1}(t,0) − Σ_m X^{α,1}(t,r_m) A_m] φ(0)
//! forcing      ∫_0^t X^{α,α}(t,s) f(s) dμ(s)
//! history      Σ_j ∫_{−r_j}^{t−r_j} X^{α,α}(t, r_j+s) [F_j φ(s)·1{s≤0} + A_j D_j(s)] dμ(s)
//! ```
//!
//! where `D_j` is the μ-Caputo derivative (base point `−r_j`) of φ continued
//! by `φ(0)` past 0. [`HistoryForm::Published`] truncates the history
//! integral at `s = 0`, dropping the memory tail of `D_j`; it is kept for
//! comparison only.
//!
//! The representation is exact when μ is affine. For nonlinear μ the shift
//! structure `X(t, r_j) = X(t − r_j, 0)` it relies on no longer holds.

mod history;
mod picard;

pub use picard::{estimate_lipschitz, solve_semilinear, solve_semilinear_with, PicardReport};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mlf::{XSeries, DEFAULT_TOL};
use crate::mu_calculus::{panel, split_points, KernelCentre, DEFAULT_NODES};
use crate::q_lattice::{BoundaryConvention, QTable, DEFAULT_LEVEL_CAP};
use crate::system::DelaySystem;
use crate::trajectory::{Method, PointDiagnostics, Trajectory};
use crate::{Matrix, Vector};

use history::HistoryCaputo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryForm {
    #[default]
    MemoryTail,
    Published,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub quad_nodes: usize,
    pub mlf_tol: f64,
    pub level_cap: usize,
    /// Grid nodes per unit of μ.
    pub grid_per_unit: usize,
    pub history_form: HistoryForm,
    pub boundary: BoundaryConvention,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Recompute every integral with doubled nodes and fail on a relative
    /// change above 1e-8.
    pub quadrature_check: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            quad_nodes: DEFAULT_NODES,
            mlf_tol: DEFAULT_TOL,
            level_cap: DEFAULT_LEVEL_CAP,
            grid_per_unit: 64,
            history_form: HistoryForm::MemoryTail,
            boundary: BoundaryConvention::Recursive,
            picard_tol: 1e-10,
            picard_max_iter: 50,
            quadrature_check: false,
        }
    }
}

/// Prepared closed-form representation of one system.
pub struct Representation<'a> {
    sys: &'a DelaySystem,
    cfg: SolverConfig,
    table: QTable,
    x1: XSeries,
    xa: XSeries,
    /// Caputo derivative of φ per delay (only where `A_j ≠ Θ`).
    hist: Vec<Option<HistoryCaputo>>,
    phi0: Vector,
    /// Lags with nonzero coefficients, including 0.
    lags: Vec<f64>,
    /// Delay breakpoints in `[0, T]`; forcing integrals are split there.
    breakpoints: Vec<f64>,
}

fn is_zero(m: &Matrix) -> bool {
    m.iter().all(|x| *x == 0.0)
}

impl<'a> Representation<'a> {
    pub fn new(sys: &'a DelaySystem, cfg: &SolverConfig) -> Result<Self> {
        sys.validate()?;
        let table = QTable::build_with(&sys.coeffs, cfg.level_cap, sys.horizon, cfg.boundary)?;
        let x1 = XSeries::new(&table, sys.alpha, 1.0, cfg.mlf_tol)?;
        let xa = XSeries::new(&table, sys.alpha, sys.alpha, cfg.mlf_tol)?;
        let hist = sys
            .coeffs
            .a
            .iter()
            .zip(&sys.coeffs.delays)
            .map(|(a, &r)| if is_zero(a) { Ok(None) } else { HistoryCaputo::new(sys, r, cfg.quad_nodes).map(Some) })
            .collect::<Result<_>>()?;
        let mut lags: Vec<f64> = xa.lags().collect();
        lags.push(0.0);
        lags.sort_by(f64::total_cmp);
        lags.dedup();
        let breakpoints = crate::grid::breakpoints(&sys.coeffs.delays, sys.horizon);
        Ok(Representation { sys, cfg: cfg.clone(), table, x1, xa, hist, phi0: sys.phi(0.0)?, lags, breakpoints })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn system(&self) -> &DelaySystem {
        self.sys
    }

    /// `[X^{α,1}(t,0) − Σ_m X^{α,1}(t,r_m) A_m] φ(0)`.
    pub fn homogeneous_term(&self, t: f64) -> Result<(Vector, PointDiagnostics)> {
        let mut diag = PointDiagnostics::default();
        let mu = &self.sys.mu;
        let x0 = self.x1.eval(mu, t, 0.0)?;
        diag.merge(x0.converged, x0.tail_estimate);
        let mut m = x0.value;
        for (a, &r) in self.sys.coeffs.a.iter().zip(&self.sys.coeffs.delays) {
            if is_zero(a) {
                continue;
            }
            let xr = self.x1.eval(mu, t, r)?;
            diag.merge(xr.converged, xr.tail_estimate);
            m -= xr.value * a;
        }
        Ok((m * &self.phi0, diag))
    }

    /// `∫_0^t X^{α,α}(t,s) f(s) dμ(s)`; `extra` lists further points where
    /// `f` may be nonsmooth.
    pub fn forcing_term<F>(&self, t: f64, f: F, extra: &[f64]) -> Result<(Vector, PointDiagnostics)>
    where
        F: Fn(f64) -> Result<Vector>,
    {
        self.checked(|nodes| self.forcing_with(t, &f, extra, nodes))
    }

    /// History contribution; see the module docs.
    pub fn history_term(&self, t: f64) -> Result<(Vector, PointDiagnostics)> {
        self.checked(|nodes| self.history_with(t, nodes))
    }

    fn checked<G>(&self, g: G) -> Result<(Vector, PointDiagnostics)>
    where
        G: Fn(usize) -> Result<(Vector, PointDiagnostics)>,
    {
        let (v, d) = g(self.cfg.quad_nodes)?;
        if self.cfg.quadrature_check {
            let (v2, _) = g(2 * self.cfg.quad_nodes)?;
            let diff = (&v2 - &v).amax();
            if diff > 1e-8 * v2.amax().max(1.0) {
                return Err(Error::NotConverged {
                    what: "quadrature".into(),
                    detail: format!("doubling nodes changed the result by {diff:e}"),
                });
            }
        }
        Ok((v, d))
    }

    /// Kernel singularities of `s ↦ X^{α,α}(t, shift + s)` lie at `t − shift − L`.
    fn singular_points(&self, t: f64, shift: f64) -> impl Iterator<Item = f64> + '_ {
        self.lags.iter().map(move |l| t - shift - l)
    }

    /// Integrates `X^{α,α}(t, shift + s)·g(s) dμ(s)` over `[lo, hi]`.
    #[allow(clippy::too_many_arguments)]
    fn kernel_integral<G>(
        &self,
        t: f64,
        shift: f64,
        lo: f64,
        hi: f64,
        g: &G,
        extra: &[f64],
        nodes: usize,
        diag: &mut PointDiagnostics,
    ) -> Result<Vector>
    where
        G: Fn(f64) -> Result<Vector>,
    {
        let n = self.sys.n();
        let mut acc = Vector::zeros(n);
        if !(hi > lo) {
            return Ok(acc);
        }
        let mut cuts: Vec<f64> = self.singular_points(t, shift).collect();
        cuts.extend_from_slice(extra);
        let pts = split_points(lo, hi, &cuts);
        let singular: Vec<f64> = self.singular_points(t, shift).collect();
        let mu = &self.sys.mu;
        for w in pts.windows(2) {
            let tol = 1e-12 * (1.0 + w[1].abs());
            let centre = singular.iter().copied().filter(|&c| c >= w[1] - tol).fold(f64::INFINITY, f64::min);
            let kc = centre.is_finite().then(|| KernelCentre { u: mu.eval(centre.min(mu.domain().1)), kappa: self.sys.alpha });
            // U − u equals the kernel argument of the singular group when no
            // shift separates them or μ is affine.
            let lag = t - shift - centre;
            let pinned = centre.is_finite() && centre <= mu.domain().1 && ((shift + lag).abs() <= tol || mu.is_affine());
            for q in panel(mu, w[0], w[1], kc, nodes) {
                let x = if pinned {
                    self.xa.eval_pinned(mu, t, shift + q.s, lag, q.dist)?
                } else {
                    self.xa.eval(mu, t, shift + q.s)?
                };
                diag.merge(x.converged, x.tail_estimate);
                let gv = g(q.s)?;
                acc.gemv(q.weight, &x.value, &gv, 1.0);
            }
        }
        Ok(acc)
    }

    fn forcing_with<F>(&self, t: f64, f: &F, extra: &[f64], nodes: usize) -> Result<(Vector, PointDiagnostics)>
    where
        F: Fn(f64) -> Result<Vector>,
    {
        let mut diag = PointDiagnostics::default();
        let v = self.kernel_integral(t, 0.0, 0.0, t, f, extra, nodes, &mut diag)?;
        Ok((v, diag))
    }

    fn history_with(&self, t: f64, nodes: usize) -> Result<(Vector, PointDiagnostics)> {
        let sys = self.sys;
        let mut diag = PointDiagnostics::default();
        let mut total = Vector::zeros(sys.n());
        for j in 0..sys.d() {
            let r = sys.coeffs.delays[j];
            let (a, f) = (&sys.coeffs.a[j], &sys.coeffs.f[j]);
            let hist = self.hist[j].as_ref();
            if hist.is_none() && is_zero(f) {
                continue;
            }
            if let Some(h) = hist {
                // Interpolant tail is relative, like the series tail.
                diag.merge(true, h.tail);
            }
            let hi = match self.cfg.history_form {
                HistoryForm::MemoryTail => t - r,
                HistoryForm::Published => (t - r).min(0.0),
            };
            let g = |s: f64| -> Result<Vector> {
                let mut v = if s <= 0.0 && !is_zero(f) { f * sys.phi(s)? } else { Vector::zeros(sys.n()) };
                if let Some(h) = hist {
                    v += a * h.eval(sys, s)?;
                }
                Ok(v)
            };
            total += self.kernel_integral(t, r, -r, hi, &g, &[0.0], nodes, &mut diag)?;
        }
        Ok((total, diag))
    }

    fn linear_forcing(&self) -> impl Fn(f64) -> Result<Vector> + '_ {
        let zero = Vector::zeros(self.sys.n());
        move |s| self.sys.forcing_at(s, &zero)
    }

    /// The full closed-form value at `t ≥ 0` for the linear system.
    pub fn evaluate(&self, t: f64) -> Result<(Vector, PointDiagnostics)> {
        let (mut v, mut diag) = self.homogeneous_term(t)?;
        let (h, dh) = self.history_term(t)?;
        v += h;
        diag.merge(dh.converged, dh.tail);
        if self.sys.has_forcing() {
            let (f, df) = self.forcing_term(t, self.linear_forcing(), &self.breakpoints)?;
            v += f;
            diag.merge(df.converged, df.tail);
        }
        Ok((v, diag))
    }
}

pub fn default_grid(sys: &DelaySystem, cfg: &SolverConfig) -> Result<TimeGrid> {
    TimeGrid::build(&sys.mu, &sys.coeffs.delays, sys.horizon, cfg.grid_per_unit)
}

/// Evaluates `f` at every forward node in parallel; history nodes take φ.
pub(crate) fn fill_trajectory<F>(
    sys: &DelaySystem,
    grid: TimeGrid,
    method: Method,
    f: F,
) -> Result<Trajectory>
where
    F: Fn(f64) -> Result<(Vector, PointDiagnostics)> + Sync,
{
    let z = grid.zero_index();
    let times = grid.times().to_vec();
    let forward: Vec<(Vector, PointDiagnostics)> =
        times[z..].par_iter().map(|&t| f(t)).collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(times.len());
    let mut diagnostics = Vec::with_capacity(times.len());
    for &t in &times[..z] {
        values.push(sys.phi(t)?);
        diagnostics.push(PointDiagnostics::default());
    }
    // w(0) = φ(0) exactly.
    for (k, (v, d)) in forward.into_iter().enumerate() {
        values.push(if k == 0 { sys.phi(0.0)? } else { v });
        diagnostics.push(d);
    }
    Ok(Trajectory { grid, values, method, diagnostics, meta: Default::default() })
}

/// Closed-form solution of a linear system on the default grid.
pub fn solve_linear(sys: &DelaySystem, cfg: &SolverConfig) -> Result<Trajectory> {
    solve_linear_on(sys, cfg, default_grid(sys, cfg)?)
}

pub fn solve_linear_on(sys: &DelaySystem, cfg: &SolverConfig, grid: TimeGrid) -> Result<Trajectory> {
    if !sys.is_linear() {
        return Err(Error::invalid("solve_linear needs a forcing that does not reference w1..wn"));
    }
    let rep = Representation::new(sys, cfg)?;
    let mut traj = fill_trajectory(sys, grid, Method::ClosedForm, |t| rep.evaluate(t))?;
    traj.meta.insert("quad_nodes".into(), cfg.quad_nodes.to_string());
    traj.meta.insert("mlf_tol".into(), format!("{:e}", cfg.mlf_tol));
    traj.meta.insert("history_form".into(), format!("{:?}", cfg.history_form));
    Ok(traj)
}
