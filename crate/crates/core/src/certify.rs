//! Contraction certificate `ρ = L (μ(T) − μ(0)) ‖X^{α,α}(T,0)‖` and the
//! Ulam–Hyers constant `η = (μ(T) − μ(0)) ‖X‖ / (1 − ρ)`.
//!
//! `‖X‖` is taken from a scalar majorant series. Two conventions build it:
//! per delay (`a_j = ‖A_j‖`, `f_j = ‖F_j‖` on their own delays, a genuine
//! bound) and lumped (`a = Σ a_j`, `f = Σ f_j` placed on a single delay, as
//! in a single-delay majorant). The matrix norm of the actual series value
//! and the quadrature of `∫ ‖X(T,s)‖ dμ(s)` are reported alongside.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{BinOp, Expr};
use crate::mlf::{norm_bound_x, XSeries, DEFAULT_TOL};
use crate::mu_calculus::{panel, split_points, KernelCentre, DEFAULT_NODES};
use crate::q_lattice::{QTable, DEFAULT_LEVEL_CAP};
use crate::solver::{solve_semilinear, SolverConfig};
use crate::system::DelaySystem;
use crate::{inf_norm, vec_inf_norm, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormConvention {
    PerDelay,
    /// All neutral and delayed norms summed and placed on delay `delay_index`.
    Lumped { delay_index: usize },
}

impl fmt::Display for NormConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormConvention::PerDelay => f.write_str("per-delay"),
            NormConvention::Lumped { delay_index } => write!(f, "lumped(r{})", delay_index + 1),
        }
    }
}

/// Operator norms of the coefficients (∞-norm unless stated otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct NormData {
    pub a: Vec<f64>,
    pub b: f64,
    pub f: Vec<f64>,
}

impl NormData {
    pub fn from_system(sys: &DelaySystem) -> Self {
        let c = &sys.coeffs;
        NormData { a: c.a.iter().map(inf_norm).collect(), b: inf_norm(&c.b), f: c.f.iter().map(inf_norm).collect() }
    }
}

#[derive(Debug, Clone)]
pub struct CertificateOptions {
    pub convention: NormConvention,
    /// Stated norms; computed from the matrices when absent.
    pub norms: Option<NormData>,
    pub tol: f64,
    pub level_cap: usize,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions { convention: NormConvention::PerDelay, norms: None, tol: DEFAULT_TOL, level_cap: DEFAULT_LEVEL_CAP }
    }
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub lipschitz: f64,
    pub mu_span: f64,
    pub convention: NormConvention,
    /// Majorant of `‖X^{α,α}(T,0)‖` under `convention`.
    pub xnorm: f64,
    pub rho: f64,
    pub unique: bool,
    pub eta: Option<f64>,
    pub xnorm_per_delay: f64,
    pub xnorm_lumped: f64,
    /// `‖X^{α,α}(T,0)‖∞` of the matrix series itself.
    pub xnorm_matrix: f64,
    /// `∫_0^T ‖X^{α,α}(T,s)‖∞ dμ(s)` by quadrature.
    pub integrated_xnorm: f64,
}

impl Certificate {
    fn from_parts(lipschitz: f64, mu_span: f64, xnorm: f64) -> (f64, bool, Option<f64>) {
        let rho = lipschitz * mu_span * xnorm;
        let unique = rho < 1.0;
        (rho, unique, unique.then(|| mu_span * xnorm / (1.0 - rho)))
    }

    pub fn rho_of(&self, xnorm: f64) -> f64 {
        self.lipschitz * self.mu_span * xnorm
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lipschitz: {:.9e}", self.lipschitz)?;
        writeln!(f, "mu_span: {:.9e}", self.mu_span)?;
        writeln!(f, "convention: {}", self.convention)?;
        writeln!(f, "xnorm: {:.9e}", self.xnorm)?;
        writeln!(f, "rho: {:.9e}", self.rho)?;
        writeln!(f, "unique: {}", self.unique)?;
        if let Some(eta) = self.eta {
            writeln!(f, "eta: {eta:.9e}")?;
        }
        writeln!(f, "xnorm_per_delay: {:.9e}", self.xnorm_per_delay)?;
        writeln!(f, "rho_per_delay: {:.9e}", self.rho_of(self.xnorm_per_delay))?;
        writeln!(f, "xnorm_lumped: {:.9e}", self.xnorm_lumped)?;
        writeln!(f, "rho_lumped: {:.9e}", self.rho_of(self.xnorm_lumped))?;
        writeln!(f, "xnorm_matrix: {:.9e}", self.xnorm_matrix)?;
        writeln!(f, "rho_matrix: {:.9e}", self.rho_of(self.xnorm_matrix))?;
        write!(f, "integrated_xnorm: {:.9e}", self.integrated_xnorm)
    }
}

/// Majorant lattice under a convention.
pub fn majorant_table(sys: &DelaySystem, norms: &NormData, convention: NormConvention, level_cap: usize) -> Result<QTable> {
    let delays = &sys.coeffs.delays;
    match convention {
        NormConvention::PerDelay => QTable::majorant(&norms.a, norms.b, &norms.f, delays, level_cap, sys.horizon),
        NormConvention::Lumped { delay_index } => {
            let r = *delays
                .get(delay_index)
                .ok_or_else(|| Error::invalid(format!("lumped delay index {} out of range", delay_index + 1)))?;
            let a: f64 = norms.a.iter().sum();
            let f: f64 = norms.f.iter().sum();
            QTable::majorant(&[a], norms.b, &[f], &[r], level_cap, sys.horizon)
        }
    }
}

pub fn contraction_certificate(sys: &DelaySystem, lipschitz: f64, opts: &CertificateOptions) -> Result<Certificate> {
    if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
        return Err(Error::invalid(format!("Lipschitz constant {lipschitz} must be finite and nonnegative")));
    }
    sys.coeffs.validate()?;
    let norms = opts.norms.clone().unwrap_or_else(|| NormData::from_system(sys));
    if norms.a.len() != sys.d() || norms.f.len() != sys.d() {
        return Err(Error::Dimension(format!("stated norms must list {} neutral and {} delayed entries", sys.d(), sys.d())));
    }
    let (alpha, t) = (sys.alpha, sys.horizon);
    let mu = &sys.mu;
    let mu_span = mu.eval(t) - mu.eval(0.0);
    let bound = |conv| -> Result<f64> {
        let table = majorant_table(sys, &norms, conv, opts.level_cap)?;
        norm_bound_x(alpha, alpha, t, &table, mu, opts.tol)
    };
    let lumped_conv = match opts.convention {
        NormConvention::Lumped { .. } => opts.convention,
        NormConvention::PerDelay => NormConvention::Lumped { delay_index: 0 },
    };
    let xnorm_per_delay = bound(NormConvention::PerDelay)?;
    let xnorm_lumped = bound(lumped_conv)?;
    let xnorm = match opts.convention {
        NormConvention::PerDelay => xnorm_per_delay,
        NormConvention::Lumped { .. } => xnorm_lumped,
    };
    let table = QTable::build(&sys.coeffs, opts.level_cap, t)?;
    let xa = XSeries::new(&table, alpha, alpha, opts.tol)?;
    let xnorm_matrix = inf_norm(&xa.eval(mu, t, 0.0)?.value);
    let integrated_xnorm = integrated_norm(sys, &xa, t, DEFAULT_NODES)?;
    let (rho, unique, eta) = Certificate::from_parts(lipschitz, mu_span, xnorm);
    Ok(Certificate {
        lipschitz,
        mu_span,
        convention: opts.convention,
        xnorm,
        rho,
        unique,
        eta,
        xnorm_per_delay,
        xnorm_lumped,
        xnorm_matrix,
        integrated_xnorm,
    })
}

/// `∫_0^t ‖X(t,s)‖∞ dμ(s)` with panels split at the kernel singularities.
pub fn integrated_norm(sys: &DelaySystem, x: &XSeries, t: f64, nodes: usize) -> Result<f64> {
    let mu = &sys.mu;
    let mut lags: Vec<f64> = x.lags().collect();
    lags.push(0.0);
    let singular: Vec<f64> = lags.iter().map(|l| t - l).collect();
    let pts = split_points(0.0, t, &singular);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let tol = 1e-12 * (1.0 + w[1].abs());
        let c = singular.iter().copied().filter(|&c| c >= w[1] - tol).fold(f64::INFINITY, f64::min);
        let kc = KernelCentre { u: mu.eval(c), kappa: x.beta().min(1.0) };
        let lag = t - c;
        let pinned = lag.abs() <= tol || mu.is_affine();
        for q in panel(mu, w[0], w[1], Some(kc), nodes) {
            let v = if pinned { x.eval_pinned(mu, t, q.s, lag, q.dist)? } else { x.eval(mu, t, q.s)? };
            total += q.weight * inf_norm(&v.value);
        }
    }
    Ok(total)
}

/// Sup-norm of `f` on `[lo, hi]`: 1000 uniform samples, then a golden-section
/// refinement around the best sample.
pub fn sampled_sup<F>(f: F, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<Vector>,
{
    const SAMPLES: usize = 1000;
    let g = |t: f64| f(t).map(|v| vec_inf_norm(&v));
    let h = (hi - lo) / SAMPLES as f64;
    let (mut best, mut arg) = (f64::NEG_INFINITY, lo);
    for k in 0..=SAMPLES {
        let t = lo + h * k as f64;
        let v = g(t)?;
        if v > best {
            best = v;
            arg = t;
        }
    }
    let (mut a, mut b) = ((arg - h).max(lo), (arg + h).min(hi));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        let (gc, gd) = (g(c)?, g(d)?);
        best = best.max(gc).max(gd);
        if gc > gd {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct UhReport {
    pub epsilon: f64,
    pub z_sup: f64,
    /// Sup-distance between perturbed and unperturbed solutions.
    pub distance: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Solves the system with forcing `ℸ + z` and without, and compares the
/// distance with `η ε`.
pub fn uh_experiment(
    sys: &DelaySystem,
    cert: &Certificate,
    epsilon: f64,
    z: &[Expr],
    cfg: &SolverConfig,
) -> Result<UhReport> {
    let eta = cert.eta.ok_or_else(|| Error::invalid("Ulam–Hyers experiment needs a certificate with rho < 1"))?;
    if z.len() != sys.n() || z.iter().any(Expr::uses_state) {
        return Err(Error::invalid("perturbation must have n components depending on t only"));
    }
    let zsys = sys.with_forcing(z.to_vec());
    let zero = Vector::zeros(sys.n());
    let z_sup = sampled_sup(|t| zsys.forcing_at(t, &zero), 0.0, sys.horizon)?;
    if !(z_sup < epsilon) {
        return Err(Error::invalid(format!("perturbation sup-norm {z_sup:e} is not below ε = {epsilon:e}")));
    }
    let perturbed = sys.with_forcing(
        sys.forcing.iter().zip(z).map(|(f, zi)| Expr::bin(BinOp::Add, f.clone(), zi.clone())).collect(),
    );
    let (base, pert) = rayon::join(|| solve_semilinear(sys, cfg), || solve_semilinear(&perturbed, cfg));
    let (base, pert) = (base?, pert?);
    let distance = pert.trajectory.sup_diff_on_common_nodes(&base.trajectory)?;
    let bound = eta * epsilon;
    Ok(UhReport { epsilon, z_sup, distance, bound, holds: distance <= bound })
}
