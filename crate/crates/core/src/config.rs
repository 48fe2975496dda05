//! Problem files (TOML). See the README for the full schema.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::certify::{CertificateOptions, NormConvention, NormData};
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::mu_calculus::{MuKind, MuMap};
use crate::oracle::{OracleConfig, ProductRule};
use crate::q_lattice::BoundaryConvention;
use crate::solver::{HistoryForm, SolverConfig};
use crate::system::{Coefficients, DelaySystem};
use crate::Matrix;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub system: RawSystem,
    #[serde(default)]
    pub variants: BTreeMap<String, RawVariant>,
    pub mu: RawMu,
    pub history: RawHistory,
    #[serde(default)]
    pub forcing: RawForcing,
    #[serde(default)]
    pub certificate: RawCertificate,
    #[serde(default)]
    pub solver: RawSolver,
    #[serde(default)]
    pub oracle: RawOracle,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSystem {
    pub n: usize,
    pub alpha: f64,
    pub delays: Vec<f64>,
    pub horizon: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    pub variant: Option<String>,
}

/// Alternative coefficient sets, selected by name.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVariant {
    #[serde(rename = "A")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    pub b: Option<Vec<f64>>,
    #[serde(rename = "F")]
    pub f: Option<Vec<Vec<f64>>>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMu {
    pub preset: Option<String>,
    pub power: Option<f64>,
    pub expr: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHistory {
    pub phi: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawForcing {
    pub f: Option<Vec<String>>,
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCertificate {
    pub convention: Option<String>,
    /// 1-based delay index used by the lumped convention.
    pub lumped_delay: Option<usize>,
    pub norms: Option<RawNorms>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNorms {
    pub a: Vec<f64>,
    pub b: f64,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub quad_nodes: Option<usize>,
    pub mlf_tol: Option<f64>,
    pub level_cap: Option<usize>,
    pub grid_per_unit: Option<usize>,
    pub history_form: Option<String>,
    pub picard_tol: Option<f64>,
    pub picard_max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOracle {
    pub steps_per_unit: Option<usize>,
    pub corrector_iterations: Option<usize>,
    pub interpolation_order: Option<usize>,
    pub rule: Option<String>,
}

/// A validated problem with its numerical settings.
#[derive(Debug, Clone)]
pub struct Problem {
    pub system: DelaySystem,
    pub solver: SolverConfig,
    pub oracle: OracleConfig,
    pub certificate: CertificateOptions,
    pub variant: Option<String>,
}

fn matrix(path: &str, n: usize, data: &[f64]) -> Result<Matrix> {
    if data.len() != n * n {
        return Err(Error::config(path, format!("expected {} row-major entries, found {}", n * n, data.len())));
    }
    if let Some(x) = data.iter().find(|x| !x.is_finite()) {
        return Err(Error::config(path, format!("entry {x} is not finite")));
    }
    Ok(Matrix::from_row_slice(n, n, data))
}

fn matrices(path: &str, n: usize, d: usize, data: &[Vec<f64>]) -> Result<Vec<Matrix>> {
    if data.len() != d {
        return Err(Error::config(path, format!("expected {d} matrices (one per delay), found {}", data.len())));
    }
    data.iter().enumerate().map(|(j, m)| matrix(&format!("{path}[{j}]"), n, m)).collect()
}

fn exprs(path: &str, n: usize, src: &[String]) -> Result<Vec<Expr>> {
    if src.len() != n {
        return Err(Error::config(path, format!("expected {n} expressions, found {}", src.len())));
    }
    src.iter()
        .enumerate()
        .map(|(k, s)| expr::parse(s).map_err(|e| Error::config(format!("{path}[{k}]"), e.to_string())))
        .collect()
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("<toml>", e.to_string().trim().to_string()))
    }

    /// Builds and validates the problem; `variant` overrides `system.variant`.
    pub fn into_problem(self, variant: Option<&str>) -> Result<Problem> {
        let s = &self.system;
        let n = s.n;
        if n == 0 {
            return Err(Error::config("system.n", "dimension must be positive"));
        }
        let d = s.delays.len();
        if d == 0 {
            return Err(Error::config("system.delays", "at least one delay is required"));
        }
        if let Some((j, r)) = s.delays.iter().enumerate().find(|(_, r)| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::config(format!("system.delays[{j}]"), format!("delay {r} must be positive")));
        }
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            return Err(Error::config("system.alpha", format!("order {} must lie in (0, 1)", s.alpha)));
        }
        if !(s.horizon > 0.0) || !s.horizon.is_finite() {
            return Err(Error::config("system.horizon", format!("horizon {} must be positive", s.horizon)));
        }
        let chosen = variant.map(str::to_string).or_else(|| s.variant.clone());
        let (mut a_src, mut b_src, mut f_src) = (s.a.clone(), s.b.clone(), s.f.clone());
        let mut prefix = ("system.A".to_string(), "system.B".to_string(), "system.F".to_string());
        if let Some(name) = &chosen {
            let v = self
                .variants
                .get(name)
                .ok_or_else(|| Error::config("system.variant", format!("no [variants.{name}] section")))?;
            if let Some(a) = &v.a {
                a_src = a.clone();
                prefix.0 = format!("variants.{name}.A");
            }
            if let Some(b) = &v.b {
                b_src = b.clone();
                prefix.1 = format!("variants.{name}.B");
            }
            if let Some(f) = &v.f {
                f_src = f.clone();
                prefix.2 = format!("variants.{name}.F");
            }
        }
        let coeffs = Coefficients::new(
            s.delays.clone(),
            matrices(&prefix.0, n, d, &a_src)?,
            matrix(&prefix.1, n, &b_src)?,
            matrices(&prefix.2, n, d, &f_src)?,
        )
        .map_err(|e| Error::config("system", e.to_string()))?;
        let r = coeffs.r_max();

        let kind = match (&self.mu.preset, &self.mu.expr) {
            (Some(_), Some(_)) => return Err(Error::config("mu", "give either `preset` or `expr`, not both")),
            (None, None) => return Err(Error::config("mu", "one of `preset` or `expr` is required")),
            (None, Some(e)) => MuKind::Custom(expr::parse(e).map_err(|err| Error::config("mu.expr", err.to_string()))?),
            (Some(p), None) => match p.as_str() {
                "identity" => MuKind::Identity,
                "sqrt_odd_extended" => MuKind::SqrtOddExtended,
                "log1p" => MuKind::Log1p,
                "power" => MuKind::Power(
                    self.mu.power.ok_or_else(|| Error::config("mu.power", "preset `power` needs `power = p`"))?,
                ),
                other => return Err(Error::config("mu.preset", format!("unknown preset `{other}`"))),
            },
        };
        let mu = MuMap::new(kind, -r, s.horizon).map_err(|e| Error::config("mu", e.to_string()))?;

        let phi = exprs("history.phi", n, &self.history.phi)?;
        let forcing = match &self.forcing.f {
            Some(f) => exprs("forcing.f", n, f)?,
            None => DelaySystem::zero_exprs(n),
        };
        let system = DelaySystem { alpha: s.alpha, coeffs, mu, phi, forcing, horizon: s.horizon, lipschitz: self.forcing.lipschitz };
        system.validate().map_err(|e| Error::config("system", e.to_string()))?;

        let mut solver = SolverConfig::default();
        let rs = &self.solver;
        if let Some(v) = rs.quad_nodes {
            solver.quad_nodes = v;
        }
        if let Some(v) = rs.mlf_tol {
            solver.mlf_tol = v;
        }
        if let Some(v) = rs.level_cap {
            solver.level_cap = v;
        }
        if let Some(v) = rs.grid_per_unit {
            solver.grid_per_unit = v;
        }
        if let Some(v) = rs.picard_tol {
            solver.picard_tol = v;
        }
        if let Some(v) = rs.picard_max_iter {
            solver.picard_max_iter = v;
        }
        if let Some(h) = &rs.history_form {
            solver.history_form = match h.as_str() {
                "memory_tail" => HistoryForm::MemoryTail,
                "published" => HistoryForm::Published,
                other => return Err(Error::config("solver.history_form", format!("unknown form `{other}`"))),
            };
        }
        solver.boundary = BoundaryConvention::Recursive;
        if solver.quad_nodes == 0 || solver.level_cap == 0 || solver.grid_per_unit == 0 {
            return Err(Error::config("solver", "node counts, level cap and grid density must be positive"));
        }
        if !(solver.mlf_tol > 0.0) || !(solver.picard_tol > 0.0) {
            return Err(Error::config("solver", "tolerances must be positive"));
        }

        let mut oracle = OracleConfig::default();
        let ro = &self.oracle;
        if let Some(v) = ro.steps_per_unit {
            oracle.steps_per_unit = v;
        }
        if let Some(v) = ro.corrector_iterations {
            oracle.corrector_iterations = v;
        }
        if let Some(v) = ro.interpolation_order {
            oracle.interpolation_order = v;
        }
        if let Some(rule) = &ro.rule {
            oracle.rule = match rule.as_str() {
                "trapezoid" => ProductRule::Trapezoid,
                "rectangle" => ProductRule::Rectangle,
                other => return Err(Error::config("oracle.rule", format!("unknown rule `{other}`"))),
            };
        }
        oracle.validate().map_err(|e| Error::config("oracle", e.to_string()))?;

        let rc = &self.certificate;
        let convention = match rc.convention.as_deref().unwrap_or("per_delay") {
            "per_delay" => NormConvention::PerDelay,
            "lumped" => {
                let k = rc.lumped_delay.unwrap_or(1);
                if k == 0 || k > d {
                    return Err(Error::config("certificate.lumped_delay", format!("must lie in 1..={d}")));
                }
                NormConvention::Lumped { delay_index: k - 1 }
            }
            other => return Err(Error::config("certificate.convention", format!("unknown convention `{other}`"))),
        };
        let norms = match &rc.norms {
            None => None,
            Some(nm) => {
                if nm.a.len() != d || nm.f.len() != d {
                    return Err(Error::config("certificate.norms", format!("`a` and `f` need {d} entries each")));
                }
                if nm.a.iter().chain(&nm.f).chain(std::iter::once(&nm.b)).any(|x| !(*x >= 0.0)) {
                    return Err(Error::config("certificate.norms", "norms must be nonnegative"));
                }
                Some(NormData { a: nm.a.clone(), b: nm.b, f: nm.f.clone() })
            }
        };
        let certificate = CertificateOptions { convention, norms, ..CertificateOptions::default() };
        Ok(Problem { system, solver, oracle, certificate, variant: chosen })
    }
}

impl Problem {
    pub fn load(path: impl AsRef<Path>, variant: Option<&str>) -> Result<Problem> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::from_toml(&text, variant).map_err(|e| match e {
            Error::Config { path: p, msg } if p == "<toml>" => Error::config(path.display().to_string(), msg),
            other => other,
        })
    }

    pub fn from_toml(text: &str, variant: Option<&str>) -> Result<Problem> {
        RawConfig::from_toml(text)?.into_problem(variant)
    }
}
