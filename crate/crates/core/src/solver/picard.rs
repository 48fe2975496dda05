//! Picard iteration `w_{k+1} = G(w_k)` for the semilinear system.

use crate::certify::{contraction_certificate, CertificateOptions};
use crate::error::{Error, Result};
use crate::system::DelaySystem;
use crate::trajectory::{Method, PointDiagnostics, Trajectory};
use crate::{vec_inf_norm, Vector};

use super::{default_grid, fill_trajectory, Representation, SolverConfig};

#[derive(Debug, Clone)]
pub struct PicardReport {
    pub trajectory: Trajectory,
    pub iterations: usize,
    /// Sup-distance between successive iterates.
    pub distances: Vec<f64>,
    /// Largest ratio of successive distances after the first iterate.
    pub contraction: Option<f64>,
    pub lipschitz: f64,
    pub lipschitz_estimated: bool,
    pub rho: f64,
    pub warning: Option<String>,
}

/// `1.5 × max ‖∂ℸ/∂w‖∞` over a box around `guess`.
pub fn estimate_lipschitz(sys: &DelaySystem, guess: &Trajectory) -> Result<f64> {
    let z = guess.grid.zero_index();
    let times = &guess.times()[z..];
    let stride = (times.len() / 50).max(1);
    let radius = 0.5 * guess.sup_norm().max(1.0);
    let n = sys.n();
    let mut worst = 0.0f64;
    for (k, &t) in times.iter().enumerate().step_by(stride) {
        let centre = &guess.values[z + k];
        // Centre and the 2n axis points of the box.
        let mut probes = vec![centre.clone()];
        for i in 0..n {
            for sgn in [-1.0, 1.0] {
                let mut p = centre.clone();
                p[i] += sgn * radius;
                probes.push(p);
            }
        }
        for p in &probes {
            worst = worst.max(sys.forcing_jacobian_norm(t, p)?);
        }
    }
    Ok(1.5 * worst)
}

pub fn solve_semilinear(sys: &DelaySystem, cfg: &SolverConfig) -> Result<PicardReport> {
    solve_semilinear_with(sys, cfg, &CertificateOptions::default())
}

/// As [`solve_semilinear`], with the norm convention used for the ρ warning.
pub fn solve_semilinear_with(sys: &DelaySystem, cfg: &SolverConfig, cert_opts: &CertificateOptions) -> Result<PicardReport> {
    let rep = Representation::new(sys, cfg)?;
    let grid = default_grid(sys, cfg)?;
    let phi0 = sys.phi(0.0)?;

    // Homogeneous and history parts do not depend on the iterate.
    let base = fill_trajectory(sys, grid.clone(), Method::Picard, |t| {
        let (mut v, mut d) = rep.homogeneous_term(t)?;
        let (h, dh) = rep.history_term(t)?;
        v += h;
        d.merge(dh.converged, dh.tail);
        Ok((v, d))
    })?;
    let step = |forcing: &(dyn Fn(f64) -> Result<Vector> + Sync)| -> Result<Trajectory> {
        let z = base.grid.zero_index();
        fill_trajectory(sys, grid.clone(), Method::Picard, |t| {
            let k = base.grid.node_index(t).expect("same grid");
            let (f, df) = rep.forcing_term(t, forcing, rep.breakpoints())?;
            let mut d: PointDiagnostics = base.diagnostics[k];
            d.merge(df.converged, df.tail);
            debug_assert!(k >= z);
            Ok((&base.values[k] + f, d))
        })
    };

    let frozen = |s: f64| sys.forcing_at(s, &phi0);
    let mut current = step(&frozen)?;

    let (lipschitz, lipschitz_estimated) = match sys.lipschitz {
        Some(l) => (l, false),
        None => (estimate_lipschitz(sys, &current)?, true),
    };
    let cert = contraction_certificate(sys, lipschitz, cert_opts)?;
    let warning = (cert.rho >= 1.0).then(|| {
        format!("contraction bound rho = {:.6} >= 1: uniqueness is not certified and convergence is not guaranteed", cert.rho)
    });

    let mut distances = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.picard_max_iter {
        let prev = &current;
        let g = |s: f64| sys.forcing_at(s, &prev.eval(sys, s)?);
        let next = step(&g)?;
        let dist = next.values.iter().zip(&current.values).map(|(a, b)| vec_inf_norm(&(a - b))).fold(0.0, f64::max);
        distances.push(dist);
        current = next;
        if dist < cfg.picard_tol {
            converged = true;
            break;
        }
    }
    let contraction = distances
        .windows(2)
        .filter(|w| w[0] > 100.0 * cfg.picard_tol)
        .map(|w| w[1] / w[0])
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    if !converged {
        return Err(Error::NotConverged {
            what: "Picard iteration".into(),
            detail: format!(
                "{} iterations, last distance {:e}, observed factor {}",
                distances.len(),
                distances.last().copied().unwrap_or(f64::NAN),
                contraction.map_or("n/a".into(), |c| format!("{c:.4}"))
            ) + &warning.map(|w| format!("; {w}")).unwrap_or_default(),
        });
    }
    current.meta.insert("iterations".into(), distances.len().to_string());
    current.meta.insert("contraction_factor".into(), contraction.map_or("n/a".into(), |c| format!("{c:.6e}")));
    current.meta.insert("lipschitz".into(), format!("{lipschitz:e}"));
    current.meta.insert("rho".into(), format!("{:.9e}", cert.rho));
    current.meta.insert("picard_tol".into(), format!("{:e}", cfg.picard_tol));
    if let Some(w) = &warning {
        current.meta.insert("warning".into(), w.clone());
    }
    Ok(PicardReport {
        trajectory: current,
        iterations: distances.len(),
        distances,
        contraction,
        lipschitz,
        lipschitz_estimated,
        rho: cert.rho,
        warning,
    })
}
