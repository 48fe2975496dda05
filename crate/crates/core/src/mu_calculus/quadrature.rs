//! Gauss–Legendre rules and graded panels for weakly singular kernels.
//!
//! A panel `[s_lo, s_hi]` is integrated in the variable `u = μ(s)`. When a
//! kernel `(U − u)^(κ−1)` has its singularity at `U ≥ μ(s_hi)`, the panel is
//! mapped through `w = (U − u)^κ`, which absorbs the singular factor exactly.
//! A sigmoidal (Kress) grading of order 4 is then applied on top, so mild
//! power-type endpoint behaviour of the remaining factor is also resolved.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::MuMap;

/// Nodes and weights on `[0, 1]`.
#[derive(Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn compute_rule(n: usize) -> GaussLegendre {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    GaussLegendre { nodes, weights }
}

/// Cached rule with `n` points on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let n = n.max(1);
    let mut cache = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    cache.entry(n).or_insert_with(|| Arc::new(compute_rule(n))).clone()
}

const GRADING: i32 = 4;

/// Kress sigmoidal map y ∈ [0,1] → [0,1] and its derivative.
#[inline]
fn kress(y: f64) -> (f64, f64) {
    let a = y.powi(GRADING);
    let b = (1.0 - y).powi(GRADING);
    let den = a + b;
    let d = GRADING as f64 * (y * (1.0 - y)).powi(GRADING - 1) / (den * den);
    (a / den, d)
}

/// One quadrature node: `weight` integrates with respect to `u = μ(s)`.
#[derive(Debug, Clone, Copy)]
pub struct QuadNode {
    pub s: f64,
    pub u: f64,
    /// `U − u` when a kernel centre was supplied (accurate near `U`).
    pub dist: f64,
    pub weight: f64,
}

/// Singular point `u_c` and exponent `κ ∈ (0, 1]` of a kernel `(u_c − u)^(κ−1)`.
#[derive(Debug, Clone, Copy)]
pub struct KernelCentre {
    pub u: f64,
    pub kappa: f64,
}

/// Graded rule on `[s_lo, s_hi]` in the μ-variable.
pub fn panel(mu: &MuMap, s_lo: f64, s_hi: f64, centre: Option<KernelCentre>, n: usize) -> Vec<QuadNode> {
    let gl = gauss_legendre(n);
    let (u_lo, u_hi) = (mu.eval(s_lo), mu.eval(s_hi));
    let mut out = Vec::with_capacity(n);
    if !(u_hi > u_lo) {
        return out;
    }
    match centre {
        Some(KernelCentre { u: uc, kappa }) if kappa < 1.0 => {
            let w_lo = (uc - u_hi).max(0.0).powf(kappa);
            let w_hi = (uc - u_lo).powf(kappa);
            let inv = 1.0 / kappa;
            for (&y, &gw) in gl.nodes.iter().zip(&gl.weights) {
                let (psi, dpsi) = kress(y);
                let w = w_lo + (w_hi - w_lo) * psi;
                let dist = w.powf(inv);
                let u = uc - dist;
                let jac = (w_hi - w_lo) * dpsi * inv * w.powf(inv - 1.0);
                out.push(QuadNode { s: mu.inverse(u).clamp(s_lo, s_hi), u, dist, weight: gw * jac });
            }
        }
        _ => {
            let uc = centre.map(|c| c.u).unwrap_or(f64::NAN);
            for (&y, &gw) in gl.nodes.iter().zip(&gl.weights) {
                let (psi, dpsi) = kress(y);
                // Grade from the right end so `dist` stays accurate near U.
                let back = (u_hi - u_lo) * (1.0 - psi);
                let u = u_hi - back;
                let dist = if uc.is_nan() { f64::NAN } else { (uc - u_hi) + back };
                out.push(QuadNode {
                    s: mu.inverse(u).clamp(s_lo, s_hi),
                    u,
                    dist,
                    weight: gw * (u_hi - u_lo) * dpsi,
                });
            }
        }
    }
    out
}

/// Sorted, deduplicated split points of `[a, t]`: endpoints plus every
/// interior breakpoint.
pub fn split_points(a: f64, t: f64, breakpoints: &[f64]) -> Vec<f64> {
    let mut pts = vec![a];
    let tol = 1e-13 * (1.0 + a.abs().max(t.abs()));
    let mut inner: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > a + tol && b < t - tol).collect();
    inner.sort_by(f64::total_cmp);
    for b in inner {
        if b - pts[pts.len() - 1] > tol {
            pts.push(b);
        }
    }
    pts.push(t);
    pts
}
