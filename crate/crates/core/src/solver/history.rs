//! μ-Caputo derivative of the history φ with base point `−r_j`.
//!
//! On `[−r_j, 0]` the derivative behaves like `(u − u_a)^{1−α}·G(u)` with a
//! smooth `G` (`u = μ(s)`, `u_a = μ(−r_j)`), so `G` is sampled once and
//! stored as a Chebyshev interpolant. For `s > 0` the state is continued by
//! the constant `φ(0)`, and the derivative reduces to the memory integral over
//! `[−r_j, 0]`, computed directly.

use crate::error::Result;
use crate::mu_calculus::caputo_deriv;
use crate::system::DelaySystem;
use crate::Vector;

const TAIL_TOL: f64 = 1e-12;
const SIZES: [usize; 4] = [16, 32, 64, 128];

#[derive(Debug, Clone)]
pub(crate) struct HistoryCaputo {
    a: f64,
    u_a: f64,
    u_0: f64,
    coeffs: Vec<Vector>,
    nodes: usize,
    /// Relative size of the trailing Chebyshev coefficients.
    pub tail: f64,
}

impl HistoryCaputo {
    pub fn new(sys: &DelaySystem, delay: f64, nodes: usize) -> Result<Self> {
        let a = -delay;
        let mu = &sys.mu;
        let (u_a, u_0) = (mu.eval(a), mu.eval(0.0));
        let mut best = None;
        for &m in &SIZES {
            let samples: Vec<Vector> = (0..m)
                .map(|i| {
                    let x = (std::f64::consts::PI * (i as f64 + 0.5) / m as f64).cos();
                    let u = u_a + 0.5 * (x + 1.0) * (u_0 - u_a);
                    let s = mu.inverse(u);
                    let d = raw(sys, a, s, nodes)?;
                    Ok(d / (u - u_a).powf(1.0 - sys.alpha))
                })
                .collect::<Result<_>>()?;
            let coeffs = chebyshev_coefficients(&samples);
            let scale = coeffs.iter().map(|c| c.amax()).fold(0.0, f64::max);
            let tail = if scale == 0.0 { 0.0 } else { coeffs[m - 2].amax().max(coeffs[m - 1].amax()) / scale };
            let done = tail <= TAIL_TOL;
            best = Some(HistoryCaputo { a, u_a, u_0, coeffs, nodes, tail });
            if done {
                break;
            }
        }
        Ok(best.expect("at least one size"))
    }

    pub fn eval(&self, sys: &DelaySystem, s: f64) -> Result<Vector> {
        if s > 0.0 {
            return raw(sys, self.a, s, self.nodes);
        }
        let u = sys.mu.eval(s);
        let x = (2.0 * (u - self.u_a) / (self.u_0 - self.u_a) - 1.0).clamp(-1.0, 1.0);
        Ok(clenshaw(&self.coeffs, x) * (u - self.u_a).max(0.0).powf(1.0 - sys.alpha))
    }
}

/// Caputo derivative of the constant continuation of φ, evaluated directly.
fn raw(sys: &DelaySystem, a: f64, s: f64, nodes: usize) -> Result<Vector> {
    let n = sys.n();
    let f = |t: f64| sys.phi(t.min(0.0));
    let df = |t: f64| if t <= 0.0 { sys.phi_deriv(t) } else { Ok(Vector::zeros(n)) };
    Ok(caputo_deriv(f, Some(df), sys.alpha, &sys.mu, a, s, nodes, &[0.0])?.value)
}

fn chebyshev_coefficients(samples: &[Vector]) -> Vec<Vector> {
    let m = samples.len();
    (0..m)
        .map(|k| {
            let mut c = samples[0].clone() * 0.0;
            for (i, v) in samples.iter().enumerate() {
                let w = (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / m as f64).cos();
                c.axpy(w, v, 1.0);
            }
            c * if k == 0 { 1.0 / m as f64 } else { 2.0 / m as f64 }
        })
        .collect()
}

fn clenshaw(c: &[Vector], x: f64) -> Vector {
    let mut b1 = c[0].clone() * 0.0;
    let mut b2 = b1.clone();
    for ck in c.iter().skip(1).rev() {
        let b0 = ck + &b1 * (2.0 * x) - &b2;
        b2 = b1;
        b1 = b0;
    }
    &c[0] + &b1 * x - &b2
}

