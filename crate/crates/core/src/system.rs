//! Problem data: coefficients, history, forcing, μ and horizon.

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Var};
use crate::mu_calculus::MuMap;
use crate::{Matrix, Vector};

/// Delays and the coefficient matrices `A_j`, `B`, `F_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub delays: Vec<f64>,
    pub a: Vec<Matrix>,
    pub b: Matrix,
    pub f: Vec<Matrix>,
}

impl Coefficients {
    pub fn new(delays: Vec<f64>, a: Vec<Matrix>, b: Matrix, f: Vec<Matrix>) -> Result<Self> {
        let c = Coefficients { delays, a, b, f };
        c.validate()?;
        Ok(c)
    }

    /// Scalar (1×1) coefficients.
    pub fn scalar(delays: &[f64], a: &[f64], b: f64, f: &[f64]) -> Result<Self> {
        let m = |x: f64| Matrix::from_element(1, 1, x);
        Self::new(delays.to_vec(), a.iter().map(|&x| m(x)).collect(), m(b), f.iter().map(|&x| m(x)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.b.nrows();
        if n == 0 || self.b.ncols() != n {
            return Err(Error::Dimension(format!("B is {}×{}, expected square", n, self.b.ncols())));
        }
        let d = self.delays.len();
        if d == 0 {
            return Err(Error::invalid("at least one delay is required"));
        }
        if let Some(r) = self.delays.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::invalid(format!("delays must be positive, got {r}")));
        }
        if self.a.len() != d || self.f.len() != d {
            return Err(Error::Dimension(format!(
                "{d} delays but {} A-matrices and {} F-matrices",
                self.a.len(),
                self.f.len()
            )));
        }
        for (name, ms) in [("A", &self.a), ("F", &self.f)] {
            for (j, m) in ms.iter().enumerate() {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::Dimension(format!("{name}{} is {}×{}, expected {n}×{n}", j + 1, m.nrows(), m.ncols())));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    pub fn d(&self) -> usize {
        self.delays.len()
    }

    pub fn r_max(&self) -> f64 {
        self.delays.iter().copied().fold(0.0, f64::max)
    }
}

/// The full initial-value problem.
#[derive(Debug, Clone)]
pub struct DelaySystem {
    pub alpha: f64,
    pub coeffs: Coefficients,
    pub mu: MuMap,
    /// History components φ₁..φₙ as functions of `t`.
    pub phi: Vec<Expr>,
    /// Forcing components; referencing `w1..wn` makes the system semilinear.
    pub forcing: Vec<Expr>,
    pub horizon: f64,
    /// Lipschitz constant of the forcing in `w`, if known.
    pub lipschitz: Option<f64>,
}

impl DelaySystem {
    pub fn validate(&self) -> Result<()> {
        self.coeffs.validate()?;
        let n = self.n();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("order α = {} outside (0, 1)", self.alpha)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid(format!("horizon T = {} must be positive", self.horizon)));
        }
        let (lo, hi) = self.mu.domain();
        if lo > -self.r_max() || hi < self.horizon {
            return Err(Error::invalid(format!(
                "μ domain [{lo}, {hi}] does not cover [−r, T] = [{}, {}]",
                -self.r_max(),
                self.horizon
            )));
        }
        if self.phi.len() != n || self.forcing.len() != n {
            return Err(Error::Dimension(format!(
                "n = {n} but {} history and {} forcing components",
                self.phi.len(),
                self.forcing.len()
            )));
        }
        if self.phi.iter().any(Expr::uses_state) {
            return Err(Error::invalid("history φ must not reference w1..wn"));
        }
        if let Some(k) = self.forcing.iter().filter_map(Expr::max_w_index).max() {
            if k >= n {
                return Err(Error::invalid(format!("forcing references w{} but n = {n}", k + 1)));
            }
        }
        if let Some(l) = self.lipschitz {
            if !(l >= 0.0) {
                return Err(Error::invalid(format!("Lipschitz constant {l} must be nonnegative")));
            }
        }
        // Smoothness probe of φ on [−r, 0].
        let r = self.r_max();
        for k in 0..=100 {
            let t = -r + r * k as f64 / 100.0;
            let d = self.phi_deriv(t)?;
            if d.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("history φ is not differentiable at t = {t}")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.coeffs.n()
    }

    pub fn d(&self) -> usize {
        self.coeffs.d()
    }

    pub fn r_max(&self) -> f64 {
        self.coeffs.r_max()
    }

    pub fn is_linear(&self) -> bool {
        !self.forcing.iter().any(Expr::uses_state)
    }

    pub fn has_forcing(&self) -> bool {
        !self.forcing.iter().all(Expr::is_zero_literal)
    }

    pub fn phi(&self, t: f64) -> Result<Vector> {
        let b = Bindings::t(t);
        let mut v = Vector::zeros(self.n());
        for (k, e) in self.phi.iter().enumerate() {
            v[k] = e.eval(&b)?;
        }
        Ok(v)
    }

    pub fn phi_deriv(&self, t: f64) -> Result<Vector> {
        let b = Bindings::t(t);
        let mut v = Vector::zeros(self.n());
        for (k, e) in self.phi.iter().enumerate() {
            v[k] = e.eval_dual(&b, Var::T)?.1;
        }
        Ok(v)
    }

    /// ℸ(t, w).
    pub fn forcing_at(&self, t: f64, w: &Vector) -> Result<Vector> {
        let b = Bindings::tw(t, w.as_slice());
        let mut v = Vector::zeros(self.n());
        for (k, e) in self.forcing.iter().enumerate() {
            v[k] = e.eval(&b)?;
        }
        Ok(v)
    }

    /// ∞-norm of the Jacobian ∂ℸ/∂w at `(t, w)`.
    pub fn forcing_jacobian_norm(&self, t: f64, w: &Vector) -> Result<f64> {
        let b = Bindings::tw(t, w.as_slice());
        let mut worst = 0.0f64;
        for e in &self.forcing {
            let mut row = 0.0;
            for k in 0..self.n() {
                row += e.eval_dual(&b, Var::W(k))?.1.abs();
            }
            worst = worst.max(row);
        }
        Ok(worst)
    }

    pub fn with_forcing(&self, forcing: Vec<Expr>) -> Self {
        DelaySystem { forcing, ..self.clone() }
    }

    pub fn with_history(&self, phi: Vec<Expr>) -> Self {
        DelaySystem { phi, ..self.clone() }
    }

    pub fn zero_exprs(n: usize) -> Vec<Expr> {
        vec![Expr::Num(0.0); n]
    }
}
