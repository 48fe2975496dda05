//! Gamma function and the truncated power kernel.

use crate::error::{Error, Result};

/// Γ(x) for x > 0 (Lanczos approximation).
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("gamma requires a positive finite argument, got {x}")));
    }
    if x.fract() == 0.0 && x <= 171.0 {
        return Ok(statrs::function::factorial::factorial(x as u64 - 1));
    }
    let g = statrs::function::gamma::gamma(x);
    // The Lanczos sum overflows internally just below the f64 limit of Γ.
    if g.is_infinite() && x > 2.0 {
        return Ok((x - 1.0) * statrs::function::gamma::gamma(x - 1.0));
    }
    Ok(g)
}

/// 1/Γ(x) for any real x; zero at the poles 0, −1, −2, …
pub fn recip_gamma(x: f64) -> f64 {
    if x > 0.0 {
        return gamma(x).map_or(0.0, |g| 1.0 / g);
    }
    if x.fract() == 0.0 {
        return 0.0;
    }
    // Reflection: 1/Γ(x) = Γ(1−x) sin(πx) / π.
    statrs::function::gamma::gamma(1.0 - x) * (std::f64::consts::PI * x).sin() / std::f64::consts::PI
}

/// `[x]₊^p`: zero whenever `x ≤ 0`, for every exponent.
pub struct PlusKernel;

impl PlusKernel {
    #[inline]
    pub fn eval(x: f64, p: f64) -> f64 {
        if x > 0.0 {
            x.powf(p)
        } else {
            0.0
        }
    }
}
