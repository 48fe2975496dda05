#![allow(dead_code)]

use std::path::PathBuf;

use fracdelay::config::Problem;
use fracdelay::expr::{parse, Expr};
use fracdelay::mu_calculus::{MuKind, MuMap};
use fracdelay::system::{Coefficients, DelaySystem};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load(name: &str) -> Problem {
    Problem::load(fixture(name), None).expect("fixture loads")
}

pub fn exprs(src: &[&str]) -> Vec<Expr> {
    src.iter().map(|s| parse(s).expect("valid expression")).collect()
}

/// Scalar one-delay system on the identity time scale.
#[allow(clippy::too_many_arguments)]
pub fn scalar_system(alpha: f64, a: f64, b: f64, f: f64, r: f64, horizon: f64, phi: &str, forcing: &str) -> DelaySystem {
    let coeffs = Coefficients::scalar(&[r], &[a], b, &[f]).unwrap();
    let mu = MuMap::new(MuKind::Identity, -r, horizon).unwrap();
    let sys = DelaySystem {
        alpha,
        coeffs,
        mu,
        phi: exprs(&[phi]),
        forcing: exprs(&[forcing]),
        horizon,
        lipschitz: None,
    };
    sys.validate().unwrap();
    sys
}

pub fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1e-300)
}
