#![allow(clippy::excessive_precision)] // reference values are kept exactly as the oracle scripts print them

mod common;

use common::rel_err;
use fracdelay::mlf::{eval_x, norm_bound_x, XSeries, DEFAULT_TOL};
use fracdelay::mu_calculus::{caputo_deriv, gamma, rl_integral, MuKind, MuMap, PlusKernel};
use fracdelay::q_lattice::QTable;
use fracdelay::system::Coefficients;
use fracdelay::{inf_norm, Matrix, Vector};

fn m2(v: [f64; 4]) -> Matrix {
    Matrix::from_row_slice(2, 2, &v)
}

fn neutral_pair() -> Coefficients {
    Coefficients::new(
        vec![0.3, 0.2],
        vec![m2([0.17, 0.83, 0.0, 0.35]), m2([0.36, 0.64, 0.07, 0.11])],
        m2([0.33, 0.0, 0.03, 0.125]),
        vec![m2([0.43, 0.57, 0.03, 0.125]), m2([0.0; 4])],
    )
    .unwrap()
}

fn identity(hi: f64) -> MuMap {
    MuMap::new(MuKind::Identity, -1.0, hi).unwrap()
}

#[test]
fn vanishes_before_its_base_point() {
    let c = neutral_pair();
    let table = QTable::build(&c, 60, 1.0).unwrap();
    let mu = identity(1.0);
    for beta in [0.8, 1.0, 1.7] {
        let x = XSeries::new(&table, 0.8, beta, DEFAULT_TOL).unwrap();
        for t in [-0.3, -0.1, -1e-9] {
            assert_eq!(x.eval(&mu, t, 0.0).unwrap().value, Matrix::zeros(2, 2));
        }
        for (t, s) in [(0.1, 0.2), (0.0, 0.3), (0.45, 0.5), (0.2, 0.2 + 1e-9)] {
            assert_eq!(x.eval(&mu, t, s).unwrap().value, Matrix::zeros(2, 2), "β={beta} t={t} s={s}");
        }
    }
}

#[test]
fn initial_values() {
    let table = QTable::build(&neutral_pair(), 60, 1.0).unwrap();
    let mu = identity(1.0);
    assert_eq!(eval_x(0.8, 1.0, 0.0, 0.0, &table, &mu, DEFAULT_TOL).unwrap().value, Matrix::identity(2, 2));
    for r in [0.3, 0.2] {
        assert_eq!(eval_x(0.8, 1.0, 0.0, r, &table, &mu, DEFAULT_TOL).unwrap().value, Matrix::zeros(2, 2));
    }
    assert!(eval_x(0.8, 1.0, 0.5, -0.1, &table, &mu, DEFAULT_TOL).is_err());
    // The lattice only reaches lag 1.
    assert!(eval_x(0.8, 1.0, 1.5, 0.0, &table, &identity(2.0), DEFAULT_TOL).is_err());
}

#[test]
fn classical_mittag_leffler_reduction() {
    // t^{β−1} E_{α,β}(0.5 t^α) from tests/oracles/mittag_leffler.py.
    let reference = [
        ((0.8, 1.0), [1.197_724_858_041_715_2, 1.374_926_419_784_778_8, 1.763_203_674_366_713]),
        ((0.8, 0.8), [1.408_462_119_121_129_2, 1.444_775_545_957_087_6, 1.683_812_678_036_437_6]),
        ((0.5, 1.0), [1.358_642_370_104_722_1, 1.567_059_236_692_856_5, 1.952_360_489_182_557_1]),
    ];
    let c = Coefficients::scalar(&[0.4], &[0.0], 0.5, &[0.0]).unwrap();
    let table = QTable::build(&c, 200, 1.0).unwrap();
    let mu = identity(1.0);
    for ((alpha, beta), vals) in reference {
        for (t, want) in [0.25, 0.5, 1.0].into_iter().zip(vals) {
            let v = eval_x(alpha, beta, t, 0.0, &table, &mu, DEFAULT_TOL).unwrap();
            assert!(v.converged);
            assert!(rel_err(v.value[(0, 0)], want) < 1e-8, "({alpha},{beta},{t}): {} vs {want}", v.value[(0, 0)]);
        }
    }
    for t in [0.25, 0.5, 1.0] {
        let v = eval_x(1.0, 1.0, t, 0.0, &table, &mu, DEFAULT_TOL).unwrap().value[(0, 0)];
        assert!(rel_err(v, (0.5 * t).exp()) < 1e-10);
    }
}

#[test]
fn non_neutral_delayed_reduction() {
    // Binomial delayed series from tests/oracles/delayed_series.py.
    let c = Coefficients::scalar(&[0.25], &[0.0], 0.5, &[0.3]).unwrap();
    let table = QTable::build(&c, 200, 1.0).unwrap();
    let mu = identity(1.0);
    for (beta, t, want) in [
        (0.8, 0.6, 1.728_963_393_976_171_7),
        (0.8, 1.0, 2.233_253_935_664_205_9),
        (1.0, 0.6, 1.634_814_880_884_045_6),
        (1.0, 1.0, 2.230_475_602_088_156),
    ] {
        let v = eval_x(0.8, beta, t, 0.0, &table, &mu, DEFAULT_TOL).unwrap().value[(0, 0)];
        assert!(rel_err(v, want) < 1e-8, "β={beta} t={t}: {v} vs {want}");
    }
}

#[test]
fn shift_coherence() {
    let c = neutral_pair();
    let table = QTable::build(&c, 200, 1.0).unwrap();
    let mu = identity(1.0);
    let (alpha, beta) = (0.8, 0.9);
    let x = XSeries::new(&table, alpha, beta, DEFAULT_TOL).unwrap();
    for (j, &r) in c.delays.iter().enumerate() {
        // Away from the breakpoints (multiples of 0.1), where X^{α,β<1} is singular.
        for t in [0.35, 0.55, 0.93] {
            let shifted = x.eval(&mu, t, r).unwrap().value;
            let scale = inf_norm(&shifted);
            // Same lattice with the j-th coordinate of every index raised by one.
            let mut rebased = Matrix::zeros(2, 2);
            for k in 0..200 {
                let g = gamma(k as f64 * alpha + beta).unwrap();
                for (p, lag) in table.lags().iter().enumerate() {
                    let arg = t - (lag + r);
                    if arg > 0.0 {
                        rebased += table.at(k + 1, p) * (PlusKernel::eval(arg, k as f64 * alpha + beta - 1.0) / g);
                    }
                }
            }
            assert!((&shifted - &rebased).amax() <= 1e-8 * scale, "j={j} t={t}");
            let translated = x.eval(&mu, t - r, 0.0).unwrap().value;
            assert!((&shifted - &translated).amax() <= 1e-8 * scale, "j={j} t={t}");
        }
        let t = 0.95;
        let two = x.eval(&mu, t, 2.0 * r).unwrap().value;
        let translated = x.eval(&mu, t - 2.0 * r, 0.0).unwrap().value;
        assert!((&two - &translated).amax() <= 1e-8 * inf_norm(&two).max(1e-300));
    }
}

#[test]
fn satisfies_its_defining_equation() {
    // D^α [X(t,0) − Σ A_j X(t,r_j)] = B X(t,0) + Σ F_j X(t,r_j), entrywise.
    let c = neutral_pair();
    let table = QTable::build(&c, 200, 1.0).unwrap();
    let mu = identity(1.0);
    let alpha = 0.8;
    let x = XSeries::new(&table, alpha, 1.0, DEFAULT_TOL).unwrap();
    let dx = XSeries::mu_derivative(&table, alpha, 1.0, DEFAULT_TOL).unwrap();
    let combo = |series: &XSeries, t: f64| -> Matrix {
        let mut m = series.eval(&mu, t, 0.0).unwrap().value;
        for (a, &r) in c.a.iter().zip(&c.delays) {
            m -= a * series.eval(&mu, t, r).unwrap().value;
        }
        m
    };
    let mut breakpoints: Vec<f64> = x.lags().filter(|&l| l > 0.0 && l < 1.0).collect();
    breakpoints.sort_by(f64::total_cmp);
    for step in 1..=10 {
        let t = 0.1 * step as f64 - 0.013;
        let flat = |m: Matrix| Vector::from_column_slice(m.transpose().as_slice());
        let f = |s: f64| Ok(flat(combo(&x, s)));
        let df = |s: f64| Ok(flat(combo(&dx, s)));
        let bps: Vec<f64> = breakpoints.iter().copied().filter(|&b| b < t).collect();
        let lhs = caputo_deriv(f, Some(df), alpha, &mu, 0.0, t, 64, &bps).unwrap().value;
        let mut rhs = &c.b * x.eval(&mu, t, 0.0).unwrap().value;
        for (fj, &r) in c.f.iter().zip(&c.delays) {
            rhs += fj * x.eval(&mu, t, r).unwrap().value;
        }
        let rhs = flat(rhs);
        let err = (&lhs - &rhs).amax() / rhs.amax();
        assert!(err < 1e-3, "t={t}: {lhs} vs {rhs}");
    }
}

#[test]
fn integral_inequality_for_unit_beta() {
    // ∫_0^t ‖X(t,s)‖ dμ(s) ≤ (μ(t) − μ(0)) ‖X(t,0)‖ with β = 1.
    let c = neutral_pair();
    let table = QTable::build(&c, 200, 1.0).unwrap();
    let mu = MuMap::new(MuKind::SqrtOddExtended, -0.3, 1.0).unwrap();
    let x = XSeries::new(&table, 0.8, 1.0, DEFAULT_TOL).unwrap();
    for step in 1..=10 {
        let t = 0.06 * step as f64;
        let lags: Vec<f64> = x.lags().map(|l| t - l).filter(|&p| p > 0.0).collect();
        let g = |s: f64| Ok(Vector::from_element(1, inf_norm(&x.eval(&mu, t, s)?.value)));
        let lhs = rl_integral(g, 1.0, &mu, 0.0, t, 64, &lags).unwrap()[0];
        let rhs = (mu.eval(t) - mu.eval(0.0)) * inf_norm(&x.eval(&mu, t, 0.0).unwrap().value);
        assert!(lhs <= rhs * (1.0 + 1e-9), "t={t}: {lhs} > {rhs}");
    }
}

#[test]
fn majorant_bounds() {
    let mu = MuMap::new(MuKind::SqrtOddExtended, -0.3, 0.6).unwrap();
    let zero = QTable::majorant(&[0.0, 0.0], 0.0, &[0.0, 0.0], &[0.3, 0.2], 50, 0.6).unwrap();
    for t in [0.1, 0.3, 0.6] {
        assert_eq!(norm_bound_x(0.8, 1.0, t, &zero, &mu, DEFAULT_TOL).unwrap(), 1.0);
    }
    let c = neutral_pair();
    let norms = |m: &[Matrix]| m.iter().map(inf_norm).collect::<Vec<_>>();
    let maj = QTable::majorant(&norms(&c.a), inf_norm(&c.b), &norms(&c.f), &c.delays, 200, 0.6).unwrap();
    let table = QTable::build(&c, 200, 0.6).unwrap();
    let b3 = norm_bound_x(0.8, 0.8, 0.3, &maj, &mu, DEFAULT_TOL).unwrap();
    let b6 = norm_bound_x(0.8, 0.8, 0.6, &maj, &mu, DEFAULT_TOL).unwrap();
    assert!(b3 <= b6, "{b3} > {b6}");
    for beta in [0.8, 1.0] {
        for t in [0.05, 0.2, 0.35, 0.6] {
            let m = inf_norm(&eval_x(0.8, beta, t, 0.0, &table, &mu, DEFAULT_TOL).unwrap().value);
            let b = norm_bound_x(0.8, beta, t, &maj, &mu, DEFAULT_TOL).unwrap();
            assert!(m <= b * (1.0 + 1e-12), "β={beta} t={t}: {m} > {b}");
        }
    }
    assert!(norm_bound_x(0.8, 0.8, 0.3, &table, &mu, DEFAULT_TOL).is_err());
}

#[test]
fn truncation_cap_is_reported() {
    let c = Coefficients::scalar(&[0.4], &[0.0], 5.0, &[0.0]).unwrap();
    let table = QTable::build(&c, 4, 1.0).unwrap();
    let v = eval_x(0.8, 1.0, 1.0, 0.0, &table, &identity(1.0), DEFAULT_TOL).unwrap();
    assert!(!v.converged);
    assert!(v.tail_estimate > DEFAULT_TOL);
    assert_eq!(v.k_used, 4);
}
