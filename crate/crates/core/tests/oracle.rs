mod common;

use common::{load, scalar_system};
use fracdelay::error::Error;
use fracdelay::grid::TimeGrid;
use fracdelay::oracle::{residual, solve_reference, solve_reference_on, OracleConfig, ProductRule};
use fracdelay::solver::{solve_linear, SolverConfig};
use fracdelay::system::DelaySystem;

fn cfg(n: usize, rule: ProductRule) -> OracleConfig {
    OracleConfig { steps_per_unit: n, rule, ..OracleConfig::default() }
}

fn value_at(sys: &DelaySystem, n: usize, rule: ProductRule, t: f64) -> f64 {
    let traj = solve_reference(sys, &cfg(n, rule)).unwrap();
    traj.values[traj.grid.node_index(t).unwrap()][0]
}

#[test]
fn zero_data_stays_zero() {
    let sys = scalar_system(0.7, 0.5, -0.4, 0.3, 0.25, 1.0, "0", "0");
    let traj = solve_reference(&sys, &cfg(64, ProductRule::Trapezoid)).unwrap();
    assert!(traj.values.iter().all(|v| v[0] == 0.0));
}

#[test]
fn matches_one_parameter_mittag_leffler() {
    // E_0.8(−0.5) from tests/oracles/mittag_leffler.py.
    let sys = scalar_system(0.8, 0.0, -0.5, 0.0, 0.25, 1.0, "1", "0");
    for rule in [ProductRule::Rectangle, ProductRule::Trapezoid] {
        let v = value_at(&sys, 2048, rule, 1.0);
        assert!((v - 0.603_023_715_862_803_7).abs() < 1e-3, "{rule:?}: {v}");
    }
}

/// Errors against an Aitken-extrapolated limit for N, 2N, 4N, ...
fn self_convergence(sys: &DelaySystem, rule: ProductRule, ns: &[usize], t: f64) -> Vec<f64> {
    let v: Vec<f64> = ns.iter().map(|&n| value_at(sys, n, rule, t)).collect();
    let k = v.len();
    let (a, b, c) = (v[k - 3], v[k - 2], v[k - 1]);
    let limit = c - (c - b) * (c - b) / ((c - b) - (b - a));
    v.iter().map(|x| (x - limit).abs()).collect()
}

#[test]
fn self_convergence_under_step_halving() {
    let sys = scalar_system(0.7, 0.5, -0.4, 0.3, 0.25, 1.0, "1 + t + t^2", "cos(t)");
    let ns = [128, 256, 512, 1024, 2048];
    for rule in [ProductRule::Rectangle, ProductRule::Trapezoid] {
        let e = self_convergence(&sys, rule, &ns, 1.0);
        for w in e[..3].windows(2) {
            assert!(w[0] / w[1] >= 1.7, "{rule:?}: errors {e:?}");
        }
        for w in e.windows(2) {
            assert!(w[1] <= 1.05 * w[0], "{rule:?}: errors {e:?}");
        }
    }
}

#[test]
fn residual_of_own_solution_is_at_corrector_level() {
    let sys = scalar_system(0.7, 0.5, -0.4, 0.3, 0.25, 1.0, "1 + t + t^2", "cos(t)");
    let c = cfg(512, ProductRule::Trapezoid);
    let traj = solve_reference(&sys, &c).unwrap();
    let r = residual(&sys, &traj, &c).unwrap();
    assert!(r <= 1e3 * c.corrector_tol * (1.0 + traj.sup_norm()), "{r:e}");
}

#[test]
fn residual_detects_perturbation() {
    let p = load("example3_linear.cfg");
    let c = cfg(512, ProductRule::Trapezoid);
    let mut traj = solve_reference(&p.system, &c).unwrap();
    let z = traj.grid.zero_index();
    for v in traj.values[z + 1..].iter_mut() {
        v[1] += 0.1;
    }
    let r = residual(&p.system, &traj, &c).unwrap();
    assert!(r >= 0.05, "{r}");
}

#[test]
fn residual_of_closed_form_on_scalar_fixture() {
    let p = load("scalar_neutral.cfg");
    let c = OracleConfig::default();
    let grid = TimeGrid::build(&p.system.mu, &p.system.coeffs.delays, p.system.horizon, c.steps_per_unit).unwrap();
    let closed = fracdelay::solver::solve_linear_on(&p.system, &p.solver, grid).unwrap();
    let r = residual(&p.system, &closed, &c).unwrap();
    assert!(r <= 5e-3 * (1.0 + closed.sup_norm()), "{r:e}");
}

#[test]
fn residual_rejects_foreign_grids() {
    let p = load("scalar_neutral.cfg");
    let traj = solve_linear(&p.system, &SolverConfig::default()).unwrap();
    let other = scalar_system(0.7, 0.5, -0.4, 0.3, 0.25, 2.0, "1", "0");
    assert!(matches!(residual(&other, &traj, &OracleConfig::default()), Err(Error::GridMismatch(_))));
    // Breakpoints 0.25, 0.5, 0.75 missing.
    let missing = TimeGrid::from_times(vec![-0.25, -0.1, 0.0, 0.3, 0.6, 1.0], &[0.25], 1.0);
    assert!(matches!(missing, Err(Error::GridMismatch(_))));
    let ok = TimeGrid::from_times(vec![-0.25, -0.1, 0.0, 0.25, 0.5, 0.75, 1.0], &[0.25], 1.0).unwrap();
    let coarse = solve_reference_on(&p.system, &OracleConfig::default(), ok).unwrap();
    assert_eq!(coarse.values.len(), 7);
}

#[test]
fn config_validation_and_corrector_failure() {
    let sys = scalar_system(0.7, 0.0, -0.4, 0.0, 0.25, 1.0, "1", "0");
    assert!(solve_reference(&sys, &cfg(4, ProductRule::Trapezoid)).is_err());
    let bad = OracleConfig { corrector_iterations: 0, ..OracleConfig::default() };
    assert!(solve_reference(&sys, &bad).is_err());
    let bad = OracleConfig { interpolation_order: 3, ..OracleConfig::default() };
    assert!(solve_reference(&sys, &bad).is_err());
    // One sweep cannot settle a stiff implicit step.
    let stiff = scalar_system(0.7, 0.0, -200.0, 0.0, 0.25, 1.0, "1", "0");
    let one = OracleConfig { steps_per_unit: 16, corrector_iterations: 1, ..OracleConfig::default() };
    assert!(matches!(solve_reference(&stiff, &one), Err(Error::NotConverged { .. })));
}
