mod common;

use common::oracle::{value_iteration, GRID_POINTS, MAX_SWEEPS, SWEEP_TOL};
use switchcost_core::model::ModelParams;
use switchcost_core::solver::solve;

#[test]
fn oracle_reproduces_linear_policy() {
    let p = ModelParams::new(0.5, 0.5, 0.2, 0.5, 0.3);
    let eq = solve(&p).unwrap().accepted.unwrap();
    let o = value_iteration(&p, GRID_POINTS, MAX_SWEEPS, SWEEP_TOL);
    assert!(o.converged, "no convergence after {} sweeps", o.sweeps);
    assert!(o.fit_residual < 1e-6, "node prices are not polynomial: {}", o.fit_residual);
    for sigma in [0.25, 0.5, 0.75] {
        let linear = eq.policy.d + eq.policy.e * sigma;
        assert!((o.price_at(sigma) - linear).abs() < 1e-6, "sigma {sigma}: {} vs {linear}", o.price_at(sigma));
    }
    // The converged value schedule is the closed-form quadratic.
    for sigma in [0.1, 0.5, 0.9] {
        let v = eq.value.k + eq.value.l * sigma + eq.value.m * sigma * sigma;
        assert!((o.value_at(sigma) - v).abs() < 1e-5, "value at {sigma}: {} vs {v}", o.value_at(sigma));
    }
}
