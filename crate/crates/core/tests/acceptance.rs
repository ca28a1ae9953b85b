//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the output.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::oracle::{value_iteration, GRID_POINTS, MAX_SWEEPS, SWEEP_TOL};
use switchcost_core::data::{
    portability_vars, solve_weights, synthesize_dataset, MarketSeries, PortabilityTimeline, SynthConfig, WeightScheme,
};
use switchcost_core::gmm::counterfactual::{pct_change, portability_price_effect, AverageContract};
use switchcost_core::gmm::{
    counterfactual_margins, estimate, stack_moments, EstimationConfig, InstrumentScheme, Scenario, StructuralParams,
};
use switchcost_core::model::{bellman_residuals, optimality_diagnostics, ModelParams};
use switchcost_core::solver::{solve, steady_state_markup};
use switchcost_core::sweep::{
    classify_effect_of_s, effect_witnesses, monotonicity_report, regime_width_report, run_sweep, GridSpec, SEffect,
    SweepRecord,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn standard_sweep() -> (Vec<SweepRecord>, Duration) {
    let t = Instant::now();
    let records = run_sweep(&GridSpec::standard()).expect("grid is valid");
    (records, t.elapsed())
}

fn equilibrium_validity(records: &[SweepRecord], elapsed: Duration) -> Outcome {
    let mut accepted = 0;
    let mut bad = Vec::new();
    for r in records.iter().filter(|r| r.is_solved()) {
        accepted += 1;
        let eq = solve(&r.params()).unwrap().accepted.expect("solved record re-solves");
        let o = optimality_diagnostics(&eq, 0.5).unwrap();
        let ok = bellman_residuals(&eq).max_abs() < 1e-8
            && o.foc_residual.abs() < 1e-8
            && o.soc_value < 0.0
            && eq.policy.e > 0.0
            && eq.dynamics.theta > 0.0
            && eq.dynamics.theta <= 1.0;
        if !ok {
            bad.push(r.params());
        }
    }
    let share = accepted as f64 / records.len() as f64;
    let detail = format!(
        "{accepted}/{} points accepted ({:.1}%), {} accepted points fail a check, sweep took {:.2?}",
        records.len(),
        100.0 * share,
        bad.len(),
        elapsed
    );
    for p in bad.iter().take(10) {
        println!("    failing point {p:?}");
    }
    check(bad.is_empty() && share >= 0.95 && elapsed < Duration::from_secs(600), detail)
}

fn oracle_gap(p: &ModelParams) -> Result<f64, String> {
    let eq = solve(p).unwrap().accepted.ok_or_else(|| format!("{p:?} has no accepted equilibrium"))?;
    let o = value_iteration(p, GRID_POINTS, MAX_SWEEPS, SWEEP_TOL);
    if !o.converged {
        return Err(format!("oracle did not converge at {p:?}"));
    }
    Ok([0.25, 0.5, 0.75]
        .iter()
        .map(|&s| (o.price_at(s) - (eq.policy.d + eq.policy.e * s)).abs())
        .fold(0.0, f64::max))
}

fn oracle_equivalence() -> Outcome {
    let points = [
        ModelParams::new(0.5, 0.5, 0.2, 0.5, 0.3),
        ModelParams::new(0.3, 0.7, 0.0, 0.9, 1.0),
        ModelParams::new(0.7, 0.3, 0.0, 0.1, 0.0),
        ModelParams::new(0.7, 0.7, 0.4, 0.3, 0.6),
        ModelParams::new(0.3, 0.3, 0.8, 0.7, 0.9),
    ];
    let mut worst: f64 = 0.0;
    for p in &points {
        let gap = oracle_gap(p)?;
        println!("    {p:?}: max price gap {gap:.2e}");
        worst = worst.max(gap);
    }
    check(worst < 1e-3, format!("5 points, 201-state oracle, largest gap {worst:.2e}"))
}

fn effect_ambiguity(records: &[SweepRecord]) -> Outcome {
    let classes = classify_effect_of_s(records);
    let (inc, dec) = effect_witnesses(&classes);
    let (Some(inc), Some(dec)) = (inc, dec) else {
        return Err("missing an increasing or a decreasing witness".into());
    };
    let s_values = [0.0, 0.25, 0.5, 0.75, 1.0];
    for (w, want) in [(inc, SEffect::Increasing), (dec, SEffect::Decreasing)] {
        let markups: Vec<f64> = s_values
            .par_iter()
            .map(|&s| {
                let p = w.combo.with_s(s);
                let o = value_iteration(&p, GRID_POINTS, MAX_SWEEPS, SWEEP_TOL);
                assert!(o.converged, "oracle did not converge at {p:?}");
                o.price_at(0.5) - p.c
            })
            .collect();
        let strict = markups.windows(2).all(|m| match want {
            SEffect::Increasing => m[1] > m[0],
            _ => m[1] < m[0],
        });
        println!("    {:?} {:?}: oracle markups {markups:?}", want, w.combo);
        if !strict {
            return Err(format!("oracle does not confirm the {} witness {:?}", w.effect.label(), w.combo));
        }
    }
    let count = |e: &SEffect| classes.iter().filter(|c| &c.effect == e).count();
    check(
        true,
        format!(
            "{} increasing and {} decreasing base combos; both witnesses confirmed by the oracle",
            count(&SEffect::Increasing),
            count(&SEffect::Decreasing)
        ),
    )
}

fn markup_directions(records: &[SweepRecord]) -> Outcome {
    let report = monotonicity_report(records);
    let mut parts = Vec::new();
    for t in report.tallies.iter().filter(|t| t.expected.is_some()) {
        parts.push(format!(
            "{:?} {:.2}% of {} pairs",
            t.parameter,
            100.0 * t.share_expected.unwrap_or(f64::NAN),
            t.comparable()
        ));
        for v in &t.violations {
            println!(
                "    {:?} violation: {:?} -> {:?}, markup {} -> {}",
                t.parameter, v.low, v.high, v.markup_low, v.markup_high
            );
        }
    }
    check(report.passes(), parts.join(", "))
}

fn regime_widths(records: &[SweepRecord]) -> Outcome {
    let report = regime_width_report(&classify_effect_of_s(records));
    let mut parts = Vec::new();
    for t in &report.trends {
        let fr: Vec<String> = t.levels.iter().map(|l| l.fraction.map_or("-".into(), |f| format!("{f:.3}"))).collect();
        parts.push(format!("{:?} {:?} [{}]", t.parameter, t.expected, fr.join(" ")));
        if !t.passes {
            println!("    trend broken for {:?}", t.parameter);
        }
    }
    check(report.passes(), parts.join("; "))
}

fn cost_shift_invariance() -> Outcome {
    let grid = GridSpec::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 20 {
        let pick = |v: &Vec<f64>, rng: &mut ChaCha8Rng| v[rng.random_range(0..v.len())];
        let p = ModelParams::new(
            pick(&grid.delta_c, &mut rng),
            pick(&grid.delta_f, &mut rng),
            pick(&grid.rho, &mut rng),
            pick(&grid.mu, &mut rng),
            pick(&grid.s, &mut rng),
        );
        let Some(base) = solve(&p).unwrap().accepted else { continue };
        let moved = solve(&p.with_cost(0.5))
            .unwrap()
            .accepted
            .ok_or_else(|| format!("{p:?} loses its equilibrium under a cost shift"))?;
        worst = worst
            .max((moved.policy.e - base.policy.e).abs())
            .max((moved.dynamics.theta - base.dynamics.theta).abs())
            .max((steady_state_markup(&moved) - steady_state_markup(&base)).abs());
        checked += 1;
    }
    check(worst < 1e-10, format!("20 grid points, largest change in (e, theta, markup) {worst:.1e}"))
}

fn data_pipeline() -> Outcome {
    let w = solve_weights(6.0, 1.25, 0.75, WeightScheme::AsPrinted).map_err(|e| e.to_string())?;
    // By hand: u1 = (6 + 1.25)/7.25 = 1, u2 = u4 = 3.25, u3 = 0.75, u5 = 0.75; total 9.
    let hand = [1.0 / 9.0, 3.25 / 9.0, 0.75 / 9.0, 3.25 / 9.0, 0.75 / 9.0];
    let printed = [0.1111, 0.3611, 0.0833, 0.3611, 0.0833];
    let gap = w.0.iter().zip(&hand).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let printed_gap = w.0.iter().zip(&printed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let tl = PortabilityTimeline::default();
    let before = portability_vars(NaiveDate::from_ymd_opt(1992, 11, 21).unwrap(), &tl).map_err(|e| e.to_string())?;
    let after = portability_vars(NaiveDate::from_ymd_opt(1993, 6, 1).unwrap(), &tl).map_err(|e| e.to_string())?;
    let ok = gap < 1e-4 && printed_gap < 1e-4 && before.tport == 1.61 && after.tport == 0.0 && after.dport == 1;
    check(
        ok,
        format!(
            "weights {:?} (gap {gap:.1e}), tport(1992-11-21) = {}, tport(1993-06-01) = {} with dport = {}",
            w.0.map(|x| (x * 1e4).round() / 1e4),
            before.tport,
            after.tport,
            after.dport
        ),
    )
}

fn moment_zero() -> Outcome {
    let truth = StructuralParams::synthetic_default();
    let data = synthesize_dataset(&truth, &MarketSeries::builtin(), &SynthConfig::noiseless(500, 1))
        .map_err(|e| e.to_string())?;
    let g = stack_moments(&data, &truth, &InstrumentScheme::default()).map_err(|e| e.to_string())?;
    let r = estimate(&data, &EstimationConfig::default()).map_err(|e| e.to_string())?;
    let err = r
        .estimates
        .iter()
        .zip(truth.to_vec())
        .map(|(e, t)| (e.estimate - t).abs())
        .fold(0.0, f64::max);
    check(
        g.len() == 36 && g.amax() < 1e-6 && err < 1e-4,
        format!("{} moments, largest {:.1e}; largest parameter error {err:.1e}; J = {:.1e}", g.len(), g.amax(), r.j_statistic),
    )
}

fn noisy_round_trip() -> Outcome {
    let truth = StructuralParams::synthetic_default();
    let want = truth.to_vec();
    let names = ["d", "e", "beta5", "beta6", "alpha1", "alpha2"];
    let t = Instant::now();
    let mut good = 0;
    for seed in 1..=10u64 {
        let cfg = SynthConfig {
            price_noise: 0.02,
            rate_noise: 0.005,
            ..SynthConfig::noiseless(2000, seed)
        };
        let data = synthesize_dataset(&truth, &MarketSeries::builtin(), &cfg).map_err(|e| e.to_string())?;
        let r = match estimate(&data, &EstimationConfig::default()) {
            Ok(r) => r,
            Err(e) => {
                println!("    seed {seed}: estimation failed: {e}");
                continue;
            }
        };
        let misses: Vec<&str> = names
            .iter()
            .copied()
            .filter(|name| {
                let i = r.estimates.iter().position(|e| e.parameter == *name).unwrap();
                let est = &r.estimates[i];
                let tol = (0.1 * want[i].abs()).max(2.0 * est.std_error.unwrap_or(0.0));
                (est.estimate - want[i]).abs() > tol
            })
            .collect();
        println!("    seed {seed}: J = {:.1} (p = {:.2}), misses {misses:?}", r.j_statistic, r.p_value);
        if misses.is_empty() {
            good += 1;
        }
    }
    let elapsed = t.elapsed();
    check(
        good >= 8 && elapsed < Duration::from_secs(900),
        format!("{good}/10 seeds recover d, e, beta5, beta6, alpha1, alpha2; {elapsed:.1?}"),
    )
}

fn portability_arithmetic() -> Outcome {
    let mut p = StructuralParams::reported_base_model();
    let effect = portability_price_effect(&p, 0.5, 1.0) - p.beta[4];

    // A contract whose steady-state margin falls from 0.429 to 0.324 when
    // numbers become portable: tport = 1 and tfrac = 0.5, with every other
    // pricing coefficient zero and beta5 set to make up the difference.
    p.beta = [0.0, 0.0, 0.0, 0.0, -0.177, 0.564];
    p.e = 0.2;
    p.d = 0.324 - 0.1;
    let contract = AverageContract {
        h: 3.63,
        vremot: 0.168,
        dremot: 0.636,
        iremot: 0.00525,
        tport: 1.0,
        tfrac: 0.5,
    };
    let report = counterfactual_margins(&p, &Scenario::SteadyStateAverage { contract: Some(contract) }, None)
        .map_err(|e| e.to_string())?;
    let ok = (effect - 0.282).abs() < 1e-12
        && (report.margin_base - 0.429).abs() < 1e-12
        && (report.margin_counterfactual - 0.324).abs() < 1e-12
        && (report.pct_change - -24.5).abs() < 0.1
        && (pct_change(0.429, 0.324) - report.pct_change).abs() < 1e-9;
    check(
        ok,
        format!(
            "margin effect {effect:.3}; steady-state margins {:.3} -> {:.3}, change {:.2}%",
            report.margin_base, report.margin_counterfactual, report.pct_change
        ),
    )
}

fn main() -> ExitCode {
    let (records, elapsed) = standard_sweep();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("equilibrium validity over the grid", Box::new(|| equilibrium_validity(&records, elapsed))),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("switching costs can raise or lower markups", Box::new(|| effect_ambiguity(&records))),
        ("markup directions in mu, delta_f, delta_c", Box::new(|| markup_directions(&records))),
        ("regime-width trends", Box::new(|| regime_widths(&records))),
        ("cost-shift invariance", Box::new(cost_shift_invariance)),
        ("data pipeline exactness", Box::new(data_pipeline)),
        ("GMM moment-zero", Box::new(moment_zero)),
        ("GMM round trip with noise", Box::new(noisy_round_trip)),
        ("portability arithmetic fixtures", Box::new(portability_arithmetic)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}: {name}: {detail} [{:.1?}]", i + 1, t.elapsed());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
