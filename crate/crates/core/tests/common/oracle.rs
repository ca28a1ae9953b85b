//! Discretized value-function iteration for the symmetric duopoly.
//!
//! Independent of the closed-form coefficient equations. Each sweep:
//! for every pair of mirror states (sigma, 1 - sigma) on the grid, the two
//! firms' prices are found as a within-period Nash equilibrium by
//! alternating best responses, each best response being a bracketed scalar
//! maximization of current profit plus the continuation value; the young
//! cutoff is solved from the indifference condition for whatever next-period
//! price schedule is current. Node prices and values are then represented
//! by least-squares polynomial fits that serve as tomorrow's schedules.
//!
//! Fitting rather than node-wise interpolation matters here: the young
//! cutoff depends on the slope of tomorrow's price schedule, so grid-scale
//! noise in node prices is amplified sweep after sweep.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use switchcost_core::model::ModelParams;

pub const GRID_POINTS: usize = 201;
pub const FIT_DEGREE: usize = 4;
pub const MAX_SWEEPS: usize = 400;
pub const SWEEP_TOL: f64 = 1e-8;

/// Polynomial in `2 sigma - 1`, ascending powers.
#[derive(Debug, Clone)]
pub struct Schedule(pub Vec<f64>);

impl Schedule {
    pub fn eval(&self, sigma: f64) -> f64 {
        let t = 2.0 * sigma - 1.0;
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn slope(&self, sigma: f64) -> f64 {
        let t = 2.0 * sigma - 1.0;
        let d = self
            .0
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * t + c * i as f64);
        2.0 * d
    }

    fn fit(grid: &[f64], ys: &[f64], degree: usize) -> (Schedule, f64) {
        let a = DMatrix::from_fn(grid.len(), degree + 1, |i, j| (2.0 * grid[i] - 1.0).powi(j as i32));
        let b = DVector::from_column_slice(ys);
        let coef = a.clone().svd(true, true).solve(&b, 1e-14).expect("svd solve");
        let resid = (&a * &coef - b).amax();
        (Schedule(coef.iter().copied().collect()), resid)
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub grid: Vec<f64>,
    pub node_price: Vec<f64>,
    pub node_value: Vec<f64>,
    pub price: Schedule,
    pub value: Schedule,
    /// Largest distance between a node price and the fitted schedule.
    pub fit_residual: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl OracleSolution {
    pub fn price_at(&self, sigma: f64) -> f64 {
        self.price.eval(sigma)
    }

    pub fn value_at(&self, sigma: f64) -> f64 {
        self.value.eval(sigma)
    }
}

struct Stage<'a> {
    p: &'a ModelParams,
    price: &'a Schedule,
    value: &'a Schedule,
}

impl Stage<'_> {
    /// Young consumer indifferent between the firms given today's price gap
    /// `p_b - p_a` and tomorrow's schedule. Cutoffs enter the objective
    /// linearly, without truncation to the unit interval.
    fn young_cutoff(&self, gap: f64) -> f64 {
        let p = self.p;
        let k = p.delta_c * (1.0 - p.rho);
        let f = |x: f64| {
            let next_gap = self.price.eval(1.0 - x) - self.price.eval(x);
            gap + 1.0 - 2.0 * x + k * (p.mu * p.s * next_gap + (1.0 - p.mu) * (next_gap + 1.0 - 2.0 * x))
        };
        let df = |x: f64| {
            let dg = -self.price.slope(1.0 - x) - self.price.slope(x);
            -2.0 + k * (p.mu * p.s * dg + (1.0 - p.mu) * (dg - 2.0))
        };
        let (mut lo, mut hi) = (-0.5f64, 1.5f64);
        let mut widen = 0;
        while !(f(lo) > 0.0 && f(hi) < 0.0) {
            widen += 1;
            assert!(widen < 60, "young cutoff not bracketed at gap {gap}");
            let w = hi - lo;
            lo -= w;
            hi += w;
        }
        // Newton safeguarded by the sign bracket.
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fx = f(x);
            if fx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = df(x);
            let mut next = if d < 0.0 { x - fx / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() < 1e-15 * (1.0 + x.abs()) || hi - lo < 1e-15 {
                return next;
            }
            x = next;
        }
        x
    }

    fn objective(&self, sigma: f64, p_a: f64, p_b: f64) -> f64 {
        let p = self.p;
        let gap = p_b - p_a;
        let x = self.young_cutoff(gap);
        let x_ab = (gap + 1.0 + p.s) / 2.0;
        let x_ba = (gap + 1.0 - p.s) / 2.0;
        let demand = x + p.relocated_mass() * (sigma * x_ab + (1.0 - sigma) * x_ba) + p.loyal_mass() * sigma;
        (p_a - p.c) * demand + p.delta_f * self.value.eval(x)
    }

    fn best_response(&self, sigma: f64, p_b: f64) -> (f64, f64) {
        let golden = (5.0f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (self.p.c - 2.0, self.p.c + 10.0);
        let mut x1 = b - golden * (b - a);
        let mut x2 = a + golden * (b - a);
        let mut f1 = self.objective(sigma, x1, p_b);
        let mut f2 = self.objective(sigma, x2, p_b);
        while b - a > 1e-5 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + golden * (b - a);
                f2 = self.objective(sigma, x2, p_b);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - golden * (b - a);
                f1 = self.objective(sigma, x1, p_b);
            }
        }
        // The objective is flat at the top, so finish on the sign of its
        // central-difference slope inside the golden-section bracket.
        let slope = |x: f64| {
            let h = 1e-6;
            self.objective(sigma, x + h, p_b) - self.objective(sigma, x - h, p_b)
        };
        if slope(a) > 0.0 && slope(b) < 0.0 {
            for _ in 0..40 {
                let mid = 0.5 * (a + b);
                if slope(mid) > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
        }
        let best = 0.5 * (a + b);
        (best, self.objective(sigma, best, p_b))
    }

    /// Within-period Nash prices at the mirror states by alternating best
    /// responses.
    fn nash(&self, sigma: f64, mut p_a: f64, mut p_b: f64) -> (f64, f64, f64, f64) {
        let (mut v_a, mut v_b) = (0.0, 0.0);
        for _ in 0..200 {
            let (na, va) = self.best_response(sigma, p_b);
            let (nb, vb) = self.best_response(1.0 - sigma, na);
            let change = (na - p_a).abs().max((nb - p_b).abs());
            p_a = na;
            p_b = nb;
            v_a = va;
            v_b = vb;
            if change < 1e-9 {
                break;
            }
        }
        (p_a, v_a, p_b, v_b)
    }
}

/// Iterates from the static Hotelling price with zero continuation value.
pub fn value_iteration(params: &ModelParams, points: usize, max_sweeps: usize, tol: f64) -> OracleSolution {
    assert!(points % 2 == 1 && points > FIT_DEGREE, "grid must be odd and wider than the fit");
    let grid: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let mut node_price = vec![params.c + 1.0; points];
    let mut node_value = vec![0.0; points];
    let mut price = Schedule(vec![params.c + 1.0]);
    let mut value = Schedule(vec![0.0]);
    let mut fit_residual = 0.0;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let stage = Stage {
            p: params,
            price: &price,
            value: &value,
        };
        let pairs: Vec<(usize, (f64, f64, f64, f64))> = (0..=points / 2)
            .into_par_iter()
            .map(|i| {
                let j = points - 1 - i;
                (i, stage.nash(grid[i], node_price[i], node_price[j]))
            })
            .collect();
        let mut next_price = node_price.clone();
        let mut next_value = node_value.clone();
        for (i, (pa, va, pb, vb)) in pairs {
            let j = points - 1 - i;
            next_price[i] = pa;
            next_value[i] = va;
            next_price[j] = pb;
            next_value[j] = vb;
        }
        let (next_p, resid) = Schedule::fit(&grid, &next_price, FIT_DEGREE);
        let (next_v, _) = Schedule::fit(&grid, &next_value, FIT_DEGREE);
        let dp = grid.iter().map(|&x| (next_p.eval(x) - price.eval(x)).abs()).fold(0.0, f64::max);
        let dv = grid.iter().map(|&x| (next_v.eval(x) - value.eval(x)).abs()).fold(0.0, f64::max);
        price = next_p;
        value = next_v;
        node_price = next_price;
        node_value = next_value;
        fit_residual = resid;
        if std::env::var("ORACLE_TRACE").is_ok() {
            eprintln!("sweep {sweeps} dp {dp:e} dv {dv:e} fit {resid:e} coef {:?}", price.0);
        }
        if dp < tol && dv < tol {
            converged = true;
            break;
        }
    }
    OracleSolution {
        grid,
        node_price,
        node_value,
        price,
        value,
        fit_residual,
        sweeps,
        converged,
    }
}
