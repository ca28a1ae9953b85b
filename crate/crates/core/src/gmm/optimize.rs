//! Local minimizers used by the estimator.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead with dimension-adapted coefficients. Non-finite values are
/// treated as `+inf`. Stops when the simplex's value spread falls below
/// `ftol` or after `max_evals` evaluations.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: &[f64], ftol: f64, max_evals: usize) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let v = eval(&x);
        simplex.push((x, v));
    }
    let mut evals = n + 1;
    let mut iterations = 0;
    let mut converged = false;
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect() };
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if best.is_finite() && (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let xr = lerp(&centroid, &simplex[n].0, -alpha);
        let fr = eval(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &simplex[n].0, -alpha * beta);
            let fe = eval(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = lerp(&centroid, &simplex[n].0, -alpha * gamma);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = lerp(&centroid, &simplex[n].0, gamma);
            let fc = eval(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            *x = lerp(&x_best, x, delta);
            *v = eval(x);
        }
        evals += n;
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations: evals,
        iterations,
        converged,
    }
}

/// Stopping rules for [`levenberg_marquardt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    /// Stop when the objective falls by less than this...
    pub objective_tol: f64,
    /// ...and no parameter moves by more than this, relative to `1 + |x|`.
    pub step_tol: f64,
    pub max_iterations: usize,
    /// Forward-difference step, relative to `max(|x|, 1)`.
    pub jacobian_step: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings {
            objective_tol: 1e-12,
            step_tol: 1e-9,
            max_iterations: 200,
            jacobian_step: 1e-7,
        }
    }
}

fn forward_jacobian<R>(r: &R, x: &[f64], r0: &DVector<f64>, rel: f64) -> Option<DMatrix<f64>>
where
    R: Fn(&[f64]) -> Option<DVector<f64>>,
{
    let mut j = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let h = rel * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        let rk = r(&xp)?;
        xp[k] = x[k];
        j.set_column(k, &((rk - r0) / h));
    }
    Some(j)
}

/// Minimizes `|r(x)|^2` by Levenberg-Marquardt with a forward-difference
/// Jacobian. `r` returns `None` where it is undefined.
pub fn levenberg_marquardt<R>(r: R, x0: &[f64], settings: &LmSettings) -> Minimum
where
    R: Fn(&[f64]) -> Option<DVector<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut evals = 1;
    let Some(mut res) = r(&x) else {
        return Minimum {
            x,
            value: f64::INFINITY,
            evaluations: evals,
            iterations: 0,
            converged: false,
        };
    };
    let mut value = res.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iterations {
        iterations += 1;
        if value == 0.0 {
            converged = true;
            break;
        }
        let Some(jac) = forward_jacobian(&r, &x, &res, settings.jacobian_step) else {
            break;
        };
        evals += n;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &res;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            evals += 1;
            match r(&trial) {
                Some(tr) if tr.norm_squared() < value => {
                    let new_value = tr.norm_squared();
                    let decrease = value - new_value;
                    let max_step = step
                        .iter()
                        .zip(&x)
                        .map(|(s, xi)| s.abs() / (1.0 + xi.abs()))
                        .fold(0.0, f64::max);
                    x = trial;
                    res = tr;
                    value = new_value;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if decrease < settings.objective_tol && max_step < settings.step_tol {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        // No descent step at any damping: the gradient is numerically zero.
        if !accepted {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Minimum {
        x,
        value,
        evaluations: evals,
        iterations,
        converged,
    }
}
