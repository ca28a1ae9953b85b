//! Two-step GMM with multi-start local search.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::model::residuals;
use super::moments::{FamilyCounts, InstrumentScheme, MomentData};
use super::observation::Dataset;
use super::optimize::{levenberg_marquardt, nelder_mead, LmSettings, Minimum};
use super::params::{StructuralParams, DEFAULT_DISCOUNT, N_PARAMS, PARAM_NAMES};
use crate::error::EstimationError;

/// Relative step for the central-difference moment Jacobian.
pub const SE_STEP: f64 = 1e-6;
/// Ridge scale applied to a near-singular moment covariance.
pub const RIDGE_SCALE: f64 = 1e-10;
/// Largest acceptable condition number of the moment covariance.
pub const MAX_CONDITION: f64 = 1e12;
/// Below this root-mean eigenvalue the moment covariance is treated as zero.
pub const DEGENERATE_SCALE: f64 = 1e-9;
/// Step-1 solutions re-polished under the step-2 weight.
const STEP2_STARTS: usize = 3;

fn d_starts() -> usize {
    32
}
fn d_seed() -> u64 {
    1
}
fn d_discount() -> f64 {
    DEFAULT_DISCOUNT
}
fn d_objective_tol() -> f64 {
    1e-12
}
fn d_step_tol() -> f64 {
    1e-9
}
fn d_nm_evals() -> usize {
    600
}
fn d_lm_iters() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    #[serde(default)]
    pub instruments: InstrumentScheme,
    /// Multi-start budget.
    #[serde(default = "d_starts")]
    pub starts: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_discount")]
    pub delta_f: f64,
    #[serde(default = "d_discount")]
    pub delta_c: f64,
    #[serde(default = "d_objective_tol")]
    pub objective_tol: f64,
    #[serde(default = "d_step_tol")]
    pub step_tol: f64,
    /// Nelder-Mead evaluations per start before the polish.
    #[serde(default = "d_nm_evals")]
    pub search_evaluations: usize,
    #[serde(default = "d_lm_iters")]
    pub polish_iterations: usize,
    /// Centre of the multi-start cloud; derived from the data when absent.
    #[serde(default)]
    pub initial: Option<StructuralParams>,
    /// Restrict to new (0) or revised (1) options.
    #[serde(default)]
    pub revision_subset: Option<u8>,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            instruments: InstrumentScheme::default(),
            starts: d_starts(),
            seed: d_seed(),
            delta_f: d_discount(),
            delta_c: d_discount(),
            objective_tol: d_objective_tol(),
            step_tol: d_step_tol(),
            search_evaluations: d_nm_evals(),
            polish_iterations: d_lm_iters(),
            initial: None,
            revision_subset: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightProvenance {
    /// Identity weight; the covariance of step-1 moment contributions was
    /// numerically zero.
    Step1Identity,
    /// Inverse covariance of step-1 moment contributions.
    Step2Inverse,
    /// As `Step2Inverse` after adding `lambda` to the diagonal.
    Step2Ridge { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub parameter: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerDiagnostics {
    pub starts: usize,
    pub converged_starts: usize,
    pub best_start: usize,
    pub step1_objective: f64,
    pub best_objective: f64,
    pub gradient_norm: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmResult {
    pub params: StructuralParams,
    pub estimates: Vec<Estimate>,
    pub mu: f64,
    pub rho: f64,
    pub observations: usize,
    pub usable: FamilyCounts,
    pub moments: usize,
    pub df: usize,
    pub j_statistic: f64,
    pub p_value: f64,
    pub weight_matrix: WeightProvenance,
    /// The moment Jacobian lacks full column rank; no standard errors.
    pub rank_deficient: bool,
    /// Observations whose implied switching cost is not positive.
    pub nonpositive_switching_costs: usize,
    /// Recovered shares outside the unit interval.
    pub shares_out_of_range: usize,
    pub diagnostics: OptimizerDiagnostics,
}

impl GmmResult {
    pub fn get(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.parameter == name)
    }
}

/// Ordinary least squares of markup on the pricing regressors; a centre for
/// the multi-start cloud.
fn pricing_ols(data: &MomentData) -> Option<[f64; 8]> {
    let n = data.n();
    let x = DMatrix::from_fn(n, 8, |i, j| {
        let o = &data.observations[i];
        match j {
            0 => 1.0,
            1 => o.sigma_prev,
            2 => o.h,
            3 => o.vremot,
            4 => o.dremot,
            5 => o.iremot,
            6 => o.tport,
            _ => o.tport * o.tfrac,
        }
    });
    let y = DVector::from_iterator(n, data.observations.iter().map(|o| o.price - o.c_norm));
    let coef = x.svd(true, true).solve(&y, 1e-12).ok()?;
    Some(std::array::from_fn(|k| coef[k]))
}

fn default_center(data: &MomentData, config: &EstimationConfig) -> StructuralParams {
    let mut p = StructuralParams {
        alpha: [1.0, 0.0, 0.0, 0.0, 0.0],
        beta: [0.0; 6],
        m_logit: 0.0,
        r_logit: -2.0,
        d: 0.0,
        e: 0.3,
        delta_f: config.delta_f,
        delta_c: config.delta_c,
    };
    if let Some(c) = pricing_ols(data) {
        if c.iter().all(|x| x.is_finite()) {
            p.d = c[0];
            p.e = c[1];
            p.beta.copy_from_slice(&c[2..8]);
        }
    }
    p
}

/// Spread of the multi-start cloud around its centre, per parameter.
const START_SCALE: [f64; N_PARAMS] = [
    0.5, 0.5, 0.5, 0.5, 0.5, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 1.5, 1.0, 0.2, 0.2,
];

struct Problem<'a> {
    data: &'a MomentData,
    template: StructuralParams,
}

impl Problem<'_> {
    fn moments(&self, x: &[f64]) -> Option<DVector<f64>> {
        self.data.moments(&self.template.with_vec(x)).ok()
    }

    fn weighted(&self, x: &[f64], root: &DMatrix<f64>) -> Option<DVector<f64>> {
        self.moments(x).map(|g| root.transpose() * g)
    }

    fn objective(&self, x: &[f64], root: &DMatrix<f64>) -> f64 {
        self.weighted(x, root).map_or(f64::INFINITY, |r| r.norm_squared())
    }

    fn local(&self, x0: &[f64], root: &DMatrix<f64>, config: &EstimationConfig, search: bool) -> Minimum {
        let lm = LmSettings {
            objective_tol: config.objective_tol,
            step_tol: config.step_tol,
            max_iterations: config.polish_iterations,
            ..LmSettings::default()
        };
        let (start, mut evals) = if search && config.search_evaluations > 0 {
            let step: Vec<f64> = START_SCALE.iter().map(|s| 0.5 * s).collect();
            let nm = nelder_mead(|x| self.objective(x, root), x0, &step, 1e-14, config.search_evaluations);
            (nm.x, nm.evaluations)
        } else {
            (x0.to_vec(), 0)
        };
        let mut m = levenberg_marquardt(|x| self.weighted(x, root), &start, &lm);
        evals += m.evaluations;
        m.evaluations = evals;
        m
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let m = self.data.n_moments();
        let mut g = DMatrix::zeros(m, x.len());
        let mut xp = x.to_vec();
        for k in 0..x.len() {
            let h = SE_STEP * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            let up = self.moments(&xp)?;
            xp[k] = x[k] - h;
            let down = self.moments(&xp)?;
            xp[k] = x[k];
            g.set_column(k, &((up - down) / (2.0 * h)));
        }
        Some(g)
    }
}

/// Weight from the covariance of moment contributions, with its Cholesky
/// root `L` such that `W = L L'`.
fn weight_from_covariance(omega: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, WeightProvenance) {
    let dim = omega.nrows();
    let identity = DMatrix::identity(dim, dim);
    let trace = omega.trace();
    if !(trace.is_finite()) || (trace / dim as f64).max(0.0).sqrt() < DEGENERATE_SCALE {
        return (identity.clone(), identity, WeightProvenance::Step1Identity);
    }
    let eig = omega.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut om = omega.clone();
    let mut provenance = WeightProvenance::Step2Inverse;
    if lo <= 0.0 || hi / lo > MAX_CONDITION {
        let lambda = RIDGE_SCALE * trace / dim as f64;
        for k in 0..dim {
            om[(k, k)] += lambda;
        }
        provenance = WeightProvenance::Step2Ridge { lambda };
    }
    match om.clone().cholesky().map(|c| c.inverse()) {
        Some(w) => {
            let w = (&w + w.transpose()) * 0.5;
            match w.clone().cholesky() {
                Some(c) => (w, c.l(), provenance),
                None => (identity.clone(), identity, WeightProvenance::Step1Identity),
            }
        }
        None => (identity.clone(), identity, WeightProvenance::Step1Identity),
    }
}

/// Two-step GMM estimate of the structural parameters.
pub fn estimate(data: &Dataset, config: &EstimationConfig) -> Result<GmmResult, EstimationError> {
    let data = match config.revision_subset {
        Some(r) => data.subset_revised(r),
        None => data.clone(),
    };
    let md = MomentData::new(&data, &config.instruments)?;
    let n_moments = md.n_moments();
    if n_moments <= N_PARAMS {
        return Err(EstimationError::Underidentified {
            moments: n_moments,
            params: N_PARAMS,
        });
    }
    if config.starts == 0 {
        return Err(EstimationError::Invalid("start budget must be at least 1".into()));
    }
    let mut center = config.initial.unwrap_or_else(|| default_center(&md, config));
    center.delta_f = config.delta_f;
    center.delta_c = config.delta_c;
    center.validate()?;
    let problem = Problem {
        data: &md,
        template: center,
    };
    let identity = DMatrix::identity(n_moments, n_moments);

    // Step 1: identity weight, multi-start.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c0 = center.to_vec();
    let starts: Vec<Vec<f64>> = (0..config.starts)
        .map(|k| {
            if k == 0 {
                return c0.clone();
            }
            c0.iter()
                .zip(START_SCALE)
                .map(|(c, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + s * z
                })
                .collect()
        })
        .collect();
    let step1: Vec<Minimum> = starts
        .par_iter()
        .map(|x0| problem.local(x0, &identity, config, true))
        .collect();
    let mut evaluations: usize = step1.iter().map(|m| m.evaluations).sum();
    let converged_starts = step1.iter().filter(|m| m.converged).count();
    let mut order: Vec<usize> = (0..step1.len()).collect();
    order.sort_by(|&a, &b| step1[a].value.total_cmp(&step1[b].value).then(a.cmp(&b)));
    let best1 = &step1[order[0]];
    if !best1.value.is_finite() {
        return Err(EstimationError::NotConverged {
            starts: config.starts,
            best_objective: best1.value,
            gradient_norm: f64::NAN,
            best_params: best1.x.clone(),
        });
    }

    // Step 2: inverse covariance of step-1 contributions.
    let omega1 = md.covariance(&center.with_vec(&best1.x))?;
    let (w2, root2, provenance) = weight_from_covariance(&omega1);
    let (best_start, best) = if provenance == WeightProvenance::Step1Identity {
        (order[0], best1.clone())
    } else {
        let polished: Vec<(usize, Minimum)> = order
            .iter()
            .take(STEP2_STARTS)
            .map(|&k| (k, problem.local(&step1[k].x, &root2, config, false)))
            .collect();
        evaluations += polished.iter().map(|(_, m)| m.evaluations).sum::<usize>();
        polished
            .into_iter()
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
            .expect("at least one start")
    };
    let x_hat = best.x.clone();
    let params = center.with_vec(&x_hat);
    let g_bar = md.moments(&params)?;
    let jac = problem
        .jacobian(&x_hat)
        .ok_or(EstimationError::Singular("moment Jacobian at the estimate"))?;
    let gradient_norm = (2.0 * jac.transpose() * &w2 * &g_bar).norm();
    if !best.converged {
        return Err(EstimationError::NotConverged {
            starts: config.starts,
            best_objective: best.value,
            gradient_norm,
            best_params: x_hat,
        });
    }

    let n = md.n() as f64;
    let q = (g_bar.transpose() * &w2 * &g_bar)[(0, 0)];
    let df = n_moments - N_PARAMS;
    let j_statistic = n * q;
    let p_value = ChiSquared::new(df as f64)
        .map(|c| c.sf(j_statistic.max(0.0)))
        .unwrap_or(f64::NAN)
        .clamp(0.0, 1.0);

    let bread = jac.transpose() * &w2 * &jac;
    let sv = bread.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let rank_deficient = !(smin > 1e-12 * smax);
    let std_errors: Option<Vec<f64>> = if rank_deficient {
        None
    } else {
        let omega = md.covariance(&params)?;
        bread.clone().try_inverse().map(|inv| {
            let meat = jac.transpose() * &w2 * &omega * &w2 * &jac;
            let v = &inv * meat * &inv / n;
            (0..N_PARAMS).map(|k| v[(k, k)].max(0.0).sqrt()).collect()
        })
    };
    let rank_deficient = rank_deficient || std_errors.is_none();

    let mut nonpositive = 0;
    let mut out_of_range = 0;
    for o in &md.observations {
        if let Ok(r) = residuals(o, &params) {
            if r.switching_cost <= 0.0 {
                nonpositive += 1;
            }
            let bad = |s: f64| !(0.0..=1.0).contains(&s);
            if bad(r.sigma) || r.sigma_fwd.is_some_and(bad) {
                out_of_range += 1;
            }
        }
    }

    let estimates = PARAM_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| Estimate {
            parameter: name.to_string(),
            estimate: x_hat[k],
            std_error: std_errors.as_ref().map(|s| s[k]),
        })
        .collect();
    Ok(GmmResult {
        params,
        estimates,
        mu: params.mu(),
        rho: params.rho(),
        observations: md.n(),
        usable: md.counts,
        moments: n_moments,
        df,
        j_statistic,
        p_value,
        weight_matrix: provenance,
        rank_deficient,
        nonpositive_switching_costs: nonpositive,
        shares_out_of_range: out_of_range,
        diagnostics: OptimizerDiagnostics {
            starts: config.starts,
            converged_starts,
            best_start,
            step1_objective: best1.value,
            best_objective: q,
            gradient_norm,
            evaluations,
        },
    })
}
