//! Constructive search for the linear Markov equilibrium.
//!
//! The unknown policy slope `e` and transition slope `theta` satisfy two
//! equations: the slope condition obtained by matching the `sigma` terms of
//! the first-order condition, and `theta = 2 b(e) e`. Substituting
//! `theta = e / q(e)` with `q(e) = 1 / (2 b(e))`, which is affine in `e`,
//! and clearing denominators turns the pair into a single quartic in `e`.
//! Every real root of that quartic is a candidate; each is checked by back
//! substitution into the original two equations, the remaining
//! coefficients are recovered in closed form, and the profit-maximal
//! stable candidate that passes the validity checks is selected.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{
    dynamics_coefficients, Equilibrium, ModelParams, PolicyCoefficients, ValueCoefficients, RESIDUAL_TOL,
    STEADY_STATE_SHARE,
};
use crate::poly::Poly;

/// Back-substitution tolerance for a reported root.
pub const ROOT_TOL: f64 = 1e-10;
/// Roots closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-8;
/// Profit differences below this count as ties.
pub const PROFIT_TIE_TOL: f64 = 1e-10;
/// Upper bound on the number of candidate roots of the coefficient system.
pub const MAX_CANDIDATES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSign {
    Positive,
    Zero,
    Negative,
}

impl ThetaSign {
    fn of(theta: f64) -> Self {
        if theta > 0.0 {
            ThetaSign::Positive
        } else if theta < 0.0 {
            ThetaSign::Negative
        } else {
            ThetaSign::Zero
        }
    }
}

/// A real solution `(e, theta)` of the coefficient system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateRoot {
    pub e: f64,
    pub theta: f64,
    /// Position of `e` among the real quartic roots, ascending.
    pub e_branch: usize,
    pub theta_branch: ThetaSign,
    /// `(R1, R2)` from [`residual_system`].
    pub residuals: [f64; 2],
}

/// Quadratic value coefficient implied by `(e, theta)`.
pub fn m_from(e: f64, theta: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let denom = 1.0 - params.delta_f * theta * theta;
    if denom.abs() < 1e-14 {
        return Err(ModelError::Singular("theta^2 = 1/delta_f"));
    }
    let reloc = params.relocated_mass();
    let d1 = -theta + reloc * (params.s - e) + params.loyal_mass();
    Ok(e * d1 / denom)
}

/// `R1`: slope condition with `m` eliminated. `R2 = theta - 2 b(e) e`.
pub fn residual_system(e: f64, theta: f64, params: &ModelParams) -> Result<(f64, f64), ModelError> {
    let b = dynamics_coefficients(e, params)?.b;
    let m = m_from(e, theta, params)?;
    let reloc = params.relocated_mass();
    let d1 = -theta + reloc * (params.s - e) + params.loyal_mass();
    let r1 = e * (b + 0.5 * reloc) - (d1 + 2.0 * params.delta_f * m * theta * b);
    let r2 = theta - 2.0 * b * e;
    Ok((r1, r2))
}

/// Quartic in `e` whose real roots contain every solution of the system.
pub(crate) fn slope_polynomial(params: &ModelParams) -> Poly {
    let k = params.delta_c * (1.0 - params.rho);
    let reloc = params.relocated_mass();
    let loyal = params.loyal_mass();
    let mu = params.mu;
    // q(e) = 1 / (2 b(e))
    let q = Poly::linear(1.0 + k * (1.0 - mu), k * (mu * params.s + 1.0 - mu));
    let x = Poly::x();
    let q2 = q.mul(&q);
    let q3 = q2.mul(&q);
    let lhs = x
        .mul(&Poly::constant(1.0).add(&q.scale(reloc)))
        .mul(&q2.sub(&x.mul(&x).scale(params.delta_f)));
    let inner = Poly::linear(reloc * params.s + loyal, -reloc);
    lhs.add(&q2.mul(&x).scale(2.0)).sub(&q3.mul(&inner).scale(2.0))
}

fn theta_of(e: f64, params: &ModelParams) -> Result<f64, ModelError> {
    Ok(dynamics_coefficients(e, params)?.theta)
}

/// Residual of the slope condition along `theta = theta(e)`.
fn reduced_residual(e: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let theta = theta_of(e, params)?;
    Ok(residual_system(e, theta, params)?.0)
}

fn polish(mut e: f64, params: &ModelParams) -> f64 {
    for _ in 0..8 {
        let Ok(f) = reduced_residual(e, params) else { break };
        if f.abs() < 1e-15 {
            break;
        }
        let h = 1e-7 * (1.0 + e.abs());
        let (Ok(fp), Ok(fm)) = (reduced_residual(e + h, params), reduced_residual(e - h, params)) else {
            break;
        };
        let slope = (fp - fm) / (2.0 * h);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = e - f / slope;
        match reduced_residual(next, params) {
            Ok(g) if g.abs() < f.abs() => e = next,
            _ => break,
        }
    }
    e
}

/// Every real root of the coefficient system, sorted by `(theta, e)`.
pub fn find_candidates(params: &ModelParams) -> Result<Vec<CandidateRoot>, ModelError> {
    params.validate()?;
    if params.mu == 0.0 {
        return Err(ModelError::DegenerateNoRelocation);
    }
    let poly = slope_polynomial(params);
    let mut roots: Vec<CandidateRoot> = Vec::new();
    for (branch, e0) in poly.real_roots().into_iter().enumerate() {
        let e = polish(e0, params);
        let Ok(theta) = theta_of(e, params) else { continue };
        let Ok((r1, r2)) = residual_system(e, theta, params) else { continue };
        if !(r1.abs() < ROOT_TOL && r2.abs() < ROOT_TOL) {
            continue;
        }
        let duplicate = roots
            .iter()
            .any(|r| (r.e - e).abs() < DEDUP_TOL && (r.theta - theta).abs() < DEDUP_TOL);
        if duplicate {
            continue;
        }
        roots.push(CandidateRoot {
            e,
            theta,
            e_branch: branch,
            theta_branch: ThetaSign::of(theta),
            residuals: [r1, r2],
        });
    }
    debug_assert!(roots.len() <= MAX_CANDIDATES);
    if roots.is_empty() {
        return Err(ModelError::NoRoots);
    }
    roots.sort_by(|a, b| a.theta.total_cmp(&b.theta).then(a.e.total_cmp(&b.e)));
    Ok(roots)
}

/// Recovers the full coefficient set for one root.
///
/// The price intercept and the linear value coefficient appear in each
/// other's defining equations, so they are solved as a 2x2 linear system;
/// `k` follows from the constant term of the Bellman equation.
pub fn build_equilibrium(root: &CandidateRoot, params: &ModelParams) -> Result<Equilibrium, ModelError> {
    let e = root.e;
    let dynamics = dynamics_coefficients(e, params)?;
    let (b, eta, theta) = (dynamics.b, dynamics.eta, dynamics.theta);
    let m = m_from(e, theta, params)?;
    let df = params.delta_f;
    let reloc = params.relocated_mass();
    let d0 = eta + reloc * (1.0 - params.s + e) / 2.0;
    let d1 = -theta + reloc * (params.s - e) + params.loyal_mass();

    // [ b + reloc/2    df*b       ] [u]   [ d0 - 2 df b m eta       ]
    // [ -d1            1 + df*th  ] [l] = [ e d0 - 2 df m eta theta ]
    let a11 = b + 0.5 * reloc;
    let a12 = df * b;
    let a21 = -d1;
    let a22 = 1.0 + df * theta;
    let rhs1 = d0 - 2.0 * df * b * m * eta;
    let rhs2 = e * d0 - 2.0 * df * m * eta * theta;
    let det = a11 * a22 - a12 * a21;
    if det == 0.0 || !det.is_finite() {
        return Err(ModelError::Singular("intercept/linear-value system"));
    }
    let markup0 = (rhs1 * a22 - a12 * rhs2) / det;
    let l = (a11 * rhs2 - a21 * rhs1) / det;
    let k = (markup0 * d0 + df * (l * eta + m * eta * eta)) / (1.0 - df);

    Ok(Equilibrium::from_parts(
        *params,
        PolicyCoefficients { d: params.c + markup0, e },
        ValueCoefficients { k, l, m },
        dynamics,
    ))
}

/// Why a candidate was not accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    Unstable,
    NonPositiveSlope,
    SecondOrder,
    Residual,
    /// Cutoffs leave `[0, 1]`: the complete lock-in regime, not modeled.
    CompleteLockIn,
    LockIn,
    Coverage,
    YoungRationality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum CandidateStatus {
    Accepted,
    /// Valid but less profitable than the accepted candidate.
    NotSelected,
    Rejected(Vec<Rejection>),
    BuildFailed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub root: CandidateRoot,
    pub equilibrium: Option<Equilibrium>,
    pub status: CandidateStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveFailure {
    NoRoots,
    NoStableRoot,
    CompleteLockInRegime,
    NoValidCandidate,
}

impl std::fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let msg = match self {
            SolveFailure::NoRoots => "no real roots",
            SolveFailure::NoStableRoot => "no stable root",
            SolveFailure::CompleteLockInRegime => "complete lock-in regime (s > 1) is not modeled",
            SolveFailure::NoValidCandidate => "no stable candidate passes the validity checks",
        };
        f.write_str(msg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub params: ModelParams,
    pub candidates: Vec<CandidateOutcome>,
    pub stable_count: usize,
    pub accepted: Option<Equilibrium>,
    pub failure: Option<SolveFailure>,
}

impl SolveReport {
    pub fn into_result(self) -> Result<Equilibrium, SolveFailure> {
        match (self.accepted, self.failure) {
            (Some(eq), _) => Ok(eq),
            (None, Some(f)) => Err(f),
            (None, None) => Err(SolveFailure::NoValidCandidate),
        }
    }
}

fn rejections(eq: &Equilibrium) -> Vec<Rejection> {
    let d = &eq.diagnostics;
    let mut out = Vec::new();
    if !eq.is_stable() {
        out.push(Rejection::Unstable);
    }
    if eq.policy.e <= 0.0 {
        out.push(Rejection::NonPositiveSlope);
    }
    if !(d.soc_value < 0.0) {
        out.push(Rejection::SecondOrder);
    }
    if !(d.max_bellman_residual < RESIDUAL_TOL && d.foc_residual.abs() < RESIDUAL_TOL) {
        out.push(Rejection::Residual);
    }
    if !d.cutoffs_interior {
        out.push(Rejection::CompleteLockIn);
    }
    if !d.lock_in {
        out.push(Rejection::LockIn);
    }
    if !d.coverage {
        out.push(Rejection::Coverage);
    }
    if !d.young_rationality {
        out.push(Rejection::YoungRationality);
    }
    out
}

/// Solves one parameter point.
///
/// `Err` is reserved for invalid or degenerate parameters; a point without
/// an acceptable equilibrium yields a report with `failure` set.
pub fn solve(params: &ModelParams) -> Result<SolveReport, ModelError> {
    let roots = match find_candidates(params) {
        Ok(r) => r,
        Err(ModelError::NoRoots) => {
            return Ok(SolveReport {
                params: *params,
                candidates: Vec::new(),
                stable_count: 0,
                accepted: None,
                failure: Some(SolveFailure::NoRoots),
            })
        }
        Err(e) => return Err(e),
    };

    let mut candidates: Vec<CandidateOutcome> = roots
        .into_iter()
        .map(|root| match build_equilibrium(&root, params) {
            Ok(eq) => {
                let why = rejections(&eq);
                let status = if why.is_empty() {
                    CandidateStatus::NotSelected
                } else {
                    CandidateStatus::Rejected(why)
                };
                CandidateOutcome {
                    root,
                    equilibrium: Some(eq),
                    status,
                }
            }
            Err(err) => CandidateOutcome {
                root,
                equilibrium: None,
                status: CandidateStatus::BuildFailed(err.to_string()),
            },
        })
        .collect();

    let stable_count = candidates
        .iter()
        .filter(|c| c.equilibrium.as_ref().is_some_and(|eq| eq.is_stable()))
        .count();

    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.status != CandidateStatus::NotSelected {
            continue;
        }
        let eq = c.equilibrium.as_ref().unwrap();
        best = match best {
            None => Some(i),
            Some(j) => {
                let other = candidates[j].equilibrium.as_ref().unwrap();
                let gap = eq.diagnostics.steady_state_profit - other.diagnostics.steady_state_profit;
                let better = gap > PROFIT_TIE_TOL
                    || (gap.abs() <= PROFIT_TIE_TOL && eq.dynamics.theta > 0.0 && other.dynamics.theta <= 0.0);
                Some(if better { i } else { j })
            }
        };
    }

    let (accepted, failure) = match best {
        Some(i) => {
            candidates[i].status = CandidateStatus::Accepted;
            (candidates[i].equilibrium, None)
        }
        None => {
            let failure = if stable_count == 0 {
                SolveFailure::NoStableRoot
            } else if params.s > 1.0 {
                SolveFailure::CompleteLockInRegime
            } else {
                SolveFailure::NoValidCandidate
            };
            (None, Some(failure))
        }
    };

    Ok(SolveReport {
        params: *params,
        candidates,
        stable_count,
        accepted,
        failure,
    })
}

/// Steady-state markup `d + e/2 - c`.
pub fn steady_state_markup(eq: &Equilibrium) -> f64 {
    eq.policy.d + eq.policy.e * STEADY_STATE_SHARE - eq.params.c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: usize,
    pub sigma: f64,
    pub price: f64,
}

/// Share and price path from `sigma0` over `periods` transitions
/// (`periods + 1` points).
pub fn simulate_path(eq: &Equilibrium, sigma0: f64, periods: usize) -> Result<Vec<PathPoint>, ModelError> {
    if !(0.0..=1.0).contains(&sigma0) {
        return Err(ModelError::ShareOutOfRange(sigma0));
    }
    let PolicyCoefficients { d, e } = eq.policy;
    let mut sigma = sigma0;
    let mut path = Vec::with_capacity(periods + 1);
    for t in 0..=periods {
        path.push(PathPoint {
            t,
            sigma,
            price: d + e * sigma,
        });
        sigma = eq.dynamics.eta - eq.dynamics.theta * sigma;
    }
    Ok(path)
}
