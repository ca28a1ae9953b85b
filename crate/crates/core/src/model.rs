//! Closed-form evaluation of the linear Markov equilibrium of the
//! switching-cost duopoly.
//!
//! Two firms sit at the ends of a unit Hotelling line. Consumers live two
//! periods; a fraction `mu` of surviving consumers is relocated uniformly
//! between youth and old age, and a fraction `rho` exits early. Each firm
//! charges a single price `P(sigma) = d + e*sigma` that is affine in its
//! share `sigma` of last period's young consumers, and has value
//! `pi(sigma) = k + l*sigma + m*sigma^2`.
//!
//! Everything here is a pure function of its inputs. The coefficient
//! search lives in [`crate::solver`].

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Steady-state share of each firm.
pub const STEADY_STATE_SHARE: f64 = 0.5;

/// Residual tolerance used to accept an equilibrium.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Primitives of the theory model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Consumer discount factor.
    pub delta_c: f64,
    /// Firm discount factor.
    pub delta_f: f64,
    /// Probability a young consumer exits before old age.
    pub rho: f64,
    /// Probability a surviving consumer is relocated on the line.
    pub mu: f64,
    /// Switching cost, in units of the differentiation cost.
    pub s: f64,
    /// Marginal cost.
    #[serde(default)]
    pub c: f64,
    /// Reservation value. `None` selects [`default_reservation_value`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

impl ModelParams {
    pub fn new(delta_c: f64, delta_f: f64, rho: f64, mu: f64, s: f64) -> Self {
        ModelParams {
            delta_c,
            delta_f,
            rho,
            mu,
            s,
            c: 0.0,
            r: None,
        }
    }

    pub fn with_cost(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_reservation(mut self, r: f64) -> Self {
        self.r = Some(r);
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), ModelError> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter { name, value, reason })
            }
        }
        check("delta_c", self.delta_c, self.delta_c > 0.0 && self.delta_c < 1.0, "must lie in (0, 1)")?;
        check("delta_f", self.delta_f, self.delta_f > 0.0 && self.delta_f < 1.0, "must lie in (0, 1)")?;
        check("rho", self.rho, (0.0..1.0).contains(&self.rho), "must lie in [0, 1)")?;
        check("mu", self.mu, (0.0..=1.0).contains(&self.mu), "must lie in [0, 1]")?;
        check("s", self.s, self.s >= 0.0, "must be non-negative")?;
        check("c", self.c, self.c >= 0.0, "must be non-negative")?;
        if let Some(r) = self.r {
            check("r", r, true, "must be finite")?;
        }
        Ok(())
    }

    /// Mass of surviving consumers that are relocated, `mu (1 - rho)`.
    pub fn relocated_mass(&self) -> f64 {
        self.mu * (1.0 - self.rho)
    }

    /// Mass of surviving consumers that keep their position, `(1 - mu)(1 - rho)`.
    pub fn loyal_mass(&self) -> f64 {
        (1.0 - self.mu) * (1.0 - self.rho)
    }
}

/// `P(sigma) = d + e * sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyCoefficients {
    pub d: f64,
    pub e: f64,
}

/// `pi(sigma) = k + l * sigma + m * sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueCoefficients {
    pub k: f64,
    pub l: f64,
    pub m: f64,
}

/// Young-demand slope and the share transition `sigma' = eta - theta * sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsCoefficients {
    pub b: f64,
    pub eta: f64,
    pub theta: f64,
}

/// Diagnostics attached to every built equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_bellman_residual: f64,
    /// First-order condition residual at the steady state.
    pub foc_residual: f64,
    pub soc_value: f64,
    pub lock_in: bool,
    pub coverage: bool,
    pub young_rationality: bool,
    pub cutoffs_interior: bool,
    pub steady_state_profit: f64,
    /// Reservation value used for the coverage and rationality checks.
    pub reservation_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub params: ModelParams,
    pub policy: PolicyCoefficients,
    pub value: ValueCoefficients,
    pub dynamics: DynamicsCoefficients,
    pub diagnostics: Diagnostics,
}

impl Equilibrium {
    /// Assembles an equilibrium and computes its diagnostics.
    pub fn from_parts(
        params: ModelParams,
        policy: PolicyCoefficients,
        value: ValueCoefficients,
        dynamics: DynamicsCoefficients,
    ) -> Self {
        let mut eq = Equilibrium {
            params,
            policy,
            value,
            dynamics,
            diagnostics: Diagnostics {
                max_bellman_residual: f64::NAN,
                foc_residual: f64::NAN,
                soc_value: f64::NAN,
                lock_in: false,
                coverage: false,
                young_rationality: false,
                cutoffs_interior: false,
                steady_state_profit: f64::NAN,
                reservation_value: f64::NAN,
            },
        };
        eq.refresh_diagnostics();
        eq
    }

    /// Recomputes the diagnostics from the current coefficients.
    pub fn refresh_diagnostics(&mut self) {
        let res = bellman_residuals(self);
        let opt = optimality_diagnostics(self, STEADY_STATE_SHARE).expect("steady state is a valid share");
        let flags = validity_checks(self);
        let (_, profit) = evaluate_policy(self, STEADY_STATE_SHARE).expect("steady state is a valid share");
        self.diagnostics = Diagnostics {
            max_bellman_residual: res.max_abs(),
            foc_residual: opt.foc_residual,
            soc_value: opt.soc_value,
            lock_in: flags.lock_in,
            coverage: flags.coverage,
            young_rationality: flags.young_rationality,
            cutoffs_interior: flags.cutoffs_interior,
            steady_state_profit: profit,
            reservation_value: reservation_value(self),
        };
    }

    pub fn is_stable(&self) -> bool {
        self.dynamics.theta.abs() <= 1.0
    }

    /// Every acceptance check passes.
    pub fn is_valid(&self) -> bool {
        let d = &self.diagnostics;
        self.is_stable()
            && d.max_bellman_residual < RESIDUAL_TOL
            && d.foc_residual.abs() < RESIDUAL_TOL
            && d.soc_value < 0.0
            && d.lock_in
            && d.coverage
            && d.young_rationality
            && d.cutoffs_interior
    }

    /// Steady-state price `d + e/2`.
    pub fn steady_state_price(&self) -> f64 {
        self.policy.d + self.policy.e * STEADY_STATE_SHARE
    }
}

fn check_share(sigma: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&sigma) {
        Ok(())
    } else {
        Err(ModelError::ShareOutOfRange(sigma))
    }
}

/// Price and value at share `sigma`.
pub fn evaluate_policy(eq: &Equilibrium, sigma: f64) -> Result<(f64, f64), ModelError> {
    check_share(sigma)?;
    let PolicyCoefficients { d, e } = eq.policy;
    let ValueCoefficients { k, l, m } = eq.value;
    Ok((d + e * sigma, k + l * sigma + m * sigma * sigma))
}

/// Young-demand slope `b` and the share transition implied by slope `e`.
pub fn dynamics_coefficients(e: f64, params: &ModelParams) -> Result<DynamicsCoefficients, ModelError> {
    let ModelParams { delta_c, rho, mu, s, .. } = *params;
    let denom = 2.0 * (1.0 + delta_c * (1.0 - rho) * (1.0 - mu + mu * s * e + (1.0 - mu) * e));
    if denom == 0.0 || !denom.is_finite() {
        return Err(ModelError::Singular("young-demand slope denominator is zero"));
    }
    let b = 1.0 / denom;
    Ok(DynamicsCoefficients {
        b,
        eta: 0.5 + b * e,
        theta: 2.0 * b * e,
    })
}

/// Marginal consumers: the young cutoff and the relocated-old cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    pub x_a: f64,
    pub x_ab: f64,
    pub x_ba: f64,
}

impl Cutoffs {
    /// All cutoffs lie in `[0, 1]`. Out-of-range cutoffs are reported, never clamped.
    pub fn interior(&self) -> bool {
        [self.x_a, self.x_ab, self.x_ba]
            .iter()
            .all(|x| (0.0..=1.0).contains(x))
    }
}

/// Cutoffs at arbitrary prices, given the young-demand slope `b`.
pub fn demand_cutoffs(p_a: f64, p_b: f64, b: f64, s: f64) -> Cutoffs {
    let gap = p_b - p_a;
    Cutoffs {
        x_a: 0.5 + b * gap,
        x_ab: (gap + 1.0 + s) / 2.0,
        x_ba: (gap + 1.0 - s) / 2.0,
    }
}

/// Cutoffs along the equilibrium, with both firms on the linear policy.
pub fn equilibrium_cutoffs(eq: &Equilibrium, sigma_a: f64) -> Result<Cutoffs, ModelError> {
    check_share(sigma_a)?;
    let e = eq.policy.e;
    let s = eq.params.s;
    let tilt = e * (1.0 - 2.0 * sigma_a);
    Ok(Cutoffs {
        x_a: eq.dynamics.eta - eq.dynamics.theta * sigma_a,
        x_ab: (1.0 + s + tilt) / 2.0,
        x_ba: (1.0 - s + tilt) / 2.0,
    })
}

/// Firm A's demand split by cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortDemand {
    pub cutoffs: Cutoffs,
    pub young: f64,
    pub relocated_from_a: f64,
    pub relocated_from_b: f64,
    pub loyal_from_a: f64,
    pub loyal_from_b: f64,
    pub total: f64,
    /// At least one cohort quantity is negative.
    pub negative: bool,
}

pub fn cohort_demand(sigma_a: f64, eq: &Equilibrium) -> Result<CohortDemand, ModelError> {
    let cutoffs = equilibrium_cutoffs(eq, sigma_a)?;
    let reloc = eq.params.relocated_mass();
    let young = cutoffs.x_a;
    let relocated_from_a = reloc * sigma_a * cutoffs.x_ab;
    let relocated_from_b = reloc * (1.0 - sigma_a) * cutoffs.x_ba;
    let loyal_from_a = eq.params.loyal_mass() * sigma_a;
    let loyal_from_b = 0.0;
    let parts = [young, relocated_from_a, relocated_from_b, loyal_from_a, loyal_from_b];
    Ok(CohortDemand {
        cutoffs,
        young,
        relocated_from_a,
        relocated_from_b,
        loyal_from_a,
        loyal_from_b,
        total: parts.iter().sum(),
        negative: parts.iter().any(|q| *q < 0.0),
    })
}

/// Demand intercept and slope in `sigma` along the equilibrium.
fn demand_terms(eq: &Equilibrium) -> (f64, f64) {
    let p = &eq.params;
    let e = eq.policy.e;
    let DynamicsCoefficients { eta, theta, .. } = eq.dynamics;
    let reloc = p.relocated_mass();
    let d0 = eta + reloc * (1.0 - p.s + e) / 2.0;
    let d1 = -theta + reloc * (p.s - e) + p.loyal_mass();
    (d0, d1)
}

/// Right-hand side minus left-hand side of the three value-coefficient equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellmanResiduals {
    pub k: f64,
    pub l: f64,
    pub m: f64,
}

impl BellmanResiduals {
    pub fn max_abs(&self) -> f64 {
        self.k.abs().max(self.l.abs()).max(self.m.abs())
    }
}

/// Matches the value function against one period of profit plus the
/// discounted continuation, coefficient by coefficient in `sigma`.
pub fn bellman_residuals(eq: &Equilibrium) -> BellmanResiduals {
    let df = eq.params.delta_f;
    let markup0 = eq.policy.d - eq.params.c;
    let e = eq.policy.e;
    let ValueCoefficients { k, l, m } = eq.value;
    let DynamicsCoefficients { eta, theta, .. } = eq.dynamics;
    let (d0, d1) = demand_terms(eq);
    BellmanResiduals {
        k: markup0 * d0 + df * (k + l * eta + m * eta * eta) - k,
        l: markup0 * d1 + e * d0 + df * (-l * theta - 2.0 * m * eta * theta) - l,
        m: e * d1 + df * m * theta * theta - m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityDiagnostics {
    pub foc_residual: f64,
    pub soc_value: f64,
}

/// First-order condition residual at `sigma` and the second-order expression
/// (negative at a maximum).
pub fn optimality_diagnostics(eq: &Equilibrium, sigma: f64) -> Result<OptimalityDiagnostics, ModelError> {
    check_share(sigma)?;
    let p = &eq.params;
    let reloc = p.relocated_mass();
    let PolicyCoefficients { d, e } = eq.policy;
    let ValueCoefficients { l, m, .. } = eq.value;
    let DynamicsCoefficients { b, eta, theta } = eq.dynamics;
    let next = eta - theta * sigma;
    let quantity = next
        + reloc * (sigma * p.s + (1.0 - p.s + e) / 2.0 - e * sigma)
        + p.loyal_mass() * sigma;
    let foc = (d + e * sigma - p.c) * (-b - 0.5 * reloc) + quantity - p.delta_f * (l + 2.0 * m * next) * b;
    let soc = 2.0 * (-b - 0.5 * reloc) + 2.0 * p.delta_f * m * b * b;
    Ok(OptimalityDiagnostics {
        foc_residual: foc,
        soc_value: soc,
    })
}

/// Reservation value used when the caller leaves `r` unset: steady-state
/// price plus the worst-case travel cost, the switching cost and one unit
/// of slack.
pub fn default_reservation_value(eq: &Equilibrium) -> f64 {
    eq.steady_state_price() + 1.0 + eq.params.s + 1.0
}

pub fn reservation_value(eq: &Equilibrium) -> f64 {
    eq.params.r.unwrap_or_else(|| default_reservation_value(eq))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityFlags {
    pub lock_in: bool,
    pub coverage: bool,
    pub young_rationality: bool,
    pub cutoffs_interior: bool,
}

impl ValidityFlags {
    pub fn all(&self) -> bool {
        self.lock_in && self.coverage && self.young_rationality && self.cutoffs_interior
    }
}

/// Expected old-age utility, net of `r - P`, of a relocated consumer
/// attached to one firm when both firms charge the same price.
fn attached_relocation_loss(x_ab: f64, s: f64) -> f64 {
    x_ab * x_ab / 2.0 + (1.0 - x_ab) * s + (1.0 - x_ab) * (1.0 - x_ab) / 2.0
}

/// Checks at the symmetric steady state:
///
/// * `lock_in`: `x_BA <= sigma <= x_AB`, so no consumer who kept their
///   position switches.
/// * `coverage`: the consumer at distance one weakly prefers buying.
/// * `young_rationality`: the marginal young consumer prefers buying now
///   to waiting and buying only when old.
/// * `cutoffs_interior`: all three cutoffs lie in `[0, 1]`.
pub fn validity_checks(eq: &Equilibrium) -> ValidityFlags {
    let sigma = STEADY_STATE_SHARE;
    let cut = equilibrium_cutoffs(eq, sigma).expect("steady state is a valid share");
    let price = eq.steady_state_price();
    let r = reservation_value(eq);
    let p = &eq.params;

    let lock_in = cut.x_ba <= sigma && sigma <= cut.x_ab;
    let coverage = r - price - 1.0 >= 0.0;

    // Buying when young locks the consumer in; waiting leaves them free to
    // choose the nearer firm when old. Non-relocated consumers fare the same.
    let surplus_now = r - price - cut.x_a;
    let continuation_gap = p.delta_c
        * (1.0 - p.rho)
        * p.mu
        * (attached_relocation_loss(cut.x_ab, p.s) - 0.25);
    let young_rationality = surplus_now - continuation_gap >= 0.0;

    ValidityFlags {
        lock_in,
        coverage,
        young_rationality,
        cutoffs_interior: cut.interior(),
    }
}
