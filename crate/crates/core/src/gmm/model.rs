//! Estimating equations: pricing, Euler, retention and share recovery.
//!
//! The symbol the text writes as both omega and varpi is read as one
//! quantity, the probability an old customer is neither relocated nor gone
//! after `h` years.

use serde::{Deserialize, Serialize};

use super::observation::Observation;
use super::params::StructuralParams;
use crate::error::EstimationError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonWeights {
    /// Relocated at least once and still in the market after `h` periods.
    pub gamma: f64,
    /// Never relocated and still in the market after `h` periods.
    pub varpi: f64,
    pub v: f64,
}

impl HorizonWeights {
    /// `gamma / 2v`.
    pub fn half_ratio(&self) -> f64 {
        self.gamma / (2.0 * self.v)
    }
}

pub fn horizon_weights(mu: f64, rho: f64, delta_c: f64, h: f64) -> HorizonWeights {
    let stay = (1.0 - mu).powf(h);
    let survive = (1.0 - rho).powf(h);
    let varpi = stay * survive;
    HorizonWeights {
        gamma: (1.0 - stay) * survive,
        varpi,
        v: (1.0 - delta_c * varpi) / (1.0 - delta_c * (1.0 - rho) * (1.0 - mu)),
    }
}

/// Regressors of the switching-cost equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchingCovariates {
    pub dport_tfrac: f64,
    pub vremot: f64,
    pub dremot: f64,
    pub iremot: f64,
}

impl SwitchingCovariates {
    pub fn of(obs: &Observation, dport: u8) -> Self {
        SwitchingCovariates {
            dport_tfrac: f64::from(dport) * obs.tfrac,
            vremot: obs.vremot,
            dremot: obs.dremot,
            iremot: obs.iremot,
        }
    }
}

pub fn switching_cost(x: &SwitchingCovariates, alpha: &[f64; 5]) -> f64 {
    alpha[0] + alpha[1] * x.dport_tfrac + alpha[2] * x.vremot + alpha[3] * x.dremot + alpha[4] * x.iremot
}

/// Regressors of the pricing equation other than cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingCovariates {
    pub sigma_lag: f64,
    pub h: f64,
    pub vremot: f64,
    pub dremot: f64,
    pub iremot: f64,
    pub tport: f64,
    pub tfrac: f64,
}

impl PricingCovariates {
    pub fn of(obs: &Observation) -> Self {
        PricingCovariates {
            sigma_lag: obs.sigma_prev,
            h: obs.h,
            vremot: obs.vremot,
            dremot: obs.dremot,
            iremot: obs.iremot,
            tport: obs.tport,
            tfrac: obs.tfrac,
        }
    }
}

/// Price less cost implied by the pricing equation.
pub fn predicted_markup(x: &PricingCovariates, p: &StructuralParams) -> f64 {
    let b = &p.beta;
    p.d + p.e * x.sigma_lag
        + b[0] * x.h
        + b[1] * x.vremot
        + b[2] * x.dremot
        + b[3] * x.iremot
        + b[4] * x.tport
        + b[5] * x.tport * x.tfrac
}

pub fn predicted_price(obs: &Observation, p: &StructuralParams) -> f64 {
    predicted_markup(&PricingCovariates::of(obs), p) + obs.c_norm
}

/// Demand slope for a price set now, given switching costs one contract
/// later.
pub fn forward_b(e: f64, hw: &HorizonWeights, delta_c: f64, h: f64, s_future: f64) -> Result<f64, EstimationError> {
    let dh = delta_c.powf(h);
    let bracket = hw.v * (1.0 + dh * hw.varpi) + e * dh * (hw.gamma * s_future / hw.v + hw.varpi);
    if !bracket.is_finite() || bracket.abs() < 1e-12 {
        return Err(EstimationError::Singular("forward demand slope bracket"));
    }
    Ok(1.0 / (2.0 * bracket))
}

/// Old customers' contribution to the aggregate share, per unit of new
/// demand growth: `sigma_prev [gamma/v (s - e) + varpi] + gamma/2v (e - s + v)`.
fn old_share_term(s: f64, sigma_prev: f64, e: f64, hw: &HorizonWeights) -> f64 {
    sigma_prev * (hw.gamma / hw.v * (s - e) + hw.varpi) + hw.half_ratio() * (e - s + hw.v)
}

/// New-customer share from the aggregate share.
pub fn recover_sigma(y: f64, g: f64, s: f64, sigma_prev: f64, e: f64, hw: &HorizonWeights) -> Result<f64, EstimationError> {
    if !(g.is_finite() && g != 0.0) {
        return Err(EstimationError::Invalid(format!("market growth g = {g}")));
    }
    Ok((g * y - old_share_term(s, sigma_prev, e, hw)) / g)
}

/// Aggregate share implied by a new-customer share; inverse of
/// [`recover_sigma`].
pub fn aggregate_share(sigma: f64, g: f64, s: f64, sigma_prev: f64, e: f64, hw: &HorizonWeights) -> f64 {
    sigma + old_share_term(s, sigma_prev, e, hw) / g
}

/// Model retention and steal rates.
pub fn retention_rates(s: f64, sigma_prev: f64, e: f64, hw: &HorizonWeights) -> (f64, f64) {
    let base = e * (1.0 - 2.0 * sigma_prev) + hw.v;
    let q = hw.half_ratio();
    (q * (base + s) + hw.varpi, q * (base - s))
}

/// Everything the Euler equation needs for one contract, with shares
/// already recovered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerInputs {
    pub markup: f64,
    pub markup_fwd: f64,
    pub g: f64,
    pub g_fwd: f64,
    pub sigma_prev: f64,
    pub sigma: f64,
    pub sigma_fwd: f64,
    pub s: f64,
    pub s_fwd: f64,
    pub s_fwd2: f64,
    pub h: f64,
}

/// Left side of the Euler equation; zero at an optimum.
pub fn euler_residual(x: &EulerInputs, p: &StructuralParams, hw: &HorizonWeights) -> Result<f64, EstimationError> {
    let e = p.e;
    let b1 = forward_b(e, hw, p.delta_c, x.h, x.s_fwd)?;
    let b2 = forward_b(e, hw, p.delta_c, x.h, x.s_fwd2)?;
    let kappa = 2.0 * e * b1 * p.delta_f.powf(x.h);
    let q = hw.half_ratio();
    let g = x.g;
    Ok(-(g * b1 + q) * x.markup + kappa * g * (x.g_fwd * b2 + q) * x.markup_fwd
        + g * (x.sigma - kappa * x.g_fwd * x.sigma_fwd)
        + q * ((e + hw.v) * (1.0 - kappa * g) - (x.s - kappa * x.s_fwd * g))
        + x.sigma_prev * (hw.gamma / hw.v * (x.s - e) + hw.varpi)
        - kappa * g * x.sigma * (hw.gamma / hw.v * (x.s_fwd - e) + hw.varpi))
}

/// The forward share that zeroes the Euler equation, all else fixed.
pub fn euler_forward_share(x: &EulerInputs, p: &StructuralParams, hw: &HorizonWeights) -> Result<f64, EstimationError> {
    let mut base = *x;
    base.sigma_fwd = 0.0;
    let r0 = euler_residual(&base, p, hw)?;
    base.sigma_fwd = 1.0;
    let slope = euler_residual(&base, p, hw)? - r0;
    if slope.abs() < 1e-14 {
        return Err(EstimationError::Singular("Euler equation does not depend on the forward share"));
    }
    Ok(-r0 / slope)
}

/// Observed minus model values for one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub pricing: f64,
    pub euler: Option<f64>,
    pub retain: f64,
    pub steal: f64,
    pub switching_cost: f64,
    pub sigma: f64,
    pub sigma_fwd: Option<f64>,
}

pub fn residuals(obs: &Observation, p: &StructuralParams) -> Result<Residuals, EstimationError> {
    let hw = horizon_weights(p.mu(), p.rho(), p.delta_c, obs.h);
    residuals_with(obs, p, &hw)
}

pub(crate) fn residuals_with(obs: &Observation, p: &StructuralParams, hw: &HorizonWeights) -> Result<Residuals, EstimationError> {
    let s = switching_cost(&SwitchingCovariates::of(obs, obs.dport), &p.alpha);
    let markup = predicted_markup(&PricingCovariates::of(obs), p);
    let pricing = obs.price - (markup + obs.c_norm);
    let (retain, steal) = retention_rates(s, obs.sigma_prev, p.e, hw);
    let sigma = recover_sigma(obs.y, obs.g, s, obs.sigma_prev, p.e, hw)?;
    let (euler, sigma_fwd) = match &obs.forward {
        None => (None, None),
        Some(f) => {
            let s_fwd = switching_cost(&SwitchingCovariates::of(obs, f.dport), &p.alpha);
            let s_fwd2 = switching_cost(&SwitchingCovariates::of(obs, f.dport_next), &p.alpha);
            let sigma_fwd = recover_sigma(f.y, f.g, s_fwd, sigma, p.e, hw)?;
            let x = EulerInputs {
                markup: obs.price - obs.c_norm,
                markup_fwd: f.price - f.c_norm,
                g: obs.g,
                g_fwd: f.g,
                sigma_prev: obs.sigma_prev,
                sigma,
                sigma_fwd,
                s,
                s_fwd,
                s_fwd2,
                h: obs.h,
            };
            (Some(euler_residual(&x, p, hw)?), Some(sigma_fwd))
        }
    };
    Ok(Residuals {
        pricing,
        euler,
        retain: obs.retain - retain,
        steal: obs.steal - steal,
        switching_cost: s,
        sigma,
        sigma_fwd,
    })
}
