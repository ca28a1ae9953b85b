//! Margins had portability been in place throughout.

use serde::{Deserialize, Serialize};

use super::model::{predicted_markup, PricingCovariates};
use super::observation::Dataset;
use super::params::StructuralParams;
use crate::error::EstimationError;

/// Market share of each firm in the symmetric steady state.
pub const STEADY_STATE_SHARE: f64 = 0.5;

/// Covariates of a representative contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageContract {
    pub h: f64,
    pub vremot: f64,
    pub dremot: f64,
    pub iremot: f64,
    pub tport: f64,
    pub tfrac: f64,
}

impl AverageContract {
    pub fn from_data(data: &Dataset) -> Result<Self, EstimationError> {
        let n = data.observations.len();
        if n == 0 {
            return Err(EstimationError::Invalid("no observations to average".into()));
        }
        let mean = |f: &dyn Fn(&super::observation::Observation) -> f64| {
            data.observations.iter().map(f).sum::<f64>() / n as f64
        };
        Ok(AverageContract {
            h: mean(&|o| o.h),
            vremot: mean(&|o| o.vremot),
            dremot: mean(&|o| o.dremot),
            iremot: mean(&|o| o.iremot),
            tport: mean(&|o| o.tport),
            tfrac: mean(&|o| o.tfrac),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum Scenario {
    /// Representative contract at equal market shares. Covariates default
    /// to sample means.
    SteadyStateAverage { contract: Option<AverageContract> },
    /// Every contract, shares held at their observed paths.
    AllContractsNoTransition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualReport {
    pub scenario: String,
    pub margin_base: f64,
    pub margin_counterfactual: f64,
    /// `100 (counterfactual / base - 1)` on average margins.
    pub pct_change: f64,
    /// Mean over contracts of each contract's percentage change.
    pub pct_change_average_of_ratios: Option<f64>,
    pub contracts: usize,
}

pub fn pct_change(base: f64, counterfactual: f64) -> f64 {
    100.0 * (counterfactual / base - 1.0)
}

/// Price change from moving expected time to portability by `d_tport`
/// (hundreds of days).
pub fn portability_price_effect(p: &StructuralParams, tfrac: f64, d_tport: f64) -> f64 {
    (p.beta[4] + p.beta[5] * tfrac) * d_tport
}

pub fn counterfactual_margins(
    p: &StructuralParams,
    scenario: &Scenario,
    data: Option<&Dataset>,
) -> Result<CounterfactualReport, EstimationError> {
    match scenario {
        Scenario::SteadyStateAverage { contract } => {
            let c = match (contract, data) {
                (Some(c), _) => *c,
                (None, Some(d)) => AverageContract::from_data(d)?,
                (None, None) => {
                    return Err(EstimationError::Invalid(
                        "steady-state scenario needs an average contract or data".into(),
                    ))
                }
            };
            let mut x = PricingCovariates {
                sigma_lag: STEADY_STATE_SHARE,
                h: c.h,
                vremot: c.vremot,
                dremot: c.dremot,
                iremot: c.iremot,
                tport: c.tport,
                tfrac: c.tfrac,
            };
            let base = predicted_markup(&x, p);
            x.tport = 0.0;
            let cf = predicted_markup(&x, p);
            Ok(CounterfactualReport {
                scenario: "steady_state_average".into(),
                margin_base: base,
                margin_counterfactual: cf,
                pct_change: pct_change(base, cf),
                pct_change_average_of_ratios: None,
                contracts: 1,
            })
        }
        Scenario::AllContractsNoTransition => {
            let d = data.ok_or_else(|| EstimationError::Invalid("all-contracts scenario needs data".into()))?;
            let n = d.observations.len();
            if n == 0 {
                return Err(EstimationError::Invalid("no observations".into()));
            }
            let (mut sb, mut sc, mut sr) = (0.0, 0.0, 0.0);
            for o in &d.observations {
                let base = o.price - o.c_norm;
                let cf = base - portability_price_effect(p, o.tfrac, o.tport);
                sb += base;
                sc += cf;
                sr += pct_change(base, cf);
            }
            let (base, cf) = (sb / n as f64, sc / n as f64);
            Ok(CounterfactualReport {
                scenario: "all_contracts_no_transition".into(),
                margin_base: base,
                margin_counterfactual: cf,
                pct_change: pct_change(base, cf),
                pct_change_average_of_ratios: Some(sr / n as f64),
                contracts: n,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_steady_state_change() {
        assert!((pct_change(0.429, 0.324) - (-24.475524475524477)).abs() < 1e-9);
        assert_eq!(format!("{:.1}", pct_change(0.429, 0.324)), "-24.5");
    }

    #[test]
    fn toll_free_intensity_effect() {
        let mut p = StructuralParams::reported_base_model();
        p.beta[4] = 0.0;
        assert!((portability_price_effect(&p, 0.5, 1.0) - 0.282).abs() < 1e-15);
    }

    #[test]
    fn no_portability_channel_means_no_change() {
        let mut p = StructuralParams::reported_base_model();
        p.beta[4] = 0.0;
        p.beta[5] = 0.0;
        p.d = 1.0;
        let c = AverageContract {
            h: 3.63,
            vremot: 0.168,
            dremot: 0.636,
            iremot: 0.00525,
            tport: 2.72,
            tfrac: 0.404,
        };
        let r = counterfactual_margins(&p, &Scenario::SteadyStateAverage { contract: Some(c) }, None).unwrap();
        assert_eq!(r.margin_base, r.margin_counterfactual);
        assert_eq!(r.pct_change, 0.0);
    }

    #[test]
    fn steady_state_uses_equal_shares() {
        let p = StructuralParams::reported_base_model();
        let c = AverageContract {
            h: 3.63,
            vremot: 0.168,
            dremot: 0.636,
            iremot: 0.00525,
            tport: 2.72,
            tfrac: 0.404,
        };
        let r = counterfactual_margins(&p, &Scenario::SteadyStateAverage { contract: Some(c) }, None).unwrap();
        let shift = r.margin_base - r.margin_counterfactual;
        assert!((shift - (-0.187 * 2.72 + 0.564 * 2.72 * 0.404)).abs() < 1e-12);
    }

    #[test]
    fn all_contracts_needs_data() {
        let p = StructuralParams::reported_base_model();
        assert!(counterfactual_margins(&p, &Scenario::AllContractsNoTransition, None).is_err());
        assert!(counterfactual_margins(&p, &Scenario::SteadyStateAverage { contract: None }, None).is_err());
    }
}
