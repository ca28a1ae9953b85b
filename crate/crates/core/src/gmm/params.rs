//! Structural parameters of the estimating equations.

use serde::{Deserialize, Serialize};

use crate::error::EstimationError;

pub const DEFAULT_DISCOUNT: f64 = 0.909;
pub const N_PARAMS: usize = 15;

/// Estimated parameters in vector order.
pub const PARAM_NAMES: [&str; N_PARAMS] = [
    "alpha1", "alpha2", "alpha3", "alpha4", "alpha5", "beta1", "beta2", "beta3", "beta4", "beta5", "beta6", "m", "r",
    "d", "e",
];

fn default_discount() -> f64 {
    DEFAULT_DISCOUNT
}

/// Switching-cost equation `alpha`, pricing-equation `beta`, logits of the
/// relocation and exit probabilities, and the policy coefficients `d`, `e`.
/// The discount factors are held fixed during estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    /// Intercept, dport*tfrac, vremot, dremot, iremot.
    pub alpha: [f64; 5],
    /// Duration, vremot, dremot, iremot, tport, tport*tfrac.
    pub beta: [f64; 6],
    pub m_logit: f64,
    pub r_logit: f64,
    pub d: f64,
    pub e: f64,
    #[serde(default = "default_discount")]
    pub delta_f: f64,
    #[serde(default = "default_discount")]
    pub delta_c: f64,
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let z = x.exp();
        z / (1.0 + z)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl StructuralParams {
    /// Base-model point estimates reported for the tariff sample. Useful as
    /// a formatting fixture; the probabilities sit on the boundary.
    pub fn reported_base_model() -> Self {
        StructuralParams {
            alpha: [0.808, 0.0519, -0.657, 0.579, -1.22],
            beta: [-0.187, 0.439, 1.63, -4.30, -0.187, 0.564],
            m_logit: 401.0,
            r_logit: -3.89,
            d: -0.646,
            e: 0.347,
            delta_f: DEFAULT_DISCOUNT,
            delta_c: DEFAULT_DISCOUNT,
        }
    }

    /// Interior point for synthetic data. Most records keep a forward
    /// contract whose Euler-implied share lies in the unit interval.
    pub fn synthetic_default() -> Self {
        StructuralParams {
            alpha: [0.8, 0.3, -0.4, 0.5, -1.0],
            beta: [-0.05, 0.1, 0.2, -0.5, -0.05, 0.15],
            m_logit: 0.0,
            r_logit: -1.0,
            d: 0.6,
            e: 1.0,
            delta_f: DEFAULT_DISCOUNT,
            delta_c: DEFAULT_DISCOUNT,
        }
    }

    pub fn mu(&self) -> f64 {
        logistic(self.m_logit)
    }

    pub fn rho(&self) -> f64 {
        logistic(self.r_logit)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(N_PARAMS);
        v.extend_from_slice(&self.alpha);
        v.extend_from_slice(&self.beta);
        v.extend([self.m_logit, self.r_logit, self.d, self.e]);
        v
    }

    /// Rebuilds from an estimation vector, keeping this value's discount
    /// factors.
    pub fn with_vec(&self, x: &[f64]) -> Self {
        assert_eq!(x.len(), N_PARAMS, "parameter vector length");
        StructuralParams {
            alpha: x[0..5].try_into().expect("five alphas"),
            beta: x[5..11].try_into().expect("six betas"),
            m_logit: x[11],
            r_logit: x[12],
            d: x[13],
            e: x[14],
            delta_f: self.delta_f,
            delta_c: self.delta_c,
        }
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        if self.to_vec().iter().any(|x| !x.is_finite()) {
            return Err(EstimationError::Invalid("structural parameters must be finite".into()));
        }
        for (name, v) in [("delta_f", self.delta_f), ("delta_c", self.delta_c)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(EstimationError::Invalid(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_round_trip() {
        let p = StructuralParams::reported_base_model();
        let v = p.to_vec();
        assert_eq!(v.len(), N_PARAMS);
        assert_eq!(p.with_vec(&v), p);
        assert_eq!(v[PARAM_NAMES.iter().position(|n| *n == "e").unwrap()], 0.347);
    }

    #[test]
    fn probabilities_from_logits() {
        let p = StructuralParams::reported_base_model();
        assert_eq!(p.mu(), 1.0);
        assert!((p.rho() - 0.02).abs() < 5e-4);
        assert!((logistic(logit(0.3)) - 0.3).abs() < 1e-15);
        assert!(logistic(-800.0) >= 0.0 && logistic(-800.0) < 1e-300);
    }

    #[test]
    fn discount_defaults_in_json() {
        let json = r#"{"alpha":[1,0,0,0,0],"beta":[0,0,0,0,0,0],"m_logit":0,"r_logit":-2,"d":0.1,"e":0.3}"#;
        let p: StructuralParams = serde_json::from_str(json).unwrap();
        assert_eq!((p.delta_f, p.delta_c), (0.909, 0.909));
        p.validate().unwrap();
    }
}
