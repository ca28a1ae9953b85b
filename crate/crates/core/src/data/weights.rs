//! Service mix implied by a contract's port counts.

use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// Ratio of off-to-on toll to on-to-on toll minutes.
pub const OFF_ON_RATIO: f64 = 3.25;
/// Ratio of off-to-off toll to on-to-on toll minutes.
pub const OFF_OFF_RATIO: f64 = 0.75;

/// Which form of the measured-port equation to use.
///
/// `AsPrinted` reads the left side as `2(w1 + w1) + w4`, giving
/// `u1 = (m + r1) / 7.25`. `Intended` uses `2 w1 + w2 + w4`, giving
/// `u1 = (m + r1) / 8.5`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    #[default]
    AsPrinted,
    Intended,
}

impl WeightScheme {
    fn measured_divisor(self) -> f64 {
        match self {
            WeightScheme::AsPrinted => 4.0 + OFF_ON_RATIO,
            WeightScheme::Intended => 2.0 + 2.0 * OFF_ON_RATIO,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WeightScheme::AsPrinted => "as_printed",
            WeightScheme::Intended => "intended",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "as_printed" => Some(WeightScheme::AsPrinted),
            "intended" => Some(WeightScheme::Intended),
            _ => None,
        }
    }
}

/// Fractions of minutes on the five voice services:
/// on-to-on toll, off-to-on toll, off-to-off toll, off-to-on toll-free,
/// off-to-off toll-free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceWeights(pub [f64; 5]);

impl ServiceWeights {
    /// Share of minutes on the two toll-free services.
    pub fn toll_free_fraction(&self) -> f64 {
        self.0[3] + self.0[4]
    }

    pub fn dot(&self, values: &[f64; 5]) -> f64 {
        self.0.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Solves the port-count equations for the service weights.
///
/// `m` counts measured ports, `r1` and `r2` remote ports on rate options 1
/// and 2. Fractional counts are allowed.
pub fn solve_weights(m: f64, r1: f64, r2: f64, scheme: WeightScheme) -> Result<ServiceWeights, DataError> {
    for (name, v) in [("m", m), ("r1", r1), ("r2", r2)] {
        if !v.is_finite() || v < 0.0 {
            return Err(DataError::Invalid(format!("port count {name} = {v} must be finite and nonnegative")));
        }
    }
    if m + r1 <= 0.0 && r2 <= 0.0 {
        return Err(DataError::Invalid("all port counts are zero".into()));
    }
    let u1 = (m + r1) / scheme.measured_divisor();
    let u = [u1, OFF_ON_RATIO * u1, OFF_OFF_RATIO * u1, OFF_ON_RATIO * u1, r2];
    let total: f64 = u.iter().sum();
    Ok(ServiceWeights(u.map(|x| x / total)))
}
