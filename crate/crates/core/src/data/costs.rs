//! Per-minute marginal cost of each voice service.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

pub const QUERY_FEE_RANGE_CENTS: (f64, f64) = (0.22, 1.0);

/// Network a service is carried on, which fixes its operational cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Network {
    SwitchedToll,
    SwitchedTollFree,
    DedicatedToll,
    DedicatedTollFree,
}

impl Network {
    pub fn is_toll_free(self) -> bool {
        matches!(self, Network::SwitchedTollFree | Network::DedicatedTollFree)
    }
}

/// Operational cost by network, cents per minute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperationalCosts {
    pub switched_toll: f64,
    pub switched_toll_free: f64,
    pub dedicated_toll: f64,
    pub dedicated_toll_free: f64,
}

impl Default for OperationalCosts {
    fn default() -> Self {
        OperationalCosts {
            switched_toll: 1.01,
            switched_toll_free: 1.08,
            dedicated_toll: 1.30,
            dedicated_toll_free: 1.29,
        }
    }
}

impl OperationalCosts {
    pub fn cents(&self, network: Network) -> f64 {
        match network {
            Network::SwitchedToll => self.switched_toll,
            Network::SwitchedTollFree => self.switched_toll_free,
            Network::DedicatedToll => self.dedicated_toll,
            Network::DedicatedTollFree => self.dedicated_toll_free,
        }
    }
}

/// Local access fees in dollars per minute, effective from `from` until the
/// next entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessFees {
    pub from: NaiveDate,
    pub per_minute: [f64; 5],
}

fn default_networks() -> [Network; 5] {
    [
        Network::DedicatedToll,
        Network::SwitchedToll,
        Network::SwitchedToll,
        Network::DedicatedTollFree,
        Network::SwitchedTollFree,
    ]
}

/// Set so that operational cost plus access fee equals the sample-mean
/// marginal cost of each service.
fn default_access_fees() -> Vec<AccessFees> {
    vec![AccessFees {
        from: NaiveDate::from_ymd_opt(1985, 1, 1).expect("valid date"),
        per_minute: [0.0241, 0.0399, 0.0705, 0.0356, 0.0705],
    }]
}

fn default_call_minutes() -> f64 {
    3.6
}

fn default_query_fee() -> f64 {
    0.61
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    #[serde(default)]
    pub operational_cents: OperationalCosts,
    /// Network carrying each of the five services.
    #[serde(default = "default_networks")]
    pub service_networks: [Network; 5],
    #[serde(default = "default_access_fees")]
    pub access_fees: Vec<AccessFees>,
    /// Database lookup charge per toll-free call once numbers are portable.
    #[serde(default = "default_query_fee")]
    pub query_fee_cents: f64,
    #[serde(default = "default_call_minutes")]
    pub toll_free_call_minutes: f64,
    /// Accept a query fee outside the observed range.
    #[serde(default)]
    pub allow_query_fee_outside_range: bool,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            operational_cents: OperationalCosts::default(),
            service_networks: default_networks(),
            access_fees: default_access_fees(),
            query_fee_cents: default_query_fee(),
            toll_free_call_minutes: default_call_minutes(),
            allow_query_fee_outside_range: false,
        }
    }
}

impl CostTable {
    pub fn validate(&self) -> Result<(), DataError> {
        let op = &self.operational_cents;
        let all_op = [op.switched_toll, op.switched_toll_free, op.dedicated_toll, op.dedicated_toll_free];
        if all_op.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(DataError::Invalid("operational costs must be finite and nonnegative".into()));
        }
        if self.access_fees.is_empty() {
            return Err(DataError::Invalid("access fee schedule is empty".into()));
        }
        if self.access_fees.windows(2).any(|w| w[0].from >= w[1].from) {
            return Err(DataError::Invalid("access fee entries must have strictly increasing dates".into()));
        }
        for entry in &self.access_fees {
            if entry.per_minute.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(DataError::Invalid(format!(
                    "access fees from {} must be finite and nonnegative",
                    entry.from
                )));
            }
        }
        if !self.query_fee_cents.is_finite() || self.query_fee_cents < 0.0 {
            return Err(DataError::Invalid("query fee must be finite and nonnegative".into()));
        }
        let (lo, hi) = QUERY_FEE_RANGE_CENTS;
        if !self.allow_query_fee_outside_range && !(lo..=hi).contains(&self.query_fee_cents) {
            return Err(DataError::Invalid(format!(
                "query fee {} cents outside [{lo}, {hi}]; set allow_query_fee_outside_range to override",
                self.query_fee_cents
            )));
        }
        if !(self.toll_free_call_minutes > 0.0) {
            return Err(DataError::Invalid("average toll-free call length must be positive".into()));
        }
        Ok(())
    }

    /// Query fee spread over an average call, dollars per minute.
    pub fn query_surcharge_per_minute(&self) -> f64 {
        self.query_fee_cents / 100.0 / self.toll_free_call_minutes
    }

    pub fn access_fees_at(&self, t: NaiveDate) -> Result<&AccessFees, DataError> {
        self.access_fees
            .iter()
            .rev()
            .find(|e| e.from <= t)
            .ok_or_else(|| DataError::Invalid(format!("no access fees in effect on {t}")))
    }

    /// Marginal cost of each service in dollars per minute on date `t`.
    pub fn marginal_costs(&self, t: NaiveDate, portable: bool) -> Result<[f64; 5], DataError> {
        let access = self.access_fees_at(t)?;
        let surcharge = self.query_surcharge_per_minute();
        let mut out = [0.0; 5];
        for (j, c) in out.iter_mut().enumerate() {
            let network = self.service_networks[j];
            *c = self.operational_cents.cents(network) / 100.0 + access.per_minute[j];
            if portable && network.is_toll_free() {
                *c += surcharge;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn defaults_reproduce_sample_mean_costs() {
        let c = CostTable::default().marginal_costs(date(1991, 1, 1), false).unwrap();
        let target = [0.0371, 0.0500, 0.0806, 0.0485, 0.0813];
        for (a, b) in c.iter().zip(target) {
            assert!((a - b).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn portability_adds_query_fee_to_toll_free_only() {
        let t = CostTable::default();
        let before = t.marginal_costs(date(1994, 1, 1), false).unwrap();
        let after = t.marginal_costs(date(1994, 1, 1), true).unwrap();
        let surcharge = 0.61 / 100.0 / 3.6;
        for j in 0..3 {
            assert_eq!(before[j], after[j]);
        }
        for j in 3..5 {
            assert!((after[j] - before[j] - surcharge).abs() < 1e-15);
        }
    }

    #[test]
    fn query_fee_range_is_enforced() {
        let mut t = CostTable::default();
        t.query_fee_cents = 1.5;
        assert!(t.validate().is_err());
        t.allow_query_fee_outside_range = true;
        assert!(t.validate().is_ok());
        t.query_fee_cents = 0.22;
        t.allow_query_fee_outside_range = false;
        assert!(t.validate().is_ok());
    }

    #[test]
    fn schedule_lookup_uses_latest_entry() {
        let mut t = CostTable::default();
        t.access_fees.push(AccessFees {
            from: date(1992, 1, 1),
            per_minute: [0.01; 5],
        });
        t.validate().unwrap();
        assert_eq!(t.access_fees_at(date(1991, 12, 31)).unwrap().per_minute[0], 0.0241);
        assert_eq!(t.access_fees_at(date(1992, 1, 1)).unwrap().per_minute[0], 0.01);
        assert!(t.access_fees_at(date(1984, 1, 1)).is_err());
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let json = r#"{"access_fees":[{"from":"1989-01-01","per_minute":[0.02,0.03,0.04,0.03,0.04]}]}"#;
        let t: CostTable = serde_json::from_str(json).unwrap();
        t.validate().unwrap();
        assert_eq!(t.query_fee_cents, 0.61);
        assert_eq!(t.toll_free_call_minutes, 3.6);
        assert_eq!(t.service_networks, default_networks());
    }
}
