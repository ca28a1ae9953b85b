//! Expected portability date and the derived time-to-portability variables.

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// What the market expected, as of some date, about the implementation date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expectation {
    /// A specific announced date.
    Fixed { date: NaiveDate },
    /// A rolling horizon, always this many months after the current date.
    Ahead { months: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    /// First date on which this expectation holds.
    pub from: NaiveDate,
    pub expectation: Expectation,
}

/// Announcement history for number portability.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortabilityTimeline {
    /// Regimes in increasing order of `from`. Dates before the first regime
    /// have no expectation.
    pub regimes: Vec<Regime>,
    pub implemented: NaiveDate,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

impl Default for PortabilityTimeline {
    fn default() -> Self {
        PortabilityTimeline {
            regimes: vec![
                Regime {
                    from: ymd(1989, 3, 31),
                    expectation: Expectation::Fixed { date: ymd(1991, 6, 30) },
                },
                Regime {
                    from: ymd(1990, 5, 22),
                    expectation: Expectation::Ahead { months: 15 },
                },
                Regime {
                    from: ymd(1991, 8, 2),
                    expectation: Expectation::Fixed { date: ymd(1993, 3, 1) },
                },
                Regime {
                    from: ymd(1992, 11, 21),
                    expectation: Expectation::Fixed { date: ymd(1993, 5, 1) },
                },
            ],
            implemented: ymd(1993, 5, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortabilityVars {
    pub expected_date: NaiveDate,
    /// Days until the expected date, in units of 100 days, floored at zero.
    pub tport: f64,
    pub dport: u8,
}

impl PortabilityTimeline {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.regimes.is_empty() {
            return Err(DataError::Invalid("portability timeline has no regimes".into()));
        }
        if self.regimes.windows(2).any(|w| w[0].from >= w[1].from) {
            return Err(DataError::Invalid("portability regimes must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn start(&self) -> NaiveDate {
        self.regimes[0].from
    }

    pub fn vars(&self, t: NaiveDate) -> Result<PortabilityVars, DataError> {
        portability_vars(t, self)
    }
}

/// Expected implementation date, `tport` and `dport` on date `t`.
pub fn portability_vars(t: NaiveDate, timeline: &PortabilityTimeline) -> Result<PortabilityVars, DataError> {
    timeline.validate()?;
    let regime = timeline
        .regimes
        .iter()
        .rev()
        .find(|r| r.from <= t)
        .ok_or(DataError::BeforeTimeline(t))?;
    let expected_date = match regime.expectation {
        Expectation::Fixed { date } => date,
        Expectation::Ahead { months } => t
            .checked_add_months(Months::new(months))
            .ok_or_else(|| DataError::Invalid(format!("date overflow adding {months} months to {t}")))?,
    };
    let days = (expected_date - t).num_days().max(0);
    Ok(PortabilityVars {
        expected_date,
        tport: days as f64 / 100.0,
        dport: u8::from(t >= timeline.implemented),
    })
}
