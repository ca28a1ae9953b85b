//! Model-consistent synthetic estimation data.
//!
//! Covariates are drawn to match the tariff sample's summary moments
//! (duration mean 3.63, toll-free fraction 0.404 with sd 0.148, remoteness
//! means 0.168, 0.636 and 0.00525, margin mean 0.451, half revisions,
//! three quarters written before portability). Prices follow the pricing
//! equation. Each record's forward share is chosen so the Euler equation
//! holds, and aggregate shares follow from new-customer shares through the
//! share-recovery identity, so with zero noise every residual is zero at
//! the generating parameters.
//!
//! The instrument columns are noisy proxies of the exogenous covariates:
//! the tariff sample's cost series are not available, and instruments that
//! carry no information about the regressors would leave the pricing
//! coefficients unidentified.

use chrono::{Months, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::market::MarketSeries;
use super::portability::PortabilityTimeline;
use crate::error::{DataError, EstimationError};
use crate::gmm::model::{
    aggregate_share, euler_forward_share, horizon_weights, predicted_markup, retention_rates, switching_cost,
    EulerInputs, PricingCovariates, SwitchingCovariates,
};
use crate::gmm::observation::{Dataset, Forward, Observation, DEFAULT_INSTRUMENTS};
use crate::gmm::params::StructuralParams;

/// Redraws allowed per record before giving up.
const MAX_ATTEMPTS: usize = 10_000;

/// Population spread of each instrument's underlying covariate; instrument
/// noise is a multiple of it.
const PROXY_SCALE: [f64; 8] = [2.1, 1.0, 0.86, 0.24, 0.19, 0.025, 0.2, 0.115];

fn d_coverage() -> f64 {
    0.9
}
fn d_instrument_noise() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    /// Standard deviation of additive noise on observed prices.
    #[serde(default)]
    pub price_noise: f64,
    /// Standard deviation of additive noise on retention and steal rates.
    #[serde(default)]
    pub rate_noise: f64,
    /// Share of records with a forward contract.
    #[serde(default = "d_coverage")]
    pub forward_coverage: f64,
    /// Instrument noise in units of [`PROXY_SCALE`].
    #[serde(default = "d_instrument_noise")]
    pub instrument_noise: f64,
}

impl SynthConfig {
    pub fn noiseless(n: usize, seed: u64) -> Self {
        SynthConfig {
            n,
            seed,
            price_noise: 0.0,
            rate_noise: 0.0,
            forward_coverage: d_coverage(),
            instrument_noise: d_instrument_noise(),
        }
    }
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

fn uniform_date(rng: &mut ChaCha8Rng, lo: NaiveDate, hi: NaiveDate) -> NaiveDate {
    lo + chrono::Duration::days(rng.random_range(0..=(hi - lo).num_days()))
}

fn add_years(t: NaiveDate, years: f64) -> Result<NaiveDate, DataError> {
    t.checked_add_months(Months::new((years * 12.0).round() as u32))
        .ok_or_else(|| DataError::Invalid(format!("date overflow at {t}")))
}

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

struct Draws {
    tfrac: Beta<f64>,
    vremot: Beta<f64>,
    dremot: Beta<f64>,
    iremot: Beta<f64>,
    cost: Normal<f64>,
}

impl Draws {
    fn new() -> Self {
        // Beta parameters from the sample mean m and sd s:
        // a + b = m(1 - m)/s^2 - 1.
        Draws {
            tfrac: Beta::new(4.04, 5.96).expect("valid beta"),
            vremot: Beta::new(0.237, 1.17).expect("valid beta"),
            dremot: Beta::new(3.54, 2.02).expect("valid beta"),
            iremot: Beta::new(0.039, 7.38).expect("valid beta"),
            cost: Normal::new(0.549, 0.0675).expect("valid normal"),
        }
    }
}

fn duration(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    if u < 0.55 {
        3.0
    } else if u < 0.82 {
        4.0
    } else {
        5.0
    }
}

/// Generates `config.n` observations from `params`.
pub fn synthesize_dataset(
    params: &StructuralParams,
    series: &MarketSeries,
    config: &SynthConfig,
) -> Result<Dataset, EstimationError> {
    params.validate()?;
    if config.n == 0 {
        return Err(EstimationError::Invalid("n must be at least 1".into()));
    }
    for (name, v) in [
        ("price_noise", config.price_noise),
        ("rate_noise", config.rate_noise),
        ("instrument_noise", config.instrument_noise),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(EstimationError::Invalid(format!("{name} must be finite and nonnegative")));
        }
    }
    if !unit(config.forward_coverage) {
        return Err(EstimationError::Invalid("forward_coverage must lie in [0, 1]".into()));
    }
    let timeline = PortabilityTimeline::default();
    let draws = Draws::new();
    let observations = (0..config.n)
        .map(|i| record(i, params, series, &timeline, &draws, config).map(|(obs, _)| obs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        instrument_names: DEFAULT_INSTRUMENTS.iter().map(|s| s.to_string()).collect(),
        observations,
    })
}

fn record(
    index: usize,
    p: &StructuralParams,
    series: &MarketSeries,
    timeline: &PortabilityTimeline,
    draws: &Draws,
    config: &SynthConfig,
) -> Result<(Observation, f64), EstimationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    for _ in 0..MAX_ATTEMPTS {
        let date = if rng.random::<f64>() < 0.75 {
            uniform_date(&mut rng, ymd(1990, 2, 1), ymd(1993, 4, 30))
        } else {
            uniform_date(&mut rng, ymd(1993, 5, 1), ymd(1993, 11, 30))
        };
        let h = duration(&mut rng);
        let revis = u8::from(rng.random::<f64>() < 0.497);
        let tfrac = draws.tfrac.sample(&mut rng);
        let vremot = draws.vremot.sample(&mut rng);
        let dremot = draws.dremot.sample(&mut rng);
        let iremot = draws.iremot.sample(&mut rng);
        let c_norm = draws.cost.sample(&mut rng).clamp(0.3, 0.85);
        let c_fwd = draws.cost.sample(&mut rng).clamp(0.3, 0.85);
        let sigma_prev: f64 = rng.random_range(0.3..0.7);
        let sigma: f64 = rng.random_range(0.3..0.7);
        let has_forward = rng.random::<f64>() < config.forward_coverage;
        let noise: Vec<f64> = (0..12).map(|_| std.sample(&mut rng)).collect();

        let now = timeline.vars(date)?;
        let t_fwd = add_years(date, h)?;
        let fwd = timeline.vars(t_fwd)?;
        let fwd2 = timeline.vars(add_years(t_fwd, h)?)?;
        let g = series.growth(date, h)?;
        let g_fwd = series.growth(t_fwd, h)?;

        let hw = horizon_weights(p.mu(), p.rho(), p.delta_c, h);
        let sw = |dport: u8| {
            switching_cost(
                &SwitchingCovariates {
                    dport_tfrac: f64::from(dport) * tfrac,
                    vremot,
                    dremot,
                    iremot,
                },
                &p.alpha,
            )
        };
        let (s, s_fwd, s_fwd2) = (sw(now.dport), sw(fwd.dport), sw(fwd2.dport));
        let pricing = |sigma_lag: f64, tport: f64| PricingCovariates {
            sigma_lag,
            h,
            vremot,
            dremot,
            iremot,
            tport,
            tfrac,
        };
        let markup = predicted_markup(&pricing(sigma_prev, now.tport), p);
        let markup_fwd = predicted_markup(&pricing(sigma, fwd.tport), p);
        let y = aggregate_share(sigma, g, s, sigma_prev, p.e, &hw);
        let (retain, steal) = retention_rates(s, sigma_prev, p.e, &hw);
        let retain = retain + config.rate_noise * noise[0];
        let steal = steal + config.rate_noise * noise[1];
        if !(unit(y) && unit(retain) && unit(steal)) {
            continue;
        }
        let forward = if has_forward {
            let mut x = EulerInputs {
                markup,
                markup_fwd,
                g,
                g_fwd,
                sigma_prev,
                sigma,
                sigma_fwd: 0.0,
                s,
                s_fwd,
                s_fwd2,
                h,
            };
            x.sigma_fwd = euler_forward_share(&x, p, &hw)?;
            let y_fwd = aggregate_share(x.sigma_fwd, g_fwd, s_fwd, sigma, p.e, &hw);
            // A forward share outside the unit interval has no data
            // counterpart; the record is kept without its forward contract.
            (unit(x.sigma_fwd) && unit(y_fwd)).then_some(Forward {
                price: c_fwd + markup_fwd + config.price_noise * noise[2],
                c_norm: c_fwd,
                y: y_fwd,
                g: g_fwd,
                dport: fwd.dport,
                dport_next: fwd2.dport,
            })
        } else {
            None
        };
        let proxies = [
            now.tport,
            now.tport * tfrac,
            h,
            vremot,
            dremot,
            iremot,
            f64::from(now.dport) * tfrac,
            sigma_prev,
        ];
        let instruments = proxies
            .iter()
            .zip(PROXY_SCALE)
            .zip(&noise[4..12])
            .map(|((x, scale), z)| x + config.instrument_noise * scale * z)
            .collect();
        let obs = Observation {
            id: format!("S{index:06}"),
            date,
            revis,
            h,
            price: c_norm + markup + config.price_noise * noise[3],
            c_norm,
            y,
            g,
            retain,
            steal,
            vremot,
            dremot,
            iremot,
            tport: now.tport,
            tfrac,
            dport: now.dport,
            sigma_prev,
            forward,
            instruments,
        };
        return Ok((obs, sigma));
    }
    Err(EstimationError::Invalid(format!(
        "record {index}: no draw in {MAX_ATTEMPTS} attempts kept every share and rate in [0, 1]; \
         the parameters imply shares outside the unit interval"
    )))
}
