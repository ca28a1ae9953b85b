//! Tariff options and the margin, mix and portability variables derived
//! from them.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::costs::CostTable;
use super::portability::{portability_vars, PortabilityTimeline};
use super::weights::{solve_weights, ServiceWeights, WeightScheme};
use crate::error::DataError;
use crate::io::{fmt_g17, read_string, write_string};

/// Share of the minimum volume commitment a customer is assumed to use when
/// discounted prices are read off a tariff's discount schedule. Prices in
/// `contracts.csv` are already discounted; the constant is carried in output
/// metadata.
pub const VOLUME_COMMITMENT_FACTOR: f64 = 1.2;

pub const CONTRACT_COLUMNS: [&str; 19] = [
    "id",
    "effective_date",
    "revis",
    "p1",
    "p2",
    "p3",
    "p4",
    "p5",
    "r_i",
    "F_i",
    "h_i",
    "m",
    "r1",
    "r2",
    "c_v",
    "c_d",
    "vremot",
    "dremot",
    "iremot",
];

/// One tariff option as filed. Dollar amounts are per month, prices per
/// minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffOption {
    pub id: String,
    pub effective_date: NaiveDate,
    pub revis: u8,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: Option<f64>,
    pub p5: Option<f64>,
    /// Monthly commitment.
    #[serde(rename = "r_i")]
    pub commitment: f64,
    /// Fixed monthly fee.
    #[serde(rename = "F_i")]
    pub fixed_fee: f64,
    /// Minimum term in years.
    #[serde(rename = "h_i")]
    pub duration: f64,
    pub m: f64,
    pub r1: f64,
    pub r2: f64,
    pub c_v: f64,
    pub c_d: f64,
    pub vremot: f64,
    pub dremot: f64,
    pub iremot: f64,
}

impl TariffOption {
    pub fn prices(&self) -> [Option<f64>; 5] {
        [Some(self.p1), Some(self.p2), Some(self.p3), self.p4, self.p5]
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::Invalid(format!("option {}: {msg}", self.id)));
        if self.revis > 1 {
            return bad(format!("revis = {} must be 0 or 1", self.revis));
        }
        if !(self.fixed_fee >= 0.0 && self.commitment > self.fixed_fee && self.commitment.is_finite()) {
            return bad(format!(
                "need r_i > F_i >= 0, got r_i = {}, F_i = {}",
                self.commitment, self.fixed_fee
            ));
        }
        if !(3.0..=5.0).contains(&self.duration) {
            return bad(format!("duration {} outside [3, 5] years", self.duration));
        }
        for (j, p) in self.prices().iter().enumerate() {
            if let Some(p) = p {
                if !(p.is_finite() && *p > 0.0) {
                    return bad(format!("price p{} = {p} must be positive", j + 1));
                }
            }
        }
        for (name, v) in [("m", self.m), ("r1", self.r1), ("r2", self.r2), ("c_v", self.c_v), ("c_d", self.c_d)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be nonnegative"));
            }
        }
        for (name, v) in [("vremot", self.vremot), ("dremot", self.dremot), ("iremot", self.iremot)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Monthly minutes, normalized cost and margin from contract averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParts {
    pub minutes: f64,
    pub c_norm: f64,
    pub margin: f64,
}

/// `q = (r - F) / avg_price`, `c = (fixed_costs + q avg_cost) / r`.
pub fn margin_from_averages(
    avg_price: f64,
    avg_cost: f64,
    commitment: f64,
    fixed_fee: f64,
    fixed_costs: f64,
) -> Result<MarginParts, DataError> {
    if !(avg_price > 0.0) {
        return Err(DataError::Invalid(format!("average price {avg_price} must be positive")));
    }
    if !(commitment > 0.0) {
        return Err(DataError::Invalid(format!("commitment {commitment} must be positive")));
    }
    let minutes = (commitment - fixed_fee) / avg_price;
    if !(minutes > 0.0) {
        return Err(DataError::Invalid(format!(
            "no variable usage: commitment {commitment} does not exceed fixed fee {fixed_fee}"
        )));
    }
    let c_norm = (fixed_costs + minutes * avg_cost) / commitment;
    Ok(MarginParts {
        minutes,
        c_norm,
        margin: 1.0 - c_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedContract {
    pub id: String,
    pub effective_date: NaiveDate,
    pub revis: u8,
    pub weights: ServiceWeights,
    pub tfrac: f64,
    pub avg_price: f64,
    pub avg_cost: f64,
    pub minutes: f64,
    pub c_norm: f64,
    pub margin: f64,
    pub expected_date: NaiveDate,
    pub tport: f64,
    pub dport: u8,
    pub duration: f64,
    pub vremot: f64,
    pub dremot: f64,
    pub iremot: f64,
}

/// Everything `derive_contract` needs besides the option itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeriveConfig {
    pub costs: CostTable,
    pub timeline: PortabilityTimeline,
    pub weights: WeightScheme,
}

pub fn derive_contract(option: &TariffOption, config: &DeriveConfig) -> Result<DerivedContract, DataError> {
    option.validate()?;
    config.costs.validate()?;
    let weights = solve_weights(option.m, option.r1, option.r2, config.weights)
        .map_err(|e| DataError::Invalid(format!("option {}: {e}", option.id)))?;
    let port = portability_vars(option.effective_date, &config.timeline)?;
    let costs = config.costs.marginal_costs(option.effective_date, port.dport == 1)?;
    let mut prices = [0.0; 5];
    for (j, p) in option.prices().iter().enumerate() {
        match p {
            Some(p) => prices[j] = *p,
            None if weights.0[j] > 0.0 => {
                return Err(DataError::Invalid(format!(
                    "option {}: service {} has weight {} but no price",
                    option.id,
                    j + 1,
                    weights.0[j]
                )))
            }
            None => {}
        }
    }
    let avg_price = weights.dot(&prices);
    let avg_cost = weights.dot(&costs);
    let parts = margin_from_averages(
        avg_price,
        avg_cost,
        option.commitment,
        option.fixed_fee,
        option.c_d + option.c_v,
    )
    .map_err(|e| DataError::Invalid(format!("option {}: {e}", option.id)))?;
    if !(parts.margin > -1.0 && parts.margin < 1.0) {
        return Err(DataError::Invalid(format!(
            "option {}: margin {} outside (-1, 1)",
            option.id, parts.margin
        )));
    }
    Ok(DerivedContract {
        id: option.id.clone(),
        effective_date: option.effective_date,
        revis: option.revis,
        tfrac: weights.toll_free_fraction(),
        weights,
        avg_price,
        avg_cost,
        minutes: parts.minutes,
        c_norm: parts.c_norm,
        margin: parts.margin,
        expected_date: port.expected_date,
        tport: port.tport,
        dport: port.dport,
        duration: option.duration,
        vremot: option.vremot,
        dremot: option.dremot,
        iremot: option.iremot,
    })
}

fn row_error(path: &Path, line: u64, message: impl Into<String>) -> DataError {
    DataError::Row {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, err: csv::Error) -> DataError {
    match err.position() {
        Some(pos) => row_error(path, pos.line(), err.to_string()),
        None => DataError::Csv {
            path: path.to_path_buf(),
            source: err,
        },
    }
}

/// Reads `contracts.csv`. Every row is validated; errors carry the line.
pub fn load_contracts(path: &Path) -> Result<Vec<TariffOption>, DataError> {
    let text = read_string(path)?;
    parse_contracts(&text, path)
}

pub(crate) fn parse_contracts(text: &str, path: &Path) -> Result<Vec<TariffOption>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = &CONTRACT_COLUMNS[..];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(row_error(
            path,
            1,
            format!("header must be {}", expected.join(",")),
        ));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let option: TariffOption = record
            .deserialize(Some(&headers))
            .map_err(|e| row_error(path, line, e.to_string()))?;
        option.validate().map_err(|e| row_error(path, line, e.to_string()))?;
        out.push(option);
    }
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_g17).unwrap_or_default()
}

pub fn contracts_to_csv(options: &[TariffOption]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CONTRACT_COLUMNS).expect("in-memory write");
    for o in options {
        w.write_record([
            o.id.clone(),
            o.effective_date.to_string(),
            o.revis.to_string(),
            fmt_g17(o.p1),
            fmt_g17(o.p2),
            fmt_g17(o.p3),
            opt(o.p4),
            opt(o.p5),
            fmt_g17(o.commitment),
            fmt_g17(o.fixed_fee),
            fmt_g17(o.duration),
            fmt_g17(o.m),
            fmt_g17(o.r1),
            fmt_g17(o.r2),
            fmt_g17(o.c_v),
            fmt_g17(o.c_d),
            fmt_g17(o.vremot),
            fmt_g17(o.dremot),
            fmt_g17(o.iremot),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn save_contracts(path: &Path, options: &[TariffOption]) -> Result<(), DataError> {
    write_string(path, &contracts_to_csv(options))
}

pub const DERIVED_COLUMNS: [&str; 22] = [
    "id",
    "effective_date",
    "revis",
    "w1",
    "w2",
    "w3",
    "w4",
    "w5",
    "tfrac",
    "avg_price",
    "avg_cost",
    "minutes",
    "c_norm",
    "margin",
    "expected_date",
    "tport",
    "dport",
    "h",
    "vremot",
    "dremot",
    "iremot",
    "volume_commitment_factor",
];

pub fn derived_to_csv(rows: &[DerivedContract]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(DERIVED_COLUMNS).expect("in-memory write");
    for d in rows {
        let mut rec = vec![d.id.clone(), d.effective_date.to_string(), d.revis.to_string()];
        rec.extend(d.weights.0.iter().map(|&x| fmt_g17(x)));
        rec.extend(
            [d.tfrac, d.avg_price, d.avg_cost, d.minutes, d.c_norm, d.margin]
                .into_iter()
                .map(fmt_g17),
        );
        rec.push(d.expected_date.to_string());
        rec.push(fmt_g17(d.tport));
        rec.push(d.dport.to_string());
        rec.extend(
            [d.duration, d.vremot, d.dremot, d.iremot, VOLUME_COMMITMENT_FACTOR]
                .into_iter()
                .map(fmt_g17),
        );
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
