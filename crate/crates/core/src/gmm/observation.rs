//! Estimation data: one row per contract option.

use std::cmp::Ordering;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::io::{fmt_g17, parse_f64, parse_opt_f64, read_string, write_string};

/// Instruments named in the reported specification: service marginal costs
/// now and one contract earlier, and the share two contracts back.
pub const DEFAULT_INSTRUMENTS: [&str; 8] =
    ["c1_t", "c3_t", "c4_t", "c5_t", "c1_lag", "c3_lag", "c4_lag", "sigma_lag2"];

pub const BASE_COLUMNS: [&str; 23] = [
    "id",
    "date",
    "revis",
    "h",
    "price",
    "c_norm",
    "y",
    "g",
    "retain",
    "steal",
    "vremot",
    "dremot",
    "iremot",
    "tport",
    "tfrac",
    "dport",
    "sigma_prev",
    "fwd_price",
    "fwd_c_norm",
    "fwd_y",
    "fwd_g",
    "fwd_dport",
    "fwd2_dport",
];

/// Values one contract later, and the portability status two contracts
/// later that the forward demand slope needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forward {
    pub price: f64,
    pub c_norm: f64,
    pub y: f64,
    pub g: f64,
    pub dport: u8,
    pub dport_next: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    pub date: NaiveDate,
    pub revis: u8,
    /// Contract duration in years; one pricing period.
    pub h: f64,
    /// Normalized price, 1 in the tariff data.
    pub price: f64,
    pub c_norm: f64,
    /// Incumbent's aggregate share.
    pub y: f64,
    /// Market growth over the contract, `L(t) / L(t - h)`.
    pub g: f64,
    pub retain: f64,
    pub steal: f64,
    pub vremot: f64,
    pub dremot: f64,
    pub iremot: f64,
    pub tport: f64,
    pub tfrac: f64,
    pub dport: u8,
    /// Share of this contract type one contract earlier.
    pub sigma_prev: f64,
    pub forward: Option<Forward>,
    pub instruments: Vec<f64>,
}

impl Observation {
    pub fn validate(&self) -> Result<(), String> {
        let unit = [
            ("y", self.y),
            ("retain", self.retain),
            ("steal", self.steal),
            ("vremot", self.vremot),
            ("dremot", self.dremot),
            ("iremot", self.iremot),
            ("tfrac", self.tfrac),
            ("sigma_prev", self.sigma_prev),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(format!("growth g = {} must be positive", self.g));
        }
        if !(self.h.is_finite() && self.h >= 1.0) {
            return Err(format!("horizon h = {} must be at least 1", self.h));
        }
        if self.dport > 1 || self.revis > 1 {
            return Err("dport and revis must be 0 or 1".into());
        }
        if !(self.tport.is_finite() && self.tport >= 0.0) {
            return Err(format!("tport = {} must be nonnegative", self.tport));
        }
        for (name, v) in [("price", self.price), ("c_norm", self.c_norm)] {
            if !v.is_finite() {
                return Err(format!("{name} must be finite"));
            }
        }
        if let Some(f) = &self.forward {
            if !(0.0..=1.0).contains(&f.y) {
                return Err(format!("fwd_y = {} outside [0, 1]", f.y));
            }
            if !(f.g.is_finite() && f.g > 0.0) {
                return Err(format!("fwd_g = {} must be positive", f.g));
            }
            if f.dport > 1 || f.dport_next > 1 {
                return Err("forward dport values must be 0 or 1".into());
            }
            if !(f.price.is_finite() && f.c_norm.is_finite()) {
                return Err("forward price and cost must be finite".into());
            }
        }
        if self.instruments.iter().any(|z| !z.is_finite()) {
            return Err("instrument values must be finite".into());
        }
        Ok(())
    }

    fn numeric_key(&self) -> Vec<f64> {
        let mut k = vec![
            self.h,
            self.price,
            self.c_norm,
            self.y,
            self.g,
            self.retain,
            self.steal,
            self.vremot,
            self.dremot,
            self.iremot,
            self.tport,
            self.tfrac,
            f64::from(self.dport),
            self.sigma_prev,
        ];
        if let Some(f) = &self.forward {
            k.extend([f.price, f.c_norm, f.y, f.g, f64::from(f.dport), f64::from(f.dport_next)]);
        }
        k.extend(&self.instruments);
        k
    }

    /// Total order used to make estimation independent of row order.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.id
            .cmp(&other.id)
            .then(self.date.cmp(&other.date))
            .then(self.revis.cmp(&other.revis))
            .then(self.forward.is_some().cmp(&other.forward.is_some()))
            .then_with(|| {
                let (a, b) = (self.numeric_key(), other.numeric_key());
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(a.len().cmp(&b.len()))
            })
    }
}

/// Observations plus the names of their instrument columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub instrument_names: Vec<String>,
    pub observations: Vec<Observation>,
}

impl Dataset {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.observations.is_empty() {
            return Err(DataError::Invalid("dataset has no observations".into()));
        }
        let k = self.instrument_names.len();
        for (i, o) in self.observations.iter().enumerate() {
            if o.instruments.len() != k {
                return Err(DataError::Invalid(format!(
                    "observation {i} ({}) has {} instruments, expected {k}",
                    o.id,
                    o.instruments.len()
                )));
            }
            o.validate()
                .map_err(|m| DataError::Invalid(format!("observation {i} ({}): {m}", o.id)))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Rows whose revision flag equals `revis`.
    pub fn subset_revised(&self, revis: u8) -> Dataset {
        Dataset {
            instrument_names: self.instrument_names.clone(),
            observations: self.observations.iter().filter(|o| o.revis == revis).cloned().collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = BASE_COLUMNS
            .iter()
            .copied()
            .chain(self.instrument_names.iter().map(String::as_str))
            .collect();
        w.write_record(&header).expect("in-memory write");
        for o in &self.observations {
            let mut rec = vec![o.id.clone(), o.date.to_string(), o.revis.to_string()];
            rec.extend(
                [
                    o.h, o.price, o.c_norm, o.y, o.g, o.retain, o.steal, o.vremot, o.dremot, o.iremot, o.tport, o.tfrac,
                ]
                .into_iter()
                .map(fmt_g17),
            );
            rec.push(o.dport.to_string());
            rec.push(fmt_g17(o.sigma_prev));
            match &o.forward {
                Some(f) => {
                    rec.extend([f.price, f.c_norm, f.y, f.g].into_iter().map(fmt_g17));
                    rec.push(f.dport.to_string());
                    rec.push(f.dport_next.to_string());
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 6)),
            }
            rec.extend(o.instruments.iter().map(|&z| fmt_g17(z)));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        write_string(path, &self.to_csv())
    }

    pub fn load(path: &Path) -> Result<Dataset, DataError> {
        Dataset::parse(&read_string(path)?, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Dataset, DataError> {
        let row_err = |line: u64, message: String| DataError::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| row_err(1, e.to_string()))?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names.len() < BASE_COLUMNS.len() || names[..BASE_COLUMNS.len()] != BASE_COLUMNS {
            return Err(row_err(
                1,
                format!("header must start with {} followed by instrument columns", BASE_COLUMNS.join(",")),
            ));
        }
        let instrument_names: Vec<String> = names[BASE_COLUMNS.len()..].iter().map(|s| s.to_string()).collect();
        let mut observations = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| row_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let obs = parse_row(&record).map_err(|m| row_err(line, m))?;
            obs.validate().map_err(|m| row_err(line, m))?;
            observations.push(obs);
        }
        let data = Dataset {
            instrument_names,
            observations,
        };
        data.validate()?;
        Ok(data)
    }
}

fn parse_flag(field: &str, name: &str) -> Result<u8, String> {
    match field.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(format!("{name} = {other:?} must be 0 or 1")),
    }
}

fn parse_row(r: &csv::StringRecord) -> Result<Observation, String> {
    let f = |i: usize| parse_f64(&r[i]).map_err(|m| format!("{}: {m}", BASE_COLUMNS[i]));
    let date = NaiveDate::parse_from_str(&r[1], "%Y-%m-%d").map_err(|_| format!("date {:?} is not YYYY-MM-DD", &r[1]))?;
    let fwd_fields: Vec<Option<f64>> = (17..21)
        .map(|i| parse_opt_f64(&r[i]).map_err(|m| format!("{}: {m}", BASE_COLUMNS[i])))
        .collect::<Result<_, _>>()?;
    let fwd_flags = [r[21].trim(), r[22].trim()];
    let forward = if fwd_fields.iter().all(Option::is_none) && fwd_flags.iter().all(|s| s.is_empty()) {
        None
    } else if fwd_fields.iter().all(Option::is_some) {
        Some(Forward {
            price: fwd_fields[0].expect("checked"),
            c_norm: fwd_fields[1].expect("checked"),
            y: fwd_fields[2].expect("checked"),
            g: fwd_fields[3].expect("checked"),
            dport: parse_flag(fwd_flags[0], "fwd_dport")?,
            dport_next: parse_flag(fwd_flags[1], "fwd2_dport")?,
        })
    } else {
        return Err("forward columns must be all present or all blank".into());
    };
    let instruments = (BASE_COLUMNS.len()..r.len())
        .map(|i| parse_f64(&r[i]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Observation {
        id: r[0].to_string(),
        date,
        revis: parse_flag(&r[2], "revis")?,
        h: f(3)?,
        price: f(4)?,
        c_norm: f(5)?,
        y: f(6)?,
        g: f(7)?,
        retain: f(8)?,
        steal: f(9)?,
        vremot: f(10)?,
        dremot: f(11)?,
        iremot: f(12)?,
        tport: f(13)?,
        tfrac: f(14)?,
        dport: parse_flag(&r[15], "dport")?,
        sigma_prev: f(16)?,
        forward,
        instruments,
    })
}
