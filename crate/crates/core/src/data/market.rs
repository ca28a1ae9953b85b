//! Market size, aggregate share and retention rates over time.

use std::path::Path;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::io::{fmt_g17, parse_f64, parse_opt_f64, read_string, write_string};

pub const MARKET_COLUMNS: [&str; 5] = ["t", "L", "y", "retain", "steal"];

/// Retention and steal rates used when a period has no direct measure.
pub fn default_retention(dport: u8) -> (f64, f64) {
    if dport == 0 {
        (0.99, 0.02)
    } else {
        (0.95, 0.05)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketRow {
    pub t: NaiveDate,
    /// Market size.
    pub size: f64,
    /// Incumbent's aggregate share.
    pub share: f64,
    pub retain: Option<f64>,
    pub steal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSeries {
    rows: Vec<MarketRow>,
}

fn months_of(years: f64) -> Result<Months, DataError> {
    let m = (years * 12.0).round();
    if !(m.is_finite() && m >= 0.0 && m < 12_000.0) {
        return Err(DataError::Invalid(format!("bad horizon {years} years")));
    }
    Ok(Months::new(m as u32))
}

impl MarketSeries {
    pub fn new(rows: Vec<MarketRow>) -> Result<Self, DataError> {
        if rows.len() < 2 {
            return Err(DataError::Invalid("market series needs at least two periods".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            check_row(r).map_err(|m| DataError::Invalid(format!("period {}: {m}", r.t)))?;
            if i > 0 && rows[i - 1].t >= r.t {
                return Err(DataError::Invalid(format!("period {} is not after {}", r.t, rows[i - 1].t)));
            }
        }
        Ok(MarketSeries { rows })
    }

    pub fn rows(&self) -> &[MarketRow] {
        &self.rows
    }

    pub fn first(&self) -> NaiveDate {
        self.rows[0].t
    }

    pub fn last(&self) -> NaiveDate {
        self.rows[self.rows.len() - 1].t
    }

    fn interpolate(&self, t: NaiveDate, f: impl Fn(&MarketRow) -> f64) -> Result<f64, DataError> {
        if t < self.first() || t > self.last() {
            return Err(DataError::Invalid(format!(
                "{t} outside the market series ({} to {})",
                self.first(),
                self.last()
            )));
        }
        let i = self.rows.partition_point(|r| r.t <= t);
        let lo = &self.rows[i - 1];
        if lo.t == t || i == self.rows.len() {
            return Ok(f(lo));
        }
        let hi = &self.rows[i];
        let w = (t - lo.t).num_days() as f64 / (hi.t - lo.t).num_days() as f64;
        Ok(f(lo) + w * (f(hi) - f(lo)))
    }

    /// Market size on `t`, linear between periods.
    pub fn size_at(&self, t: NaiveDate) -> Result<f64, DataError> {
        self.interpolate(t, |r| r.size)
    }

    pub fn share_at(&self, t: NaiveDate) -> Result<f64, DataError> {
        self.interpolate(t, |r| r.share)
    }

    /// `L(t) / L(t - h)` for a horizon of `years`.
    pub fn growth(&self, t: NaiveDate, years: f64) -> Result<f64, DataError> {
        let earlier = t
            .checked_sub_months(months_of(years)?)
            .ok_or_else(|| DataError::Invalid(format!("date underflow at {t}")))?;
        Ok(self.size_at(t)? / self.size_at(earlier)?)
    }

    /// Retention and steal rates of the latest period not after `t`, with
    /// the defaults filling whatever that period lacks.
    pub fn retention(&self, t: NaiveDate, dport: u8) -> (f64, f64) {
        let (dr, ds) = default_retention(dport);
        let i = self.rows.partition_point(|r| r.t <= t);
        match i.checked_sub(1).map(|k| &self.rows[k]) {
            Some(r) => (r.retain.unwrap_or(dr), r.steal.unwrap_or(ds)),
            None => (dr, ds),
        }
    }

    /// Quarterly series from 1985 through 2002: the market grows 18% a year
    /// and the incumbent's share falls from 0.90 in 1985 to 0.80 at the
    /// start of 1990, to 0.68 at the end of 1993 and to 0.60 by 2002.
    /// Retention rates are left to the defaults.
    pub fn builtin() -> Self {
        let start = NaiveDate::from_ymd_opt(1985, 1, 1).expect("valid date");
        let knots = [(1985.0, 0.90), (1990.0, 0.80), (1994.0, 0.68), (2003.0, 0.60)];
        let share = |year: f64| {
            let k = knots.windows(2).find(|w| year <= w[1].0).unwrap_or(&knots[2..4]);
            let (a, b) = (k[0], k[1]);
            a.1 + (year - a.0) / (b.0 - a.0) * (b.1 - a.1)
        };
        let rows = (0..72u32)
            .map(|q| {
                let t = start.checked_add_months(Months::new(3 * q)).expect("in range");
                let year = 1985.0 + q as f64 / 4.0;
                MarketRow {
                    t,
                    size: 100.0 * 1.18f64.powf(year - 1985.0),
                    share: share(year),
                    retain: None,
                    steal: None,
                }
            })
            .collect();
        MarketSeries::new(rows).expect("builtin series is valid")
    }
}

fn check_row(r: &MarketRow) -> Result<(), String> {
    if !(r.size.is_finite() && r.size > 0.0) {
        return Err(format!("market size {} must be positive", r.size));
    }
    if !(0.0..=1.0).contains(&r.share) {
        return Err(format!("share y = {} outside [0, 1]", r.share));
    }
    for (name, v) in [("retain", r.retain), ("steal", r.steal)] {
        if let Some(v) = v {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} outside [0, 1]"));
            }
        }
    }
    Ok(())
}

/// Reads `market.csv`; `retain` and `steal` may be blank.
pub fn load_market_series(path: &Path) -> Result<MarketSeries, DataError> {
    let text = read_string(path)?;
    parse_market_series(&text, path)
}

pub(crate) fn parse_market_series(text: &str, path: &Path) -> Result<MarketSeries, DataError> {
    let row_err = |line: u64, message: String| DataError::Row {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| row_err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != MARKET_COLUMNS {
        return Err(row_err(1, format!("header must be {}", MARKET_COLUMNS.join(","))));
    }
    let mut rows: Vec<MarketRow> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| row_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = || -> Result<MarketRow, String> {
            let t = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
                .map_err(|_| format!("cannot parse {:?} as a YYYY-MM-DD date", &record[0]))?;
            let row = MarketRow {
                t,
                size: parse_f64(&record[1])?,
                share: parse_f64(&record[2])?,
                retain: parse_opt_f64(&record[3])?,
                steal: parse_opt_f64(&record[4])?,
            };
            check_row(&row)?;
            Ok(row)
        };
        let row = parse().map_err(|m| row_err(line, m))?;
        if let Some(prev) = rows.last() {
            if prev.t >= row.t {
                return Err(row_err(line, format!("period {} is not after {}", row.t, prev.t)));
            }
        }
        rows.push(row);
    }
    MarketSeries::new(rows)
}

pub fn market_to_csv(series: &MarketSeries) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MARKET_COLUMNS).expect("in-memory write");
    for r in series.rows() {
        w.write_record([
            r.t.to_string(),
            fmt_g17(r.size),
            fmt_g17(r.share),
            r.retain.map(fmt_g17).unwrap_or_default(),
            r.steal.map(fmt_g17).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn save_market_series(path: &Path, series: &MarketSeries) -> Result<(), DataError> {
    write_string(path, &market_to_csv(series))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn retention_defaults() {
        assert_eq!(default_retention(0), (0.99, 0.02));
        assert_eq!(default_retention(1), (0.95, 0.05));
    }

    #[test]
    fn builtin_matches_sample_ranges() {
        let s = MarketSeries::builtin();
        assert!((s.share_at(date(1990, 1, 1)).unwrap() - 0.80).abs() < 1e-12);
        let late = s.share_at(date(1993, 10, 1)).unwrap();
        assert!((0.677..0.69).contains(&late), "{late}");
        let g = s.growth(date(1992, 1, 1), 3.63).unwrap();
        assert!((1.7..1.9).contains(&g), "{g}");
    }

    #[test]
    fn interpolation_and_growth() {
        let text = "t,L,y,retain,steal\n1990-01-01,100,0.8,,\n1991-01-01,200,0.7,0.97,0.03\n1992-01-01,300,0.6,,0.04\n";
        let s = parse_market_series(text, Path::new("m.csv")).unwrap();
        let mid = date(1990, 7, 2);
        let w = (mid - date(1990, 1, 1)).num_days() as f64 / 365.0;
        assert!((s.size_at(mid).unwrap() - (100.0 + 100.0 * w)).abs() < 1e-12);
        assert_eq!(s.growth(date(1992, 1, 1), 2.0).unwrap(), 3.0);
        assert!(s.growth(date(1991, 1, 1), 2.0).is_err());
        assert_eq!(s.retention(date(1991, 6, 1), 0), (0.97, 0.03));
        assert_eq!(s.retention(date(1992, 6, 1), 1), (0.95, 0.04));
        assert_eq!(s.retention(date(1989, 6, 1), 0), (0.99, 0.02));
    }

    #[test]
    fn bad_rows_report_lines() {
        let cases = [
            ("t,L,y,retain,steal\n1990-01-01,100,0.8,,\n1991-01-01,200,1.2,,\n", 3),
            ("t,L,y,retain,steal\n1990-01-01,-1,0.8,,\n1991-01-01,200,0.5,,\n", 2),
            ("t,L,y,retain,steal\n1990-01-01,100,0.8,,\n1989-01-01,200,0.5,,\n", 3),
            ("t,L,y,retain,steal\n1990-13-01,100,0.8,,\n", 2),
            ("t,L,share,retain,steal\n1990-01-01,100,0.8,,\n", 1),
        ];
        for (text, want) in cases {
            match parse_market_series(text, Path::new("m.csv")) {
                Err(DataError::Row { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let s = MarketSeries::builtin();
        let back = parse_market_series(&market_to_csv(&s), Path::new("m.csv")).unwrap();
        assert_eq!(back, s);
    }
}
