//! Residual-by-instrument moment conditions.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{horizon_weights, residuals_with};
use super::observation::{Dataset, Observation, DEFAULT_INSTRUMENTS};
use super::params::StructuralParams;
use crate::error::EstimationError;

pub const FAMILIES: [&str; 4] = ["pricing", "euler", "retain", "steal"];

const CHUNK: usize = 128;

/// Which columns multiply each residual family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentScheme {
    pub constant: bool,
    pub columns: Vec<String>,
}

impl Default for InstrumentScheme {
    fn default() -> Self {
        InstrumentScheme {
            constant: true,
            columns: DEFAULT_INSTRUMENTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl InstrumentScheme {
    pub fn constant_only() -> Self {
        InstrumentScheme {
            constant: true,
            columns: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        usize::from(self.constant) + self.columns.len()
    }

    pub fn n_moments(&self) -> usize {
        FAMILIES.len() * self.width()
    }

    pub fn moment_names(&self) -> Vec<String> {
        let mut cols: Vec<&str> = Vec::new();
        if self.constant {
            cols.push("const");
        }
        cols.extend(self.columns.iter().map(String::as_str));
        FAMILIES
            .iter()
            .flat_map(|f| cols.iter().map(move |c| format!("{f}*{c}")))
            .collect()
    }
}

/// Rows per residual family that entered the moments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCounts {
    pub pricing: usize,
    pub euler: usize,
    pub retain: usize,
    pub steal: usize,
}

impl FamilyCounts {
    fn as_array(&self) -> [usize; 4] {
        [self.pricing, self.euler, self.retain, self.steal]
    }
}

/// Observations in canonical order with their instrument rows.
#[derive(Debug, Clone)]
pub struct MomentData {
    pub observations: Vec<Observation>,
    /// Instrument values per observation, constant first when used.
    pub z: Vec<Vec<f64>>,
    pub scheme: InstrumentScheme,
    pub counts: FamilyCounts,
}

impl MomentData {
    pub fn new(data: &Dataset, scheme: &InstrumentScheme) -> Result<Self, EstimationError> {
        data.validate()?;
        if scheme.width() == 0 {
            return Err(EstimationError::Invalid("instrument scheme selects no columns".into()));
        }
        let idx: Vec<usize> = scheme
            .columns
            .iter()
            .map(|c| {
                data.instrument_names
                    .iter()
                    .position(|n| n == c)
                    .ok_or_else(|| EstimationError::Invalid(format!("instrument column {c:?} not in dataset")))
            })
            .collect::<Result<_, _>>()?;
        let mut observations = data.observations.clone();
        observations.sort_by(|a, b| a.canonical_cmp(b));
        let z: Vec<Vec<f64>> = observations
            .iter()
            .map(|o| {
                let mut row = Vec::with_capacity(scheme.width());
                if scheme.constant {
                    row.push(1.0);
                }
                row.extend(idx.iter().map(|&k| o.instruments[k]));
                row
            })
            .collect();
        let n = observations.len();
        let euler = observations.iter().filter(|o| o.forward.is_some()).count();
        if euler == 0 {
            return Err(EstimationError::Invalid("no observation has forward values for the Euler moments".into()));
        }
        let zm = DMatrix::from_fn(n, scheme.width(), |i, j| z[i][j]);
        let rank = zm.rank(1e-10 * zm.amax().max(1.0) * (n as f64).sqrt());
        if rank < scheme.width() {
            return Err(EstimationError::RankDeficientInstruments {
                rank,
                columns: scheme.width(),
            });
        }
        Ok(MomentData {
            observations,
            z,
            scheme: scheme.clone(),
            counts: FamilyCounts {
                pricing: n,
                euler,
                retain: n,
                steal: n,
            },
        })
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn n_moments(&self) -> usize {
        self.scheme.n_moments()
    }

    /// Residual families for each observation; `None` marks an unusable
    /// Euler row.
    fn residual_rows(&self, p: &StructuralParams) -> Result<Vec<[Option<f64>; 4]>, EstimationError> {
        let (mu, rho) = (p.mu(), p.rho());
        self.observations
            .par_chunks(CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|o| {
                        let hw = horizon_weights(mu, rho, p.delta_c, o.h);
                        let r = residuals_with(o, p, &hw)?;
                        Ok([Some(r.pricing), r.euler, Some(r.retain), Some(r.steal)])
                    })
                    .collect::<Result<Vec<_>, EstimationError>>()
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.into_iter().flatten().collect())
    }

    /// Sample moments: per family, the average of residual times
    /// instrument over the rows usable for that family.
    pub fn moments(&self, p: &StructuralParams) -> Result<DVector<f64>, EstimationError> {
        let rows = self.residual_rows(p)?;
        let w = self.scheme.width();
        let partial: Vec<Vec<f64>> = rows
            .par_chunks(CHUNK)
            .zip(self.z.par_chunks(CHUNK))
            .map(|(rs, zs)| {
                let mut acc = vec![0.0; FAMILIES.len() * w];
                for (r, z) in rs.iter().zip(zs) {
                    for (f, v) in r.iter().enumerate() {
                        if let Some(v) = v {
                            for (j, zj) in z.iter().enumerate() {
                                acc[f * w + j] += v * zj;
                            }
                        }
                    }
                }
                acc
            })
            .collect();
        let counts = self.counts.as_array();
        let mut g: DVector<f64> = DVector::zeros(FAMILIES.len() * w);
        for acc in &partial {
            for (k, a) in acc.iter().enumerate() {
                g[k] += a;
            }
        }
        for k in 0..g.len() {
            g[k] /= counts[k / w] as f64;
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(EstimationError::Singular("non-finite sample moment"));
        }
        Ok(g)
    }

    /// Per-observation contributions scaled so their mean is the moment
    /// vector, and their centered covariance.
    pub fn covariance(&self, p: &StructuralParams) -> Result<DMatrix<f64>, EstimationError> {
        let rows = self.residual_rows(p)?;
        let w = self.scheme.width();
        let m = FAMILIES.len() * w;
        let n = self.n();
        let counts = self.counts.as_array();
        let mut psi = DMatrix::zeros(n, m);
        for (i, (r, z)) in rows.iter().zip(&self.z).enumerate() {
            for (f, v) in r.iter().enumerate() {
                if let Some(v) = v {
                    let scale = n as f64 / counts[f] as f64;
                    for (j, zj) in z.iter().enumerate() {
                        psi[(i, f * w + j)] = scale * v * zj;
                    }
                }
            }
        }
        let mean = psi.row_mean();
        for mut row in psi.row_iter_mut() {
            row -= &mean;
        }
        Ok(psi.transpose() * &psi / n as f64)
    }
}

/// Stacked sample moments for `data` at `p`.
pub fn stack_moments(data: &Dataset, p: &StructuralParams, scheme: &InstrumentScheme) -> Result<DVector<f64>, EstimationError> {
    MomentData::new(data, scheme)?.moments(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_counts() {
        let s = InstrumentScheme::default();
        assert_eq!(s.n_moments(), 36);
        assert_eq!(s.n_moments() - super::super::params::N_PARAMS, 21);
        assert_eq!(InstrumentScheme::constant_only().n_moments(), 4);
        let names = s.moment_names();
        assert_eq!(names[0], "pricing*const");
        assert_eq!(names[35], "steal*sigma_lag2");
    }
}
