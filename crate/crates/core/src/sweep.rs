//! Parameter-grid sweeps over steady-state markups and the comparative
//! statics reports built on them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, SweepError};
use crate::io::{fmt_g17, parse_f64, parse_opt_f64, read_json, read_string, write_json, write_string};
use crate::model::ModelParams;
use crate::solver::{solve, steady_state_markup, SolveFailure};

/// Markup differences within this band count as flat.
pub const FLAT_TOL: f64 = 1e-9;

/// Share of comparable pairs that must move in the predicted direction.
pub const DIRECTION_PASS_SHARE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub delta_c: Vec<f64>,
    pub delta_f: Vec<f64>,
    pub rho: Vec<f64>,
    pub mu: Vec<f64>,
    pub s: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::standard()
    }
}

impl GridSpec {
    /// The 3 x 3 x 5 x 9 x 11 grid of discount factors, relocation and
    /// shock probabilities, and switching costs.
    pub fn standard() -> Self {
        GridSpec {
            delta_c: vec![0.3, 0.5, 0.7],
            delta_f: vec![0.3, 0.5, 0.7],
            rho: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            mu: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            s: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            c: 0.0,
        }
    }

    pub fn single(params: &ModelParams) -> Self {
        GridSpec {
            delta_c: vec![params.delta_c],
            delta_f: vec![params.delta_f],
            rho: vec![params.rho],
            mu: vec![params.mu],
            s: vec![params.s],
            c: params.c,
        }
    }

    pub fn len(&self) -> usize {
        self.delta_c.len() * self.delta_f.len() * self.rho.len() * self.mu.len() * self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let base = ModelParams::new(0.5, 0.5, 0.0, 0.5, 0.0).with_cost(self.c);
        base.validate()
            .map_err(|e| SweepError::InvalidGrid(e.to_string()))?;
        for param in SweepParam::ALL {
            let values = param.levels(self);
            if values.is_empty() {
                return Err(SweepError::InvalidGrid(format!("{param} list is empty")));
            }
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(SweepError::InvalidGrid(format!("{param} list has duplicates")));
            }
            for &v in values {
                let mut p = base;
                param.set(&mut p, v);
                p.validate()
                    .map_err(|e| SweepError::InvalidGrid(format!("{param} = {v}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Grid points in lexicographic order of (delta_c, delta_f, rho, mu, s).
    pub fn points(&self) -> Vec<ModelParams> {
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        let (dc, df, rho, mu, s) = (
            sorted(&self.delta_c),
            sorted(&self.delta_f),
            sorted(&self.rho),
            sorted(&self.mu),
            sorted(&self.s),
        );
        let mut out = Vec::with_capacity(self.len());
        for &a in &dc {
            for &b in &df {
                for &r in &rho {
                    for &m in &mu {
                        for &x in &s {
                            out.push(ModelParams::new(a, b, r, m, x).with_cost(self.c));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    DeltaC,
    DeltaF,
    Rho,
    Mu,
    S,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::DeltaC,
        SweepParam::DeltaF,
        SweepParam::Rho,
        SweepParam::Mu,
        SweepParam::S,
    ];

    pub fn get(self, p: &ModelParams) -> f64 {
        match self {
            SweepParam::DeltaC => p.delta_c,
            SweepParam::DeltaF => p.delta_f,
            SweepParam::Rho => p.rho,
            SweepParam::Mu => p.mu,
            SweepParam::S => p.s,
        }
    }

    fn set(self, p: &mut ModelParams, v: f64) {
        match self {
            SweepParam::DeltaC => p.delta_c = v,
            SweepParam::DeltaF => p.delta_f = v,
            SweepParam::Rho => p.rho = v,
            SweepParam::Mu => p.mu = v,
            SweepParam::S => p.s = v,
        }
    }

    fn levels(self, g: &GridSpec) -> &[f64] {
        match self {
            SweepParam::DeltaC => &g.delta_c,
            SweepParam::DeltaF => &g.delta_f,
            SweepParam::Rho => &g.rho,
            SweepParam::Mu => &g.mu,
            SweepParam::S => &g.s,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::DeltaC => "delta_c",
            SweepParam::DeltaF => "delta_f",
            SweepParam::Rho => "rho",
            SweepParam::Mu => "mu",
            SweepParam::S => "s",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Solved,
    NoRoots,
    NoStableRoot,
    CompleteLockInRegime,
    NoValidCandidate,
    /// The solver refused the parameters outright.
    Error,
}

impl SweepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepStatus::Solved => "solved",
            SweepStatus::NoRoots => "no_roots",
            SweepStatus::NoStableRoot => "no_stable_root",
            SweepStatus::CompleteLockInRegime => "complete_lock_in_regime",
            SweepStatus::NoValidCandidate => "no_valid_candidate",
            SweepStatus::Error => "error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            SweepStatus::Solved,
            SweepStatus::NoRoots,
            SweepStatus::NoStableRoot,
            SweepStatus::CompleteLockInRegime,
            SweepStatus::NoValidCandidate,
            SweepStatus::Error,
        ]
        .into_iter()
        .find(|x| x.as_str() == s)
    }
}

impl From<SolveFailure> for SweepStatus {
    fn from(f: SolveFailure) -> Self {
        match f {
            SolveFailure::NoRoots => SweepStatus::NoRoots,
            SolveFailure::NoStableRoot => SweepStatus::NoStableRoot,
            SolveFailure::CompleteLockInRegime => SweepStatus::CompleteLockInRegime,
            SolveFailure::NoValidCandidate => SweepStatus::NoValidCandidate,
        }
    }
}

/// One grid point. Outputs are `None` unless the point solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub delta_c: f64,
    pub delta_f: f64,
    pub rho: f64,
    pub mu: f64,
    pub s: f64,
    pub c: f64,
    pub status: SweepStatus,
    pub candidate_count: usize,
    pub stable_count: usize,
    pub d: Option<f64>,
    pub e: Option<f64>,
    pub theta: Option<f64>,
    pub markup: Option<f64>,
    pub lock_in: Option<bool>,
    pub coverage: Option<bool>,
    pub young_rationality: Option<bool>,
    pub cutoffs_interior: Option<bool>,
}

impl SweepRecord {
    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.delta_c, self.delta_f, self.rho, self.mu, self.s).with_cost(self.c)
    }

    pub fn is_solved(&self) -> bool {
        self.status == SweepStatus::Solved
    }

    fn base(p: &ModelParams, status: SweepStatus) -> Self {
        SweepRecord {
            delta_c: p.delta_c,
            delta_f: p.delta_f,
            rho: p.rho,
            mu: p.mu,
            s: p.s,
            c: p.c,
            status,
            candidate_count: 0,
            stable_count: 0,
            d: None,
            e: None,
            theta: None,
            markup: None,
            lock_in: None,
            coverage: None,
            young_rationality: None,
            cutoffs_interior: None,
        }
    }
}

/// Solves one grid point into a record.
pub fn sweep_point(params: &ModelParams) -> SweepRecord {
    let report = match solve(params) {
        Ok(r) => r,
        Err(_) => return SweepRecord::base(params, SweepStatus::Error),
    };
    let status = match report.failure {
        Some(f) => SweepStatus::from(f),
        None => SweepStatus::Solved,
    };
    let mut rec = SweepRecord::base(params, status);
    rec.candidate_count = report.candidates.len();
    rec.stable_count = report.stable_count;
    if let Some(eq) = report.accepted {
        let d = &eq.diagnostics;
        rec.d = Some(eq.policy.d);
        rec.e = Some(eq.policy.e);
        rec.theta = Some(eq.dynamics.theta);
        rec.markup = Some(steady_state_markup(&eq));
        rec.lock_in = Some(d.lock_in);
        rec.coverage = Some(d.coverage);
        rec.young_rationality = Some(d.young_rationality);
        rec.cutoffs_interior = Some(d.cutoffs_interior);
    }
    rec
}

/// Solves every grid point on the global rayon pool. Records come back in
/// grid order regardless of scheduling.
pub fn run_sweep(grid: &GridSpec) -> Result<Vec<SweepRecord>, SweepError> {
    grid.validate()?;
    Ok(grid.points().par_iter().map(sweep_point).collect())
}

/// As [`run_sweep`] on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(grid: &GridSpec, workers: usize) -> Result<Vec<SweepRecord>, SweepError> {
    grid.validate()?;
    if workers == 0 {
        return Err(SweepError::InvalidGrid("worker count must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::InvalidGrid(format!("thread pool: {e}")))?;
    let points = grid.points();
    Ok(pool.install(|| points.par_iter().map(sweep_point).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub total: usize,
    pub solved: usize,
    pub failed: usize,
    pub failures: BTreeMap<String, usize>,
    /// Grid points by number of stable candidate roots.
    pub stable_count_histogram: BTreeMap<usize, usize>,
    pub max_candidates: usize,
}

pub fn summarize(records: &[SweepRecord]) -> SweepSummary {
    let mut failures = BTreeMap::new();
    let mut hist = BTreeMap::new();
    for r in records {
        if !r.is_solved() {
            *failures.entry(r.status.as_str().to_string()).or_insert(0) += 1;
        }
        *hist.entry(r.stable_count).or_insert(0) += 1;
    }
    let solved = records.iter().filter(|r| r.is_solved()).count();
    SweepSummary {
        total: records.len(),
        solved,
        failed: records.len() - solved,
        failures,
        stable_count_histogram: hist,
        max_candidates: records.iter().map(|r| r.candidate_count).max().unwrap_or(0),
    }
}

// ---------------------------------------------------------------------------
// Effect of switching costs

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SEffect {
    Increasing,
    Decreasing,
    /// Mixed signs, or flat (all differences inside the tolerance band).
    NonMonotone { flat: bool, amplitude: f64 },
    /// Some point of the group did not solve, or fewer than two points.
    Incomplete,
}

impl SEffect {
    pub fn label(&self) -> &'static str {
        match self {
            SEffect::Increasing => "increasing",
            SEffect::Decreasing => "decreasing",
            SEffect::NonMonotone { flat: true, .. } => "flat",
            SEffect::NonMonotone { flat: false, .. } => "non_monotone",
            SEffect::Incomplete => "incomplete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseCombo {
    pub delta_c: f64,
    pub delta_f: f64,
    pub rho: f64,
    pub mu: f64,
    pub c: f64,
}

impl BaseCombo {
    fn of(r: &SweepRecord) -> Self {
        BaseCombo {
            delta_c: r.delta_c,
            delta_f: r.delta_f,
            rho: r.rho,
            mu: r.mu,
            c: r.c,
        }
    }

    fn key(&self) -> [u64; 5] {
        [self.delta_c, self.delta_f, self.rho, self.mu, self.c].map(f64::to_bits)
    }

    pub fn with_s(&self, s: f64) -> ModelParams {
        ModelParams::new(self.delta_c, self.delta_f, self.rho, self.mu, s).with_cost(self.c)
    }

    pub fn get(&self, param: SweepParam) -> Option<f64> {
        match param {
            SweepParam::DeltaC => Some(self.delta_c),
            SweepParam::DeltaF => Some(self.delta_f),
            SweepParam::Rho => Some(self.rho),
            SweepParam::Mu => Some(self.mu),
            SweepParam::S => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SClassification {
    pub combo: BaseCombo,
    pub effect: SEffect,
    /// `(s, markup)` in increasing `s`; unsolved points are omitted.
    pub markups: Vec<(f64, f64)>,
}

impl SClassification {
    /// Markup change from the lowest to the highest `s`.
    pub fn net_change(&self) -> Option<f64> {
        Some(self.markups.last()?.1 - self.markups.first()?.1)
    }
}

/// Classifies how the steady-state markup moves with `s` for each base
/// combination, in first-appearance order.
pub fn classify_effect_of_s(records: &[SweepRecord]) -> Vec<SClassification> {
    let mut order: Vec<BaseCombo> = Vec::new();
    let mut groups: BTreeMap<[u64; 5], Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        let combo = BaseCombo::of(r);
        let entry = groups.entry(combo.key()).or_default();
        if entry.is_empty() {
            order.push(combo);
        }
        entry.push(r);
    }
    order
        .into_iter()
        .map(|combo| {
            let mut rows = groups.remove(&combo.key()).unwrap_or_default();
            rows.sort_by(|a, b| a.s.total_cmp(&b.s));
            let complete = rows.len() >= 2 && rows.iter().all(|r| r.markup.is_some());
            let markups: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.markup.map(|m| (r.s, m))).collect();
            let effect = if complete {
                classify_sequence(&markups.iter().map(|x| x.1).collect::<Vec<_>>())
            } else {
                SEffect::Incomplete
            };
            SClassification { combo, effect, markups }
        })
        .collect()
}

fn classify_sequence(markups: &[f64]) -> SEffect {
    let diffs: Vec<f64> = markups.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().all(|&d| d > FLAT_TOL) {
        return SEffect::Increasing;
    }
    if diffs.iter().all(|&d| d < -FLAT_TOL) {
        return SEffect::Decreasing;
    }
    let hi = markups.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = markups.iter().copied().fold(f64::INFINITY, f64::min);
    let flat = diffs.iter().all(|d| d.abs() <= FLAT_TOL);
    SEffect::NonMonotone {
        flat,
        amplitude: if flat { 0.0 } else { hi - lo },
    }
}

/// Strongest witnesses of each strict sign: the increasing and decreasing
/// combos with the largest net markup change.
pub fn effect_witnesses(classes: &[SClassification]) -> (Option<&SClassification>, Option<&SClassification>) {
    let strongest = |want: SEffect| {
        classes
            .iter()
            .filter(|c| c.effect == want)
            .max_by(|a, b| {
                let (x, y) = (a.net_change().unwrap_or(0.0).abs(), b.net_change().unwrap_or(0.0).abs());
                x.total_cmp(&y)
            })
    };
    (strongest(SEffect::Increasing), strongest(SEffect::Decreasing))
}

// ---------------------------------------------------------------------------
// Directional tallies

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairViolation {
    pub low: ModelParams,
    pub high: ModelParams,
    pub markup_low: f64,
    pub markup_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTally {
    pub parameter: SweepParam,
    pub expected: Option<Direction>,
    pub increasing: usize,
    pub decreasing: usize,
    pub flat: usize,
    /// Adjacent pairs with an unsolved endpoint.
    pub skipped: usize,
    /// Share of comparable pairs consistent (weakly) with `expected`.
    pub share_expected: Option<f64>,
    pub passes: Option<bool>,
    /// Pairs moving against `expected`.
    pub violations: Vec<PairViolation>,
    /// Both strict directions occur.
    pub reversal_observed: bool,
}

impl ParamTally {
    pub fn comparable(&self) -> usize {
        self.increasing + self.decreasing + self.flat
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub tallies: Vec<ParamTally>,
}

impl MonotonicityReport {
    pub fn get(&self, p: SweepParam) -> Option<&ParamTally> {
        self.tallies.iter().find(|t| t.parameter == p)
    }

    /// Every parameter with an expected direction passes.
    pub fn passes(&self) -> bool {
        self.tallies.iter().all(|t| t.passes != Some(false))
    }
}

/// Directions the markup is expected to move in each parameter; `rho` is
/// descriptive only.
pub const EXPECTED_DIRECTIONS: [(SweepParam, Option<Direction>); 4] = [
    (SweepParam::Mu, Some(Direction::Decreasing)),
    (SweepParam::DeltaF, Some(Direction::Decreasing)),
    (SweepParam::DeltaC, Some(Direction::Increasing)),
    (SweepParam::Rho, None),
];

fn param_key(r: &SweepRecord, skip: SweepParam) -> [u64; 6] {
    let mut key = [r.delta_c, r.delta_f, r.rho, r.mu, r.s, r.c].map(f64::to_bits);
    let idx = SweepParam::ALL.iter().position(|p| *p == skip).unwrap();
    key[idx] = 0;
    key
}

pub fn monotonicity_report(records: &[SweepRecord]) -> MonotonicityReport {
    let tallies = EXPECTED_DIRECTIONS
        .iter()
        .map(|&(param, expected)| tally(records, param, expected))
        .collect();
    MonotonicityReport { tallies }
}

fn tally(records: &[SweepRecord], param: SweepParam, expected: Option<Direction>) -> ParamTally {
    let mut lines: BTreeMap<[u64; 6], Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        lines.entry(param_key(r, param)).or_default().push(r);
    }
    let mut t = ParamTally {
        parameter: param,
        expected,
        increasing: 0,
        decreasing: 0,
        flat: 0,
        skipped: 0,
        share_expected: None,
        passes: None,
        violations: Vec::new(),
        reversal_observed: false,
    };
    for line in lines.values_mut() {
        line.sort_by(|a, b| param.get(&a.params()).total_cmp(&param.get(&b.params())));
        for w in line.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (Some(a), Some(b)) = (lo.markup, hi.markup) else {
                t.skipped += 1;
                continue;
            };
            let diff = b - a;
            let dir = if diff > FLAT_TOL {
                t.increasing += 1;
                Some(Direction::Increasing)
            } else if diff < -FLAT_TOL {
                t.decreasing += 1;
                Some(Direction::Decreasing)
            } else {
                t.flat += 1;
                None
            };
            if let (Some(want), Some(got)) = (expected, dir) {
                if want != got {
                    t.violations.push(PairViolation {
                        low: lo.params(),
                        high: hi.params(),
                        markup_low: a,
                        markup_high: b,
                    });
                }
            }
        }
    }
    t.reversal_observed = t.increasing > 0 && t.decreasing > 0;
    if expected.is_some() && t.comparable() > 0 {
        let share = 1.0 - t.violations.len() as f64 / t.comparable() as f64;
        t.share_expected = Some(share);
        t.passes = Some(share >= DIRECTION_PASS_SHARE);
    }
    t
}

// ---------------------------------------------------------------------------
// Width of the regime where switching costs lower markups

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelShare {
    pub level: f64,
    pub decreasing: usize,
    pub classified: usize,
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeTrend {
    pub parameter: SweepParam,
    /// Direction in which the "decreasing in s" fraction should move as the
    /// parameter rises.
    pub expected: Direction,
    pub levels: Vec<LevelShare>,
    /// Fractions are weakly monotone in the expected direction across
    /// successive levels.
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeWidthReport {
    pub trends: Vec<RegimeTrend>,
}

impl RegimeWidthReport {
    pub fn passes(&self) -> bool {
        self.trends.iter().all(|t| t.passes)
    }

    pub fn get(&self, p: SweepParam) -> Option<&RegimeTrend> {
        self.trends.iter().find(|t| t.parameter == p)
    }
}

/// Expected movement of the share of "decreasing in s" combos.
pub const REGIME_TRENDS: [(SweepParam, Direction); 4] = [
    (SweepParam::DeltaC, Direction::Decreasing),
    (SweepParam::DeltaF, Direction::Increasing),
    (SweepParam::Mu, Direction::Increasing),
    (SweepParam::Rho, Direction::Increasing),
];

pub fn regime_width_report(classes: &[SClassification]) -> RegimeWidthReport {
    let trends = REGIME_TRENDS
        .iter()
        .map(|&(param, expected)| {
            let mut by_level: BTreeMap<u64, (f64, usize, usize)> = BTreeMap::new();
            for c in classes {
                if c.effect == SEffect::Incomplete {
                    continue;
                }
                let level = c.combo.get(param).unwrap();
                // Order-preserving key for finite floats in [0, 1].
                let e = by_level.entry(level.to_bits()).or_insert((level, 0, 0));
                e.2 += 1;
                if c.effect == SEffect::Decreasing {
                    e.1 += 1;
                }
            }
            let mut levels: Vec<LevelShare> = by_level
                .into_values()
                .map(|(level, decreasing, classified)| LevelShare {
                    level,
                    decreasing,
                    classified,
                    fraction: (classified > 0).then(|| decreasing as f64 / classified as f64),
                })
                .collect();
            levels.sort_by(|a, b| a.level.total_cmp(&b.level));
            let fractions: Vec<f64> = levels.iter().filter_map(|l| l.fraction).collect();
            let passes = fractions.windows(2).all(|w| match expected {
                Direction::Increasing => w[1] >= w[0],
                Direction::Decreasing => w[1] <= w[0],
            });
            RegimeTrend {
                parameter: param,
                expected,
                levels,
                passes,
            }
        })
        .collect();
    RegimeWidthReport { trends }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCounts {
    pub increasing: usize,
    pub decreasing: usize,
    pub flat: usize,
    pub non_monotone: usize,
    pub incomplete: usize,
}

/// Everything the sweep establishes about the effect of switching costs,
/// markup directions and regime widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub summary: SweepSummary,
    pub effects: EffectCounts,
    pub increasing_witness: Option<SClassification>,
    pub decreasing_witness: Option<SClassification>,
    pub monotonicity: MonotonicityReport,
    pub regime_width: RegimeWidthReport,
}

pub fn sweep_report(records: &[SweepRecord]) -> SweepReport {
    let classes = classify_effect_of_s(records);
    let mut effects = EffectCounts {
        increasing: 0,
        decreasing: 0,
        flat: 0,
        non_monotone: 0,
        incomplete: 0,
    };
    for c in &classes {
        match c.effect.label() {
            "increasing" => effects.increasing += 1,
            "decreasing" => effects.decreasing += 1,
            "flat" => effects.flat += 1,
            "non_monotone" => effects.non_monotone += 1,
            _ => effects.incomplete += 1,
        }
    }
    let (inc, dec) = effect_witnesses(&classes);
    SweepReport {
        summary: summarize(records),
        effects,
        increasing_witness: inc.cloned(),
        decreasing_witness: dec.cloned(),
        monotonicity: monotonicity_report(records),
        regime_width: regime_width_report(&classes),
    }
}

// ---------------------------------------------------------------------------
// Export and import

pub const CSV_COLUMNS: [&str; 17] = [
    "delta_c",
    "delta_f",
    "rho",
    "mu",
    "s",
    "c",
    "status",
    "candidate_count",
    "stable_count",
    "d",
    "e",
    "theta",
    "markup",
    "lock_in",
    "coverage",
    "young_rationality",
    "cutoffs_interior",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(ExportFormat::Csv),
            "json" => Some(ExportFormat::Json),
            _ => None,
        }
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_g17).unwrap_or_default()
}

fn opt_bool(x: Option<bool>) -> String {
    x.map(|b| b.to_string()).unwrap_or_default()
}

pub fn records_to_csv(records: &[SweepRecord]) -> Result<String, SweepError> {
    if records.is_empty() {
        return Err(SweepError::Empty);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_data = |e: csv::Error| DataError::Invalid(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(to_data)?;
    for r in records {
        w.write_record([
            fmt_g17(r.delta_c),
            fmt_g17(r.delta_f),
            fmt_g17(r.rho),
            fmt_g17(r.mu),
            fmt_g17(r.s),
            fmt_g17(r.c),
            r.status.as_str().to_string(),
            r.candidate_count.to_string(),
            r.stable_count.to_string(),
            opt_num(r.d),
            opt_num(r.e),
            opt_num(r.theta),
            opt_num(r.markup),
            opt_bool(r.lock_in),
            opt_bool(r.coverage),
            opt_bool(r.young_rationality),
            opt_bool(r.cutoffs_interior),
        ])
        .map_err(to_data)?;
    }
    let bytes = w.into_inner().map_err(|e| DataError::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn records_from_csv(text: &str, path: &Path) -> Result<Vec<SweepRecord>, SweepError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let row_err = |line: u64, message: String| DataError::Row {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = rd.headers().map_err(|e| row_err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(row_err(1, format!("expected columns {}", CSV_COLUMNS.join(","))).into());
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| row_err(line, e.to_string()))?;
        let num = |j: usize| parse_f64(&row[j]).map_err(|m| row_err(line, format!("{}: {m}", CSV_COLUMNS[j])));
        let opt = |j: usize| parse_opt_f64(&row[j]).map_err(|m| row_err(line, format!("{}: {m}", CSV_COLUMNS[j])));
        let count = |j: usize| {
            row[j]
                .parse::<usize>()
                .map_err(|e| row_err(line, format!("{}: {e}", CSV_COLUMNS[j])))
        };
        let flag = |j: usize| -> Result<Option<bool>, DataError> {
            match &row[j] {
                "" => Ok(None),
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                other => Err(row_err(line, format!("{}: not a boolean: {other}", CSV_COLUMNS[j]))),
            }
        };
        let status = SweepStatus::parse(&row[6]).ok_or_else(|| row_err(line, format!("unknown status {}", &row[6])))?;
        out.push(SweepRecord {
            delta_c: num(0)?,
            delta_f: num(1)?,
            rho: num(2)?,
            mu: num(3)?,
            s: num(4)?,
            c: num(5)?,
            status,
            candidate_count: count(7)?,
            stable_count: count(8)?,
            d: opt(9)?,
            e: opt(10)?,
            theta: opt(11)?,
            markup: opt(12)?,
            lock_in: flag(13)?,
            coverage: flag(14)?,
            young_rationality: flag(15)?,
            cutoffs_interior: flag(16)?,
        });
    }
    Ok(out)
}

/// Writes records as CSV or JSON. Nothing is written for an empty list.
pub fn export(records: &[SweepRecord], format: ExportFormat, path: &Path) -> Result<(), SweepError> {
    if records.is_empty() {
        return Err(SweepError::Empty);
    }
    match format {
        ExportFormat::Csv => write_string(path, &records_to_csv(records)?)?,
        ExportFormat::Json => write_json(path, &records)?,
    }
    Ok(())
}

pub fn import(format: ExportFormat, path: &Path) -> Result<Vec<SweepRecord>, SweepError> {
    match format {
        ExportFormat::Csv => records_from_csv(&read_string(path)?, path),
        ExportFormat::Json => Ok(read_json(path)?),
    }
}
