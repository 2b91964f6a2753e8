//! Nonparametric survival estimators, survival/hazard curves on a time
//! grid, and the threshold readout that turns a curve into a predicted year.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::SurvivalRecord;
use crate::error::{Result, SurvError};

/// Survival probability at which the predicted year is read off a curve.
pub const DEFAULT_THRESHOLD: f64 = 0.4;

/// `0, 1, ..., floor(horizon)`.
pub fn yearly_grid(horizon: f64) -> Vec<f64> {
    (0..=horizon.floor() as usize).map(|y| y as f64).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(SurvError::Empty("time grid"));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(SurvError::NonFinite("time grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SurvError::invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

/// Index of the last grid point `<= t`, if any.
fn grid_index(grid: &[f64], t: f64) -> Option<usize> {
    grid.partition_point(|&g| g <= t).checked_sub(1)
}

/// Right-continuous survival step function sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl SurvivalCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(SurvError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(SurvError::invalid("survival values must lie in [0, 1]"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(SurvError::invalid("survival values must be nonincreasing"));
        }
        Ok(SurvivalCurve { grid, values })
    }

    pub fn constant_one(grid: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![1.0; n])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// S(t) as a step function: value at the last grid point `<= t`, and 1
    /// before the grid starts.
    pub fn at(&self, t: f64) -> f64 {
        grid_index(&self.grid, t).map_or(1.0, |i| self.values[i])
    }

    pub fn to_csv(&self) -> String {
        curve_csv(&self.grid, &self.values)
    }
}

/// Cumulative hazard step function sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl HazardCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(SurvError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SurvError::invalid("cumulative hazard must be finite and nonnegative"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(SurvError::invalid("cumulative hazard must be nondecreasing"));
        }
        Ok(HazardCurve { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// H(t); zero before the first grid time.
    pub fn at(&self, t: f64) -> f64 {
        grid_index(&self.grid, t).map_or(0.0, |i| self.values[i])
    }

    pub fn to_csv(&self) -> String {
        curve_csv(&self.grid, &self.values)
    }
}

fn curve_csv(grid: &[f64], values: &[f64]) -> String {
    let mut s = String::from("time,value\n");
    for (t, v) in grid.iter().zip(values) {
        s.push_str(&format!("{t},{v}\n"));
    }
    s
}

/// Distinct event times with their event counts and at-risk sizes, in
/// increasing time order. Records with time >= t count as at risk at t.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    pub times: Vec<f64>,
    pub events: Vec<f64>,
    pub at_risk: Vec<f64>,
}

impl RiskTable {
    pub fn from_pairs(mut pairs: Vec<(f64, bool)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut table = RiskTable {
            times: Vec::new(),
            events: Vec::new(),
            at_risk: Vec::new(),
        };
        let n = pairs.len();
        let mut i = 0;
        while i < n {
            let t = pairs[i].0;
            let mut j = i;
            let mut d = 0usize;
            while j < n && pairs[j].0 == t {
                d += usize::from(pairs[j].1);
                j += 1;
            }
            if d > 0 {
                table.times.push(t);
                table.events.push(d as f64);
                table.at_risk.push((n - i) as f64);
            }
            i = j;
        }
        table
    }

    pub fn from_records(records: &[SurvivalRecord]) -> Self {
        Self::from_pairs(records.iter().map(|r| (r.time, r.event)).collect())
    }
}

/// Product-limit estimator kept as a full step function over its event
/// times, for evaluation at arbitrary times.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLimit {
    times: Vec<f64>,
    survival: Vec<f64>,
}

impl ProductLimit {
    pub fn fit(pairs: Vec<(f64, bool)>) -> Self {
        let table = RiskTable::from_pairs(pairs);
        let mut s = 1.0;
        let survival = table
            .events
            .iter()
            .zip(&table.at_risk)
            .map(|(d, n)| {
                s *= 1.0 - d / n;
                s
            })
            .collect();
        ProductLimit {
            times: table.times,
            survival,
        }
    }

    /// Kaplan–Meier estimate of the censoring distribution G: censorings
    /// are treated as the events.
    pub fn censoring(records: &[SurvivalRecord]) -> Self {
        Self::fit(records.iter().map(|r| (r.time, !r.event)).collect())
    }

    /// S(t), right-continuous.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&u| u <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// S(t-), the limit from the left.
    pub fn before(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&u| u < t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }
}

pub fn kaplan_meier(records: &[SurvivalRecord], grid: &[f64]) -> Result<SurvivalCurve> {
    if records.is_empty() {
        return Err(SurvError::Empty("records"));
    }
    check_grid(grid)?;
    let km = ProductLimit::fit(records.iter().map(|r| (r.time, r.event)).collect());
    let values = grid.iter().map(|&t| km.at(t)).collect();
    SurvivalCurve::new(grid.to_vec(), values)
}

/// Nelson–Aalen values on `grid` for an arbitrary multiset of
/// `(time, event)` pairs.
pub(crate) fn nelson_aalen_on_grid(pairs: Vec<(f64, bool)>, grid: &[f64]) -> Vec<f64> {
    let table = RiskTable::from_pairs(pairs);
    let mut out = Vec::with_capacity(grid.len());
    let mut h = 0.0;
    let mut k = 0;
    for &g in grid {
        while k < table.times.len() && table.times[k] <= g {
            h += table.events[k] / table.at_risk[k];
            k += 1;
        }
        out.push(h);
    }
    out
}

pub fn nelson_aalen(records: &[SurvivalRecord], grid: &[f64]) -> Result<HazardCurve> {
    if records.is_empty() {
        return Err(SurvError::Empty("records"));
    }
    check_grid(grid)?;
    let values = nelson_aalen_on_grid(records.iter().map(|r| (r.time, r.event)).collect(), grid);
    HazardCurve::new(grid.to_vec(), values)
}

pub fn survival_from_chf(h: &HazardCurve) -> SurvivalCurve {
    SurvivalCurve {
        grid: h.grid.clone(),
        values: h.values.iter().map(|v| (-v).exp()).collect(),
    }
}

/// Predicted event year, or no predicted event within the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimePrediction {
    Year(f64),
    BeyondHorizon,
}

impl TimePrediction {
    pub fn year(self) -> Option<f64> {
        match self {
            TimePrediction::Year(y) => Some(y),
            TimePrediction::BeyondHorizon => None,
        }
    }
}

impl PartialOrd for TimePrediction {
    /// Years compare numerically; `BeyondHorizon` sorts after every year.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use TimePrediction::*;
        match (self, other) {
            (Year(a), Year(b)) => a.partial_cmp(b),
            (Year(_), BeyondHorizon) => Some(Ordering::Less),
            (BeyondHorizon, Year(_)) => Some(Ordering::Greater),
            (BeyondHorizon, BeyondHorizon) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for TimePrediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimePrediction::Year(y) => write!(f, "{y}"),
            TimePrediction::BeyondHorizon => f.write_str("beyond_horizon"),
        }
    }
}

impl FromStr for TimePrediction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s == "beyond_horizon" {
            return Ok(TimePrediction::BeyondHorizon);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(TimePrediction::Year)
            .ok_or_else(|| format!("`{s}` is neither a year nor beyond_horizon"))
    }
}

/// Threshold readout: the latest grid year at which S is still strictly
/// above `threshold`, once S has fallen to or below it. A curve that never
/// falls to the threshold yields `BeyondHorizon`; a curve already at or
/// below it at the grid origin yields the origin.
pub fn time_to_event_from_curve(s: &SurvivalCurve, threshold: f64) -> TimePrediction {
    match s.values.iter().position(|&v| v <= threshold) {
        None => TimePrediction::BeyondHorizon,
        Some(0) => TimePrediction::Year(s.grid[0]),
        Some(k) => TimePrediction::Year(s.grid[k - 1]),
    }
}
