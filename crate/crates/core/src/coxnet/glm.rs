use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use crate::dataio::SurvivalRecord;
use crate::design::Matrix;
use crate::error::{Result, SurvError};
use crate::survcore::SurvivalCurve;

const MAX_NEWTON_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalFlagReason {
    /// Nobody at risk; hazard fixed at 0.
    NoAtRisk,
    /// No events; the MLE hazard is 0.
    NoEvents,
    /// Every row at risk has the event; the MLE hazard is 1.
    AllEvents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalFlag {
    /// 0-based interval index: interval k spans `(grid[k], grid[k+1]]`.
    pub interval: usize,
    pub reason: IntervalFlagReason,
    pub at_risk: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFitReport {
    pub iterations: usize,
    pub converged: bool,
    pub deviance: f64,
    pub person_periods: usize,
    pub flagged_intervals: Vec<IntervalFlag>,
}

/// Discrete-time logistic hazard model: one intercept per grid interval
/// plus shared covariate effects on the standardized scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub feature_names: Vec<String>,
    pub grid: Vec<f64>,
    /// `-inf` / `+inf` for intervals whose hazard is pinned at 0 / 1.
    #[serde(with = "extended_reals")]
    pub interval_intercepts: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub standardizer: Standardizer,
    pub report: GlmFitReport,
}

fn logistic(z: f64) -> f64 {
    if z == f64::INFINITY {
        1.0
    } else if z == f64::NEG_INFINITY {
        0.0
    } else if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct PersonPeriod {
    interval: usize,
    row: usize,
    label: f64,
}

/// One row per record per interval at risk. Interval k covers
/// `(grid[k], grid[k+1]]`, with the first interval closed at `grid[0]`.
/// The label marks an event inside the interval; a record censored inside
/// an interval still counts as at risk there.
fn expand(records: &[SurvivalRecord], grid: &[f64]) -> Vec<PersonPeriod> {
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        for k in 0..grid.len() - 1 {
            if k > 0 && r.time <= grid[k] {
                break;
            }
            let inside = r.time <= grid[k + 1];
            out.push(PersonPeriod {
                interval: k,
                row: i,
                label: f64::from(r.event && inside),
            });
            if inside {
                break;
            }
        }
    }
    out
}

impl GlmModel {
    pub fn n_intervals(&self) -> usize {
        self.interval_intercepts.len()
    }

    pub fn linear_predictor(&self, row: &[f64]) -> Result<f64> {
        self.standardizer.linear_predictor(&self.coefficients, row)
    }

    /// Risk score for ranking: the covariate part of the logit hazard.
    pub fn predict_risk(&self, row: &[f64]) -> Result<f64> {
        self.linear_predictor(row)
    }

    /// Per-interval hazards for `row`.
    pub fn hazards(&self, row: &[f64]) -> Result<Vec<f64>> {
        let eta = self.linear_predictor(row)?;
        Ok(self
            .interval_intercepts
            .iter()
            .map(|&a| logistic(a + eta))
            .collect())
    }

    /// `S(grid[0]) = 1`, `S(grid[k]) = prod_{j<k} (1 - h_j)`.
    pub fn predict_survival(&self, row: &[f64]) -> Result<SurvivalCurve> {
        let mut s = 1.0;
        let mut values = vec![1.0];
        for h in self.hazards(row)? {
            s *= 1.0 - h;
            values.push(s.clamp(0.0, 1.0));
        }
        SurvivalCurve::new(self.grid.clone(), values)
    }
}

/// Fits the discrete-time hazard model by damped Newton iterations on the
/// person-period expansion.
pub fn fit_discrete_glm(x: &Matrix, records: &[SurvivalRecord], grid: &[f64]) -> Result<GlmModel> {
    if x.n_rows() != records.len() {
        return Err(SurvError::RowMismatch {
            expected: records.len(),
            found: x.n_rows(),
        });
    }
    if records.is_empty() {
        return Err(SurvError::Empty("records"));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SurvError::invalid(
            "grid needs at least two strictly increasing times",
        ));
    }
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if let Some(r) = records.iter().find(|r| r.time < lo || r.time > hi) {
        return Err(SurvError::invalid(format!(
            "record {} at time {} lies outside the grid [{lo}, {hi}]",
            r.key(),
            r.time
        )));
    }

    let n_intervals = grid.len() - 1;
    let standardizer = Standardizer::fit(x);
    let cols = standardizer.columns(x);
    let free: Vec<usize> = (0..x.n_cols()).filter(|&j| !standardizer.constant[j]).collect();
    let periods = expand(records, grid);

    let mut at_risk = vec![0usize; n_intervals];
    let mut events = vec![0usize; n_intervals];
    for pp in &periods {
        at_risk[pp.interval] += 1;
        events[pp.interval] += pp.label as usize;
    }
    let mut intercepts = vec![0.0; n_intervals];
    let mut flagged = Vec::new();
    // parameter slot for each estimable interval
    let mut slot = vec![None; n_intervals];
    let mut n_alpha = 0;
    for k in 0..n_intervals {
        let reason = if at_risk[k] == 0 {
            Some(IntervalFlagReason::NoAtRisk)
        } else if events[k] == 0 {
            Some(IntervalFlagReason::NoEvents)
        } else if events[k] == at_risk[k] {
            Some(IntervalFlagReason::AllEvents)
        } else {
            None
        };
        match reason {
            Some(reason) => {
                intercepts[k] = if reason == IntervalFlagReason::AllEvents {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                };
                flagged.push(IntervalFlag {
                    interval: k,
                    reason,
                    at_risk: at_risk[k],
                    events: events[k],
                });
            }
            None => {
                slot[k] = Some(n_alpha);
                n_alpha += 1;
                let rate = events[k] as f64 / at_risk[k] as f64;
                intercepts[k] = (rate / (1.0 - rate)).ln();
            }
        }
    }
    let active: Vec<&PersonPeriod> = periods.iter().filter(|pp| slot[pp.interval].is_some()).collect();
    let dim = n_alpha + free.len();

    let mut theta = DVector::zeros(dim);
    for k in 0..n_intervals {
        if let Some(s) = slot[k] {
            theta[s] = intercepts[k];
        }
    }
    let linear = |theta: &DVector<f64>, pp: &PersonPeriod| -> f64 {
        let mut z = theta[slot[pp.interval].unwrap()];
        for (m, &j) in free.iter().enumerate() {
            z += theta[n_alpha + m] * cols[j][pp.row];
        }
        z
    };
    let deviance = |theta: &DVector<f64>| -> f64 {
        2.0 * active
            .iter()
            .map(|pp| {
                let z = linear(theta, pp);
                softplus(z) - pp.label * z
            })
            .sum::<f64>()
    };

    let mut dev = deviance(&theta);
    let mut iterations = 0;
    let mut converged = dim == 0;
    while !converged && iterations < MAX_NEWTON_ITERATIONS {
        iterations += 1;
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        let mut feats = vec![0.0; free.len()];
        for pp in &active {
            let a = slot[pp.interval].unwrap();
            for (f, &j) in feats.iter_mut().zip(&free) {
                *f = cols[j][pp.row];
            }
            let mu = logistic(linear(&theta, pp));
            let r = mu - pp.label;
            let w = mu * (1.0 - mu);
            grad[a] += r;
            hess[(a, a)] += w;
            for (m, &fm) in feats.iter().enumerate() {
                let im = n_alpha + m;
                grad[im] += r * fm;
                hess[(a, im)] += w * fm;
                for (l, &fl) in feats.iter().enumerate().skip(m) {
                    hess[(im, n_alpha + l)] += w * fm * fl;
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                hess[(i, j)] = hess[(j, i)];
            }
        }
        let step = solve_spd(hess, &grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &theta - &step * t;
            let d = deviance(&candidate);
            if d <= dev {
                let moved = (&candidate - &theta).amax();
                let improvement = dev - d;
                theta = candidate;
                dev = d;
                accepted = true;
                if moved < 1e-10 || improvement <= 1e-12 * (1.0 + dev.abs()) {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no descent left along the Newton direction
            converged = grad.amax() < 1e-6;
            break;
        }
    }

    for k in 0..n_intervals {
        if let Some(s) = slot[k] {
            intercepts[k] = theta[s];
        }
    }
    let mut coefficients = vec![0.0; x.n_cols()];
    for (m, &j) in free.iter().enumerate() {
        coefficients[j] = theta[n_alpha + m];
    }
    if coefficients.iter().any(|b| !b.is_finite()) {
        return Err(SurvError::NonFinite("glm coefficients".into()));
    }
    Ok(GlmModel {
        feature_names: x.names().to_vec(),
        grid: grid.to_vec(),
        interval_intercepts: intercepts,
        coefficients,
        standardizer,
        report: GlmFitReport {
            iterations,
            converged,
            deviance: dev,
            person_periods: periods.len(),
            flagged_intervals: flagged,
        },
    })
}

fn solve_spd(hess: DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = hess.clone().cholesky() {
        return ch.solve(rhs);
    }
    let dim = hess.nrows();
    let scale = (hess.trace() / dim.max(1) as f64).max(1e-12);
    let mut ridge = 1e-10 * scale;
    for _ in 0..12 {
        let h = &hess + DMatrix::identity(dim, dim) * ridge;
        if let Some(ch) = h.cholesky() {
            return ch.solve(rhs);
        }
        ridge *= 100.0;
    }
    DVector::zeros(dim)
}

/// JSON has no infinities; store them as the strings "inf" / "-inf".
mod extended_reals {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&x| {
                if x == f64::INFINITY {
                    Repr::Text("inf".into())
                } else if x == f64::NEG_INFINITY {
                    Repr::Text("-inf".into())
                } else {
                    Repr::Num(x)
                }
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Num(x) => Ok(x),
                Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
                Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
                Repr::Text(t) => Err(serde::de::Error::custom(format!("bad real `{t}`"))),
            })
            .collect()
    }
}
