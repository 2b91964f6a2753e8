//! Synthetic cohorts with known ground truth: standard-normal covariates,
//! Weibull proportional-hazards event times, calibrated uniform censoring
//! and administrative censoring at the horizon.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::{FeatureTable, Side, SurvivalRecord};
use crate::error::{Result, SurvError};

/// Product term `coefficient * x[a] * x[b]` added to the log-hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub a: usize,
    pub b: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Number of knees (records).
    pub n: usize,
    pub p: usize,
    pub true_beta: Vec<f64>,
    pub weibull_shape: f64,
    pub weibull_scale: f64,
    /// Target overall censored fraction, administrative censoring included.
    pub censor_rate: f64,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub interaction: Option<Interaction>,
    /// Fraction of knees that share a subject with the other knee.
    #[serde(default)]
    pub bilateral_fraction: f64,
}

impl SynthSpec {
    /// `p` features of which the first `signals.len()` carry the given
    /// coefficients.
    pub fn sparse(n: usize, p: usize, signals: &[f64], seed: u64) -> Self {
        let mut true_beta = vec![0.0; p];
        for (b, s) in true_beta.iter_mut().zip(signals) {
            *b = *s;
        }
        SynthSpec {
            n,
            p,
            true_beta,
            weibull_shape: 1.5,
            weibull_scale: 8.0,
            censor_rate: 0.3,
            horizon: 9.0,
            seed,
            interaction: None,
            bilateral_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(SurvError::invalid("n and p must be positive"));
        }
        if self.true_beta.len() != self.p {
            return Err(SurvError::LengthMismatch {
                expected: self.p,
                found: self.true_beta.len(),
            });
        }
        if self.true_beta.iter().any(|b| !b.is_finite()) {
            return Err(SurvError::NonFinite("true_beta".into()));
        }
        if !(self.weibull_shape > 0.0 && self.weibull_scale > 0.0)
            || !self.weibull_shape.is_finite()
            || !self.weibull_scale.is_finite()
        {
            return Err(SurvError::invalid("Weibull shape and scale must be positive"));
        }
        if !(0.0..1.0).contains(&self.censor_rate) {
            return Err(SurvError::invalid("censor_rate must lie in [0, 1)"));
        }
        if !(self.horizon > 0.0) {
            return Err(SurvError::invalid("horizon must be positive"));
        }
        if !(0.0..=1.0).contains(&self.bilateral_fraction) {
            return Err(SurvError::invalid("bilateral_fraction must lie in [0, 1]"));
        }
        if let Some(i) = &self.interaction {
            if i.a >= self.p || i.b >= self.p || !i.coefficient.is_finite() {
                return Err(SurvError::invalid("interaction must name two valid features"));
            }
        }
        Ok(())
    }

    /// Log-hazard ratio of a covariate row.
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        let mut eta: f64 = row.iter().zip(&self.true_beta).map(|(x, b)| x * b).sum();
        if let Some(i) = &self.interaction {
            eta += i.coefficient * row[i.a] * row[i.b];
        }
        eta
    }
}

pub(crate) struct Latent {
    pub rows: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub event_times: Vec<f64>,
    /// Uniform(0, 1) draws, scaled by the calibrated window to give
    /// censoring times.
    pub censor_draws: Vec<f64>,
}

pub(crate) fn latent(spec: &SynthSpec) -> Result<Latent> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rows: Vec<Vec<f64>> = (0..spec.n)
        .map(|_| (0..spec.p).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let eta: Vec<f64> = rows.iter().map(|r| spec.linear_predictor(r)).collect();
    let event_times = eta
        .iter()
        .map(|e| {
            // 1 - U lies in (0, 1], so the log is finite
            let u: f64 = 1.0 - rng.random::<f64>();
            spec.weibull_scale * (-u.ln() / e.exp()).powf(1.0 / spec.weibull_shape)
        })
        .collect();
    let censor_draws = (0..spec.n).map(|_| rng.random::<f64>()).collect();
    Ok(Latent {
        rows,
        eta,
        event_times,
        censor_draws,
    })
}

fn censored_fraction(lat: &Latent, horizon: f64, window: f64) -> f64 {
    let censored = lat
        .event_times
        .iter()
        .zip(&lat.censor_draws)
        .filter(|(&t, &v)| t > (window * v).min(horizon))
        .count();
    censored as f64 / lat.event_times.len() as f64
}

/// Upper bound of the uniform censoring window that brings the overall
/// censored fraction closest to the target. Infinite when administrative
/// censoring alone reaches it.
fn calibrate_window(lat: &Latent, spec: &SynthSpec) -> f64 {
    if censored_fraction(lat, spec.horizon, f64::INFINITY) >= spec.censor_rate {
        return f64::INFINITY;
    }
    // window >= horizon / min draw censors nothing beyond the horizon
    let (mut lo, mut hi) = (0.0, spec.horizon);
    while censored_fraction(lat, spec.horizon, hi) > spec.censor_rate && hi < 1e12 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if censored_fraction(lat, spec.horizon, mid) > spec.censor_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Draws a cohort. Returns the covariates, one record per knee, and the
/// true log-hazard ratio of each knee.
pub fn generate(spec: &SynthSpec) -> Result<(FeatureTable, Vec<SurvivalRecord>, Vec<f64>)> {
    let lat = latent(spec)?;
    let window = calibrate_window(&lat, spec);
    let bilateral_pairs = (spec.bilateral_fraction * spec.n as f64 / 2.0).floor() as usize;
    let width = spec.n.to_string().len();
    let records = (0..spec.n)
        .map(|i| {
            let (subject, side) = if i < 2 * bilateral_pairs {
                (i / 2, if i % 2 == 0 { Side::Left } else { Side::Right })
            } else {
                (i - bilateral_pairs, Side::Right)
            };
            let t = lat.event_times[i];
            let c = (window * lat.censor_draws[i]).min(spec.horizon);
            SurvivalRecord::new(format!("s{subject:0width$}"), side, t.min(c), t <= c)
        })
        .collect();
    let names = (1..=spec.p).map(|j| format!("x{j}")).collect();
    let table = FeatureTable::from_numeric(names, &lat.rows)?;
    Ok((table, records, lat.eta))
}

/// `exp(-(t / scale)^shape * exp(eta(row)))`.
pub fn true_survival(spec: &SynthSpec, row: &[f64], t: f64) -> Result<f64> {
    if row.len() != spec.p {
        return Err(SurvError::LengthMismatch {
            expected: spec.p,
            found: row.len(),
        });
    }
    if !(t >= 0.0) {
        return Err(SurvError::invalid("time must be nonnegative"));
    }
    Ok((-(t / spec.weibull_scale).powf(spec.weibull_shape) * spec.linear_predictor(row).exp()).exp())
}
