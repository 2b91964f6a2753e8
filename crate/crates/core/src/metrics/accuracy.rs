use serde::{Deserialize, Serialize};

use crate::dataio::SurvivalRecord;
use crate::error::{Result, SurvError};
use crate::survcore::TimePrediction;

/// Counts of `(true year, predicted class)` for event records. Classes are
/// the years `0..=horizon` followed by one `beyond_horizon` class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    /// `counts[true_class][predicted_class]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    fn new(horizon_years: usize) -> Self {
        let mut labels: Vec<String> = (0..=horizon_years).map(|y| y.to_string()).collect();
        labels.push("beyond_horizon".into());
        let k = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Rows are true years, columns predictions; first column is the label.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for l in &self.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            s.push_str(l);
            for c in row {
                s.push_str(&format!(",{c}"));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub accuracy: f64,
    pub correct: u64,
    pub total: u64,
    pub confusion: ConfusionMatrix,
}

/// Year class of a time: rounded to the nearest year, clamped to the grid.
pub fn year_class(time: f64, horizon_years: usize) -> usize {
    (time.round().max(0.0) as usize).min(horizon_years)
}

/// ±1-year accuracy. An event record is correct when a year is predicted
/// within one year of its rounded event year. A censored record is correct
/// when the prediction is beyond the horizon or later than its censoring
/// time.
pub fn accuracy_pm1(
    predictions: &[TimePrediction],
    records: &[SurvivalRecord],
    horizon_years: usize,
) -> Result<AccuracyResult> {
    if predictions.len() != records.len() {
        return Err(SurvError::LengthMismatch {
            expected: records.len(),
            found: predictions.len(),
        });
    }
    let mut confusion = ConfusionMatrix::new(horizon_years);
    let beyond = horizon_years + 1;
    let mut correct = 0u64;
    for (p, r) in predictions.iter().zip(records) {
        let ok = if r.event {
            let y = year_class(r.time, horizon_years);
            let col = match p {
                TimePrediction::Year(v) => year_class(*v, horizon_years),
                TimePrediction::BeyondHorizon => beyond,
            };
            confusion.counts[y][col] += 1;
            matches!(p, TimePrediction::Year(v) if (y as f64 - v).abs() <= 1.0)
        } else {
            match p {
                TimePrediction::BeyondHorizon => true,
                TimePrediction::Year(v) => *v > r.time,
            }
        };
        correct += u64::from(ok);
    }
    let total = records.len() as u64;
    Ok(AccuracyResult {
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        correct,
        total,
        confusion,
    })
}
