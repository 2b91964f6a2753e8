//! Model evaluation: concordance, censoring-weighted AUC and Brier scores,
//! ±1-year accuracy with its confusion matrix, and the paired signed-rank
//! test for comparing two models.

mod accuracy;
mod concordance;
mod ipcw;
mod wilcoxon;

pub use accuracy::{accuracy_pm1, year_class, AccuracyResult, ConfusionMatrix};
pub use concordance::{concordance_counts, concordance_index, ConcordanceCounts};
pub use ipcw::{brier_score, cumulative_dynamic_auc, integrated_brier, normalized_trapezoid, AucResult};
pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_with, WilcoxonMethod, WilcoxonResult, EXACT_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::dataio::SurvivalRecord;
use crate::error::{Result, SurvError};
use crate::survcore::{SurvivalCurve, TimePrediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_records: usize,
    pub n_events: usize,
    pub accuracy: f64,
    pub correct: u64,
    pub c_index: f64,
    pub mean_auc: f64,
    pub per_time_auc: Vec<(f64, f64)>,
    pub auc_skipped_times: Vec<f64>,
    pub ibs: f64,
    pub confusion: ConfusionMatrix,
}

impl EvaluationReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("records      {}\n", self.n_records));
        s.push_str(&format!("events       {}\n", self.n_events));
        s.push_str(&format!(
            "accuracy     {:.1}%  ({}/{})\n",
            100.0 * self.accuracy,
            self.correct,
            self.n_records
        ));
        s.push_str(&format!("c-index      {:.1}%\n", 100.0 * self.c_index));
        s.push_str(&format!("mean AUC     {:.1}%\n", 100.0 * self.mean_auc));
        s.push_str(&format!("IBS          {:.3}\n", self.ibs));
        s.push_str("AUC by year\n");
        for (t, a) in &self.per_time_auc {
            s.push_str(&format!("  {t:>4}  {:.3}\n", a));
        }
        if !self.auc_skipped_times.is_empty() {
            let skipped: Vec<String> = self.auc_skipped_times.iter().map(f64::to_string).collect();
            s.push_str(&format!("  undefined at: {}\n", skipped.join(", ")));
        }
        s
    }
}

/// Computes every metric for one model on one set of records. `risks`
/// rank records for the C-index; `curves` feed AUC and IBS on their grid;
/// `predictions` feed the accuracy and confusion matrix.
pub fn evaluate(
    curves: &[SurvivalCurve],
    risks: &[f64],
    predictions: &[TimePrediction],
    records: &[SurvivalRecord],
    horizon_years: usize,
) -> Result<EvaluationReport> {
    if curves.len() != records.len() || predictions.len() != records.len() {
        return Err(SurvError::LengthMismatch {
            expected: records.len(),
            found: curves.len().min(predictions.len()),
        });
    }
    let Some(first) = curves.first() else {
        return Err(SurvError::Empty("records"));
    };
    let grid = first.grid().to_vec();
    if curves.iter().any(|c| c.grid() != grid.as_slice()) {
        return Err(SurvError::invalid("all survival curves must share one grid"));
    }
    let acc = accuracy_pm1(predictions, records, horizon_years)?;
    let c_index = concordance_index(risks, records)?;
    let auc_times: Vec<f64> = grid.iter().copied().filter(|&t| t >= 1.0).collect();
    let auc = cumulative_dynamic_auc(curves, records, &auc_times)?;
    let ibs = integrated_brier(curves, records, &grid)?;
    Ok(EvaluationReport {
        n_records: records.len(),
        n_events: records.iter().filter(|r| r.event).count(),
        accuracy: acc.accuracy,
        correct: acc.correct,
        c_index,
        mean_auc: auc.mean,
        per_time_auc: auc.per_time,
        auc_skipped_times: auc.skipped_times,
        ibs,
        confusion: acc.confusion,
    })
}
