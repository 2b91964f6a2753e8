use serde::{Deserialize, Serialize};

use crate::design::Matrix;
use crate::error::{Result, SurvError};

/// Zero-mean / unit-variance column scaling. Columns without variance keep
/// scale 1 and are flagged constant; models pin their coefficients at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.n_rows().max(1) as f64;
        let mut means = vec![0.0; x.n_cols()];
        for r in 0..x.n_rows() {
            for (m, v) in means.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.n_cols()];
        for r in 0..x.n_rows() {
            for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let mut scales = Vec::with_capacity(var.len());
        let mut constant = Vec::with_capacity(var.len());
        for (s, m) in var.iter().zip(&means) {
            let sd = (s / n).sqrt();
            // relative cutoff so large-offset constant columns still count as constant
            let is_const = sd <= 1e-12 * m.abs().max(1.0);
            constant.push(is_const);
            scales.push(if is_const { 1.0 } else { sd });
        }
        Standardizer {
            means,
            scales,
            constant,
        }
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }

    #[inline]
    pub fn apply(&self, j: usize, v: f64) -> f64 {
        if self.constant[j] {
            0.0
        } else {
            (v - self.means[j]) / self.scales[j]
        }
    }

    /// Standardized columns, column-major.
    pub fn columns(&self, x: &Matrix) -> Vec<Vec<f64>> {
        (0..x.n_cols())
            .map(|j| (0..x.n_rows()).map(|r| self.apply(j, x.get(r, j))).collect())
            .collect()
    }

    pub fn linear_predictor(&self, beta: &[f64], row: &[f64]) -> Result<f64> {
        if row.len() != self.width() {
            return Err(SurvError::LengthMismatch {
                expected: self.width(),
                found: row.len(),
            });
        }
        Ok(beta
            .iter()
            .zip(row)
            .enumerate()
            .map(|(j, (b, v))| if *b == 0.0 { 0.0 } else { b * self.apply(j, *v) })
            .sum())
    }
}
