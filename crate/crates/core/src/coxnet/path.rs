use serde::{Deserialize, Serialize};

use super::cox::{select_features, CoxFit, PreparedCox, SolveOptions};
use crate::dataio::SurvivalRecord;
use crate::design::Matrix;
use crate::error::{Result, SurvError};
use crate::metrics::concordance_index;

pub const DEFAULT_PATH_LENGTH: usize = 50;
pub const DEFAULT_MIN_RATIO: f64 = 1e-3;

/// `count` log-spaced lambdas from the smallest all-zero lambda down to
/// `min_ratio` times it.
pub fn lambda_path(
    x: &Matrix,
    records: &[SurvivalRecord],
    count: usize,
    min_ratio: f64,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(SurvError::Empty("lambda path"));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(SurvError::invalid("lambda path ratio must lie in (0, 1)"));
    }
    let lmax = PreparedCox::new(x, records)?.lambda_max();
    if count == 1 {
        return Ok(vec![lmax]);
    }
    Ok((0..count)
        .map(|k| lmax * min_ratio.powf(k as f64 / (count - 1) as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub validation_c_index: f64,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaChoice {
    pub lambda: f64,
    pub path: Vec<PathPoint>,
    /// Fit on the training data at the chosen lambda.
    pub fit: CoxFit,
}

/// Fits every lambda on the training data (largest first, warm-started) and
/// keeps the one with the highest validation C-index. Ties go to the larger
/// lambda. A model with no nonzero coefficient scores 0.5.
pub fn choose_lambda(
    train_x: &Matrix,
    train: &[SurvivalRecord],
    val_x: &Matrix,
    validation: &[SurvivalRecord],
    path: &[f64],
    tolerance: f64,
) -> Result<LambdaChoice> {
    if path.is_empty() {
        return Err(SurvError::Empty("lambda path"));
    }
    if val_x.n_rows() != validation.len() {
        return Err(SurvError::RowMismatch {
            expected: validation.len(),
            found: val_x.n_rows(),
        });
    }
    let prepared = PreparedCox::new(train_x, train)?;
    let mut lambdas = path.to_vec();
    lambdas.sort_by(|a, b| b.total_cmp(a));

    let mut beta = vec![0.0; train_x.n_cols()];
    let mut points = Vec::with_capacity(lambdas.len());
    let mut best: Option<(f64, CoxFit)> = None;
    for &lambda in &lambdas {
        let fit = prepared.fit_from(lambda, &mut beta, SolveOptions::default())?;
        let selected = select_features(&fit.model, tolerance).len();
        let c = if selected == 0 {
            0.5
        } else {
            let risks = (0..val_x.n_rows())
                .map(|r| fit.model.predict_risk(val_x.row(r)))
                .collect::<Result<Vec<_>>>()?;
            match concordance_index(&risks, validation) {
                Ok(c) => c,
                Err(SurvError::NoComparablePairs) => 0.5,
                Err(e) => return Err(e),
            }
        };
        points.push(PathPoint {
            lambda,
            validation_c_index: c,
            selected,
        });
        // strict improvement only: lambdas descend, so ties keep the larger one
        if best.as_ref().is_none_or(|(bc, _)| c > *bc) {
            best = Some((c, fit));
        }
    }
    let (_, fit) = best.expect("nonempty path");
    Ok(LambdaChoice {
        lambda: fit.model.lambda,
        path: points,
        fit,
    })
}
