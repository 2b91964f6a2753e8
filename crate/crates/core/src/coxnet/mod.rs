//! Lasso-penalized Cox regression for feature selection, and the
//! discrete-time logistic hazard model used as a comparison baseline.

mod cox;
mod glm;
mod path;
mod standardize;

pub use cox::{
    cox_neg_log_partial_likelihood, fit_lasso_cox, predict_risk, select_features, CoxFit,
    CoxModel, SolveReport, DEFAULT_MAX_SWEEPS, DEFAULT_TOLERANCE,
};
pub use glm::{fit_discrete_glm, GlmFitReport, GlmModel, IntervalFlag, IntervalFlagReason};
pub use path::{
    choose_lambda, lambda_path, LambdaChoice, PathPoint, DEFAULT_MIN_RATIO, DEFAULT_PATH_LENGTH,
};
pub use standardize::Standardizer;

/// Default `|beta|` cutoff for counting a coefficient as selected.
pub const DEFAULT_SELECTION_TOLERANCE: f64 = 1e-8;
