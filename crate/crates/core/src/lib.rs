//! Time-to-event modelling for right-censored knee outcomes.
//!
//! The crate covers the whole tabular pipeline: CSV ingestion with
//! imputation and subject-level splits ([`dataio`]), survival curve
//! estimators and the threshold readout ([`survcore`]), lasso-penalised Cox
//! selection and a discrete-time logistic baseline ([`coxnet`]), random
//! survival forests ([`rsf`]), label-distribution and self-supervised loss
//! math ([`losses`]), censoring-aware evaluation ([`metrics`]), a synthetic
//! Weibull data generator ([`synth`]) and the batch commands tying them
//! together ([`pipeline`]).

pub mod coxnet;
pub mod dataio;
pub mod design;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod pipeline;
pub mod rsf;
pub mod survcore;
pub mod synth;

pub use error::{Result, SurvError};
