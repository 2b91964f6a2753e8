//! The batch pipeline behind the command-line tool: simulate, prepare,
//! fit, predict and evaluate. Each command reads and writes files under
//! the configured output directory and records the master seed in every
//! file it writes.

mod config;
mod predictions;

pub use config::{ModelKind, PipelineConfig, SimSettings};
pub use predictions::{
    align_predictions, oracle_predictions, prediction_row, read_predictions, read_predictions_from,
    write_predictions, write_predictions_to, PredictionRow,
};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coxnet::{
    choose_lambda, fit_discrete_glm, fit_lasso_cox, lambda_path, select_features, CoxModel, GlmModel,
    PathPoint,
};
use crate::dataio::{
    impute, load_dataset, partition_rows, split_subject_level, validate_records, write_dataset,
    FeatureTable, Partition, Schema, SurvivalRecord,
};
use crate::design::{DesignEncoder, Matrix};
use crate::error::{Result, SurvError};
use crate::metrics::{evaluate, wilcoxon_signed_rank, year_class, EvaluationReport, WilcoxonResult};
use crate::rsf::{fit_rsf, fit_rsf_with_threads, RsfModel};
use crate::survcore::{yearly_grid, TimePrediction};
use crate::synth::{generate, true_survival};

pub const MODEL_FORMAT_VERSION: u32 = 1;

fn header(cfg: &PipelineConfig, command: &str) -> String {
    format!("survkit {command} seed={}", cfg.seed)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| SurvError::io(path, e))
}

fn create_out(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| SurvError::io(&cfg.out, e))
}

/// Reads only the records of a dataset file, whatever its covariates.
fn load_records(path: &Path) -> Result<Vec<SurvivalRecord>> {
    let schema = Schema::parse("* = categorical")?;
    Ok(load_dataset(path, &schema)?.1)
}

fn load_prepared(cfg: &PipelineConfig, partition: Partition) -> Result<(FeatureTable, Vec<SurvivalRecord>)> {
    let schema = Schema::read(cfg.prepared_schema_path())?;
    load_dataset(cfg.out_path(&format!("{}.csv", partition.name())), &schema)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub knees: usize,
    pub subjects: usize,
    pub events: usize,
    pub censored_fraction: f64,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "simulated {} knees from {} subjects: {} events, {:.1}% censored",
            self.knees,
            self.subjects,
            self.events,
            100.0 * self.censored_fraction
        )?;
        for p in &self.files {
            writeln!(f, "wrote {}", p.display())?;
        }
        Ok(())
    }
}

/// Writes `dataset.csv`, `dataset_schema.txt` and `truth.csv` (true
/// log-hazard ratio and survival at each year).
pub fn cmd_simulate(cfg: &PipelineConfig) -> Result<SimulateSummary> {
    cfg.validate()?;
    let spec = cfg.synth_spec();
    let (table, records, eta) = generate(&spec)?;
    create_out(cfg)?;
    let hdr = header(cfg, "simulate");

    let dataset = cfg.out_path("dataset.csv");
    write_dataset(&dataset, &table, &records, Some(&hdr))?;
    let schema = cfg.out_path("dataset_schema.txt");
    write_text(&schema, &format!("# {hdr}\n{}", Schema::from_table(&table).to_text()))?;

    let years = cfg.horizon_years();
    let mut truth = format!("# {hdr}\nsubject_id,side,true_risk");
    for y in 1..=years {
        truth.push_str(&format!(",S_{y}"));
    }
    truth.push('\n');
    for (i, r) in records.iter().enumerate() {
        let row: Vec<f64> = (0..table.n_cols())
            .map(|j| table.get(i, j).and_then(|c| c.as_num()).unwrap_or(0.0))
            .collect();
        truth.push_str(&format!("{},{},{}", r.subject_id, r.side, eta[i]));
        for y in 1..=years {
            truth.push_str(&format!(",{}", true_survival(&spec, &row, y as f64)?));
        }
        truth.push('\n');
    }
    let truth_path = cfg.out_path("truth.csv");
    write_text(&truth_path, &truth)?;

    let events = records.iter().filter(|r| r.event).count();
    let mut subjects: Vec<&str> = records.iter().map(|r| r.subject_id.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    Ok(SimulateSummary {
        knees: records.len(),
        subjects: subjects.len(),
        events,
        censored_fraction: 1.0 - events as f64 / records.len() as f64,
        files: vec![dataset, schema, truth_path],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrepareSummary {
    /// `(partition, subjects, knees)`.
    pub partitions: Vec<(Partition, usize, usize)>,
    pub imputed_cells: usize,
}

impl fmt::Display for PrepareSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "imputed {} missing cells", self.imputed_cells)?;
        for (p, subjects, knees) in &self.partitions {
            writeln!(f, "{:<10} {subjects} subjects, {knees} knees", p.name())?;
        }
        Ok(())
    }
}

/// Loads, validates and imputes the dataset, splits subjects, and writes
/// `imputed.csv`, `split.csv`, one file per partition and `schema.txt`.
pub fn cmd_prepare(cfg: &PipelineConfig) -> Result<PrepareSummary> {
    cfg.validate()?;
    let dataset = cfg.dataset.clone().unwrap_or_else(|| cfg.out_path("dataset.csv"));
    let schema = match &cfg.schema {
        Some(p) => Schema::read(p)?,
        None => {
            let default = cfg.out_path("dataset_schema.txt");
            if default.exists() {
                Schema::read(default)?
            } else {
                Schema::all_quantitative()
            }
        }
    };
    let (table, records) = load_dataset(&dataset, &schema)?;
    validate_records(&records, cfg.horizon)?;
    let imputed = impute(&table)?;
    let split = split_subject_level(&records, cfg.fractions, cfg.seed)?;
    let rows = partition_rows(&records, &split)?;

    create_out(cfg)?;
    let hdr = header(cfg, "prepare");
    write_dataset(cfg.out_path("imputed.csv"), &imputed, &records, Some(&hdr))?;
    split.write_csv(cfg.out_path("split.csv"), Some(&hdr))?;
    write_text(
        &cfg.prepared_schema_path(),
        &format!("# {hdr}\n{}", Schema::from_table(&imputed).to_text()),
    )?;
    let mut partitions = Vec::new();
    for (p, idx) in Partition::ALL.iter().zip(&rows) {
        let part_records: Vec<SurvivalRecord> = idx.iter().map(|&i| records[i].clone()).collect();
        write_dataset(
            cfg.out_path(&format!("{}.csv", p.name())),
            &imputed.select_rows(idx),
            &part_records,
            Some(&hdr),
        )?;
        partitions.push((*p, split.subject_count(*p), idx.len()));
    }
    Ok(PrepareSummary {
        partitions,
        imputed_cells: table.missing_count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FittedModel {
    Cox(CoxModel),
    Glm(GlmModel),
    Rsf(RsfModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Cox(_) => ModelKind::Cox,
            FittedModel::Glm(_) => ModelKind::Glm,
            FittedModel::Rsf(_) => ModelKind::Rsf,
        }
    }

    pub fn predict_risk(&self, row: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Cox(m) => m.predict_risk(row),
            FittedModel::Glm(m) => m.predict_risk(row),
            FittedModel::Rsf(m) => m.predict_risk(row),
        }
    }

    pub fn predict_survival(&self, row: &[f64], grid: &[f64]) -> Result<crate::survcore::SurvivalCurve> {
        match self {
            FittedModel::Cox(m) => m.predict_survival(row, grid),
            FittedModel::Glm(m) => {
                let s = m.predict_survival(row)?;
                let values = grid.iter().map(|&t| s.at(t)).collect();
                crate::survcore::SurvivalCurve::new(grid.to_vec(), values)
            }
            FittedModel::Rsf(m) => m.predict_survival_on(row, grid),
        }
    }
}

/// Everything `predict` needs: the encoder for raw covariates, the
/// selected encoded columns, and the fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub seed: u64,
    pub lambda: f64,
    pub encoder: DesignEncoder,
    pub selected_features: Vec<String>,
    pub model: FittedModel,
}

impl ModelFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| SurvError::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(SurvError::ModelFormat(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file)
    }

    /// Encodes `table` and keeps the selected columns.
    pub fn design(&self, table: &FeatureTable) -> Result<Matrix> {
        let x = self.encoder.encode(table)?;
        let cols = x.column_indices(&self.selected_features)?;
        Ok(x.select_columns(&cols))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub seed: u64,
    pub model: ModelKind,
    pub lambda: f64,
    pub lambda_forced: bool,
    pub selected: Vec<String>,
    pub path: Vec<PathPoint>,
}

impl fmt::Display for FitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model      {}", self.model)?;
        writeln!(
            f,
            "lambda     {}{}",
            self.lambda,
            if self.lambda_forced { " (forced)" } else { "" }
        )?;
        writeln!(f, "selected   {} features", self.selected.len())?;
        for name in &self.selected {
            writeln!(f, "  {name}")?;
        }
        if !self.path.is_empty() {
            writeln!(f, "lambda path (lambda, validation C-index, selected)")?;
            for p in &self.path {
                writeln!(f, "  {:<24} {:.4} {}", p.lambda, p.validation_c_index, p.selected)?;
            }
        }
        Ok(())
    }
}

/// Chooses the lasso penalty on train/validation, keeps the features with
/// nonzero coefficients, fits the configured model on them, and writes
/// `model.json` plus `fit_report.json` / `fit_report.txt`.
pub fn cmd_fit(cfg: &PipelineConfig) -> Result<FitSummary> {
    cfg.validate()?;
    let (train_table, train) = load_prepared(cfg, Partition::Train)?;
    let encoder = DesignEncoder::fit(&train_table);
    let train_x = encoder.encode(&train_table)?;

    let (fit, path) = match cfg.lambda {
        Some(lambda) => (fit_lasso_cox(&train_x, &train, lambda)?, Vec::new()),
        None => {
            let (val_table, validation) = load_prepared(cfg, Partition::Validation)?;
            let val_x = encoder.encode(&val_table)?;
            let lambdas = lambda_path(&train_x, &train, cfg.lasso_path_length, cfg.lasso_min_ratio)?;
            let choice = choose_lambda(
                &train_x,
                &train,
                &val_x,
                &validation,
                &lambdas,
                cfg.selection_tolerance,
            )?;
            (choice.fit, choice.path)
        }
    };
    let lambda = fit.model.lambda;
    let selected = select_features(&fit.model, cfg.selection_tolerance);
    if selected.is_empty() {
        return Err(SurvError::NoFeaturesSelected(lambda));
    }
    let names: Vec<String> = selected.iter().map(|&j| train_x.names()[j].clone()).collect();
    let x = train_x.select_columns(&selected);

    let model = match cfg.model {
        ModelKind::Cox => FittedModel::Cox(fit_lasso_cox(&x, &train, lambda)?.model),
        ModelKind::Glm => FittedModel::Glm(fit_discrete_glm(&x, &train, &yearly_grid(cfg.horizon))?),
        ModelKind::Rsf => {
            let params = cfg.rsf_params();
            FittedModel::Rsf(match cfg.threads {
                Some(t) => fit_rsf_with_threads(&x, &train, &params, t)?,
                None => fit_rsf(&x, &train, &params)?,
            })
        }
    };
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        seed: cfg.seed,
        lambda,
        encoder,
        selected_features: names.clone(),
        model,
    };
    create_out(cfg)?;
    write_text(&cfg.model_path(), &serde_json::to_string(&file)?)?;

    let summary = FitSummary {
        seed: cfg.seed,
        model: cfg.model,
        lambda,
        lambda_forced: cfg.lambda.is_some(),
        selected: names,
        path,
    };
    write_text(&cfg.out_path("fit_report.json"), &serde_json::to_string_pretty(&summary)?)?;
    write_text(
        &cfg.out_path("fit_report.txt"),
        &format!("# {}\n{summary}", header(cfg, "fit")),
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictSummary {
    pub rows: usize,
    pub beyond_horizon: usize,
    pub output: PathBuf,
}

impl fmt::Display for PredictSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "predicted {} knees ({} beyond the horizon) -> {}",
            self.rows,
            self.beyond_horizon,
            self.output.display()
        )
    }
}

fn input_schema(cfg: &PipelineConfig) -> Result<Schema> {
    match (&cfg.input, &cfg.schema) {
        (Some(_), Some(s)) => Schema::read(s),
        _ => Schema::read(cfg.prepared_schema_path()),
    }
}

fn finish_predictions(
    cfg: &PipelineConfig,
    rows: &[PredictionRow],
    comment: &str,
) -> Result<PredictSummary> {
    create_out(cfg)?;
    let output = cfg.out_path("predictions.csv");
    write_predictions(&output, rows, cfg.horizon_years(), Some(comment))?;
    Ok(PredictSummary {
        rows: rows.len(),
        beyond_horizon: rows
            .iter()
            .filter(|r| r.predicted == TimePrediction::BeyondHorizon)
            .count(),
        output,
    })
}

/// Writes `predictions.csv` for the input rows: risk, survival at each
/// year and the threshold readout.
pub fn cmd_predict(cfg: &PipelineConfig) -> Result<PredictSummary> {
    cfg.validate()?;
    let file = ModelFile::read(cfg.model_path())?;
    let (table, records) = load_dataset(cfg.input_path(), &input_schema(cfg)?)?;
    let x = file.design(&table)?;
    let grid = yearly_grid(cfg.horizon);
    let rows = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = x.row(i);
            let curve = file.model.predict_survival(row, &grid)?;
            Ok(prediction_row(r, file.model.predict_risk(row)?, &curve, cfg.threshold))
        })
        .collect::<Result<Vec<_>>>()?;
    let comment = format!(
        "{} model={} threshold={}",
        header(cfg, "predict"),
        file.model.kind(),
        cfg.threshold
    );
    finish_predictions(cfg, &rows, &comment)
}

/// Writes `predictions.csv` from the observed outcomes of the input rows
/// (a perfect predictor, for checking the evaluation chain).
pub fn cmd_predict_oracle(cfg: &PipelineConfig) -> Result<PredictSummary> {
    cfg.validate()?;
    let records = load_records(&cfg.input_path())?;
    let rows = oracle_predictions(&records, cfg.horizon_years(), cfg.threshold)?;
    let comment = format!("{} model=oracle threshold={}", header(cfg, "predict"), cfg.threshold);
    finish_predictions(cfg, &rows, &comment)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// Event knees whose absolute year errors were compared.
    pub pairs: usize,
    pub mean_error_first: f64,
    pub mean_error_second: f64,
    pub test: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateSummary {
    pub seed: u64,
    pub report: EvaluationReport,
    pub second: Option<EvaluationReport>,
    pub comparison: Option<Comparison>,
}

impl fmt::Display for EvaluateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.report.to_table())?;
        if let (Some(second), Some(c)) = (&self.second, &self.comparison) {
            writeln!(f, "\nsecond predictions")?;
            f.write_str(&second.to_table())?;
            writeln!(f, "\nsigned-rank test on absolute year errors ({} event knees)", c.pairs)?;
            writeln!(
                f,
                "  mean error {:.3} vs {:.3}, W = {}, p = {:.4} ({:?})",
                c.mean_error_first, c.mean_error_second, c.test.statistic, c.test.p_value, c.test.method
            )?;
        }
        Ok(())
    }
}

fn evaluate_rows(rows: &[PredictionRow], records: &[SurvivalRecord]) -> Result<EvaluationReport> {
    let years = rows.first().map_or(0, |r| r.survival.len());
    let curves = rows.iter().map(PredictionRow::curve).collect::<Result<Vec<_>>>()?;
    let risks: Vec<f64> = rows.iter().map(|r| r.risk).collect();
    let preds: Vec<TimePrediction> = rows.iter().map(|r| r.predicted).collect();
    evaluate(&curves, &risks, &preds, records, years)
}

/// `|true year - predicted year|` for event knees; beyond the horizon
/// counts as year `H + 1`.
fn year_errors(rows: &[PredictionRow], records: &[SurvivalRecord], years: usize) -> Vec<f64> {
    rows.iter()
        .zip(records)
        .filter(|(_, r)| r.event)
        .map(|(p, r)| {
            let predicted = p.predicted.year().unwrap_or((years + 1) as f64);
            (year_class(r.time, years) as f64 - predicted).abs()
        })
        .collect()
}

/// Scores `predictions` against the truth records and writes
/// `report.json`, `report.txt` and `confusion.csv`. With a second file the
/// two are compared by a signed-rank test on absolute year errors.
pub fn cmd_evaluate(
    cfg: &PipelineConfig,
    predictions: &Path,
    second: Option<&Path>,
) -> Result<EvaluateSummary> {
    cfg.validate()?;
    let records = load_records(&cfg.truth_path())?;
    let rows = align_predictions(read_predictions(predictions)?, &records)?;
    let report = evaluate_rows(&rows, &records)?;
    let (second_report, comparison) = match second {
        None => (None, None),
        Some(p) => {
            let other = align_predictions(read_predictions(p)?, &records)?;
            let years = rows[0].survival.len();
            if other.iter().any(|r| r.survival.len() != years) {
                return Err(SurvError::invalid("prediction files use different horizons"));
            }
            let a = year_errors(&rows, &records, years);
            let b = year_errors(&other, &records, years);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
            let comparison = Comparison {
                pairs: a.len(),
                mean_error_first: mean(&a),
                mean_error_second: mean(&b),
                test: wilcoxon_signed_rank(&a, &b)?,
            };
            (Some(evaluate_rows(&other, &records)?), Some(comparison))
        }
    };
    let summary = EvaluateSummary {
        seed: cfg.seed,
        report,
        second: second_report,
        comparison,
    };
    create_out(cfg)?;
    let hdr = header(cfg, "evaluate");
    write_text(&cfg.out_path("report.json"), &serde_json::to_string_pretty(&summary)?)?;
    write_text(&cfg.out_path("report.txt"), &format!("# {hdr}\n{summary}"))?;
    write_text(
        &cfg.out_path("confusion.csv"),
        &format!("# {hdr}\n{}", summary.report.confusion.to_csv()),
    )?;
    Ok(summary)
}
