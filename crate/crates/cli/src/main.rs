use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use survkit::pipeline::{
    cmd_evaluate, cmd_fit, cmd_predict, cmd_predict_oracle, cmd_prepare, cmd_simulate, PipelineConfig,
};
use survkit::SurvError;

/// Time-to-event pipeline: simulate or load knee-level survival data,
/// select features with a lasso Cox model, fit Cox / discrete-time / random
/// survival forest models, predict event years and evaluate them.
#[derive(Parser)]
#[command(name = "survkit", version)]
struct Cli {
    /// Key-value settings file (`key = value` per line).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for splitting, simulation and forests.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for forest growth.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Any setting as `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    settings: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Impute, validate and split a dataset by subject.
    Prepare {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Train, validation and test fractions, e.g. `0.7,0.1,0.2`.
        #[arg(long)]
        fractions: Option<String>,
    },
    /// Select features and fit a model on the prepared partitions.
    Fit {
        /// cox, glm or rsf.
        #[arg(long)]
        model: Option<String>,
        /// Fixed lasso penalty instead of the validation search.
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        forest: ForestArgs,
    },
    /// Predict survival curves and event years for a dataset.
    Predict {
        #[arg(long)]
        model_file: Option<PathBuf>,
        /// Rows to predict; defaults to the prepared test partition.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Predict from the observed outcomes instead of a model.
        #[arg(long)]
        oracle: bool,
    },
    /// Score predictions; a second file adds a paired comparison.
    Evaluate {
        predictions: PathBuf,
        second: Option<PathBuf>,
        /// Records to score against; defaults to the prepared test partition.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Write a synthetic dataset with known ground truth.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        /// Coefficients of the leading features, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        signals: Option<String>,
        #[arg(long)]
        censor_rate: Option<f64>,
        /// `feature_a,feature_b,coefficient` (zero-based features).
        #[arg(long, allow_hyphen_values = true)]
        interaction: Option<String>,
        #[arg(long)]
        bilateral_fraction: Option<f64>,
    },
}

#[derive(Args)]
struct ForestArgs {
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long)]
    min_leaf_events: Option<usize>,
    #[arg(long)]
    min_node_size: Option<usize>,
    #[arg(long)]
    bootstrap: Option<bool>,
}

fn push<T: ToString>(pairs: &mut Vec<(&'static str, String)>, key: &'static str, v: Option<T>) {
    if let Some(v) = v {
        pairs.push((key, v.to_string()));
    }
}

fn path(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

fn run(cli: Cli) -> Result<String, SurvError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::read(p)?,
        None => PipelineConfig::default(),
    };
    // flags win over the file
    let mut pairs = Vec::new();
    push(&mut pairs, "seed", cli.seed);
    push(&mut pairs, "threads", cli.threads);
    push(&mut pairs, "out", path(cli.out));
    for s in &cli.settings {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| SurvError::InvalidArgument(format!("`--set {s}` needs key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    match &cli.command {
        Command::Prepare { dataset, schema, fractions } => {
            push(&mut pairs, "dataset", path(dataset.clone()));
            push(&mut pairs, "schema", path(schema.clone()));
            push(&mut pairs, "fractions", fractions.clone());
        }
        Command::Fit { model, lambda, forest } => {
            push(&mut pairs, "model", model.clone());
            push(&mut pairs, "lambda", *lambda);
            push(&mut pairs, "n_trees", forest.n_trees);
            push(&mut pairs, "mtry", forest.mtry);
            push(&mut pairs, "min_leaf_events", forest.min_leaf_events);
            push(&mut pairs, "min_node_size", forest.min_node_size);
            push(&mut pairs, "bootstrap", forest.bootstrap);
        }
        Command::Predict { model_file, input, schema, threshold, .. } => {
            push(&mut pairs, "model_file", path(model_file.clone()));
            push(&mut pairs, "input", path(input.clone()));
            push(&mut pairs, "schema", path(schema.clone()));
            push(&mut pairs, "threshold", *threshold);
        }
        Command::Evaluate { truth, .. } => push(&mut pairs, "truth", path(truth.clone())),
        Command::Simulate { n, p, signals, censor_rate, interaction, bilateral_fraction } => {
            push(&mut pairs, "sim_n", *n);
            push(&mut pairs, "sim_p", *p);
            push(&mut pairs, "sim_signals", signals.clone());
            push(&mut pairs, "sim_censor_rate", *censor_rate);
            push(&mut pairs, "sim_interaction", interaction.clone());
            push(&mut pairs, "sim_bilateral_fraction", *bilateral_fraction);
        }
    }
    for (k, v) in pairs {
        cfg.set(k, &v)?;
    }

    Ok(match cli.command {
        Command::Prepare { .. } => cmd_prepare(&cfg)?.to_string(),
        Command::Fit { .. } => cmd_fit(&cfg)?.to_string(),
        Command::Predict { oracle: true, .. } => cmd_predict_oracle(&cfg)?.to_string(),
        Command::Predict { .. } => cmd_predict(&cfg)?.to_string(),
        Command::Evaluate { predictions, second, .. } => {
            cmd_evaluate(&cfg, &predictions, second.as_deref())?.to_string()
        }
        Command::Simulate { .. } => cmd_simulate(&cfg)?.to_string(),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
