use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coxnet::{DEFAULT_MIN_RATIO, DEFAULT_PATH_LENGTH, DEFAULT_SELECTION_TOLERANCE};
use crate::dataio::DEFAULT_HORIZON;
use crate::error::{Result, SurvError};
use crate::rsf::RsfParams;
use crate::survcore::DEFAULT_THRESHOLD;
use crate::synth::{Interaction, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cox,
    Glm,
    Rsf,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cox => "cox",
            ModelKind::Glm => "glm",
            ModelKind::Rsf => "rsf",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cox" => Ok(ModelKind::Cox),
            "glm" => Ok(ModelKind::Glm),
            "rsf" => Ok(ModelKind::Rsf),
            other => Err(format!("unknown model `{other}` (expected cox, glm or rsf)")),
        }
    }
}

/// Settings for every command. Read from `key = value` text and
/// overridden key by key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub out: PathBuf,
    /// Model file for `predict`; defaults to `<out>/model.json`.
    pub model_file: Option<PathBuf>,
    /// Rows to predict; defaults to the prepared test partition.
    pub input: Option<PathBuf>,
    /// Records to evaluate against; defaults to the prepared test partition.
    pub truth: Option<PathBuf>,
    pub fractions: [f64; 3],
    pub seed: u64,
    pub model: ModelKind,
    pub threshold: f64,
    pub horizon: f64,
    pub lasso_path_length: usize,
    pub lasso_min_ratio: f64,
    /// Skips the validation search and uses this penalty.
    pub lambda: Option<f64>,
    pub selection_tolerance: f64,
    pub rsf: RsfParams,
    pub threads: Option<usize>,
    pub sim: SimSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub n: usize,
    pub p: usize,
    /// Coefficients of the leading features; the rest are zero.
    pub signals: Vec<f64>,
    pub shape: f64,
    pub scale: f64,
    pub censor_rate: f64,
    pub bilateral_fraction: f64,
    pub interaction: Option<Interaction>,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            n: 1000,
            p: 50,
            signals: vec![1.0, -1.0, 0.8, -0.8, 1.0],
            shape: 1.5,
            scale: 8.0,
            censor_rate: 0.3,
            bilateral_fraction: 0.5,
            interaction: None,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset: None,
            schema: None,
            out: PathBuf::from("out"),
            model_file: None,
            input: None,
            truth: None,
            fractions: [0.737, 0.102, 0.161],
            seed: 0,
            model: ModelKind::Rsf,
            threshold: DEFAULT_THRESHOLD,
            horizon: DEFAULT_HORIZON,
            lasso_path_length: DEFAULT_PATH_LENGTH,
            lasso_min_ratio: DEFAULT_MIN_RATIO,
            lambda: None,
            selection_tolerance: DEFAULT_SELECTION_TOLERANCE,
            rsf: RsfParams::default(),
            threads: None,
            sim: SimSettings::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| SurvError::invalid(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(SurvError::invalid(format!("`{key}`: `{value}` is not a boolean"))),
    }
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "" | "none" | "auto" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

impl PipelineConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment
    /// line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SurvError::Parse {
                row: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SurvError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = Some(value.into()),
            "schema" => self.schema = Some(value.into()),
            "out" => self.out = value.into(),
            "model_file" => self.model_file = Some(value.into()),
            "input" => self.input = Some(value.into()),
            "truth" => self.truth = Some(value.into()),
            "fractions" => {
                let v = parse_list(key, value)?;
                self.fractions = v.try_into().map_err(|_| {
                    SurvError::invalid("`fractions` takes three comma-separated values")
                })?;
            }
            "seed" => self.seed = parse(key, value)?,
            "model" => self.model = value.parse().map_err(SurvError::InvalidArgument)?,
            "threshold" => self.threshold = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "lasso_path_length" => self.lasso_path_length = parse(key, value)?,
            "lasso_min_ratio" => self.lasso_min_ratio = parse(key, value)?,
            "lambda" => self.lambda = optional(key, value)?,
            "selection_tolerance" => self.selection_tolerance = parse(key, value)?,
            "n_trees" => self.rsf.n_trees = parse(key, value)?,
            "mtry" => self.rsf.mtry = optional(key, value)?,
            "min_leaf_events" => self.rsf.min_leaf_events = parse(key, value)?,
            "min_node_size" => self.rsf.min_node_size = parse(key, value)?,
            "bootstrap" => self.rsf.bootstrap = parse_bool(key, value)?,
            "threads" => self.threads = optional(key, value)?,
            "sim_n" => self.sim.n = parse(key, value)?,
            "sim_p" => self.sim.p = parse(key, value)?,
            "sim_signals" => self.sim.signals = parse_list(key, value)?,
            "sim_shape" => self.sim.shape = parse(key, value)?,
            "sim_scale" => self.sim.scale = parse(key, value)?,
            "sim_censor_rate" => self.sim.censor_rate = parse(key, value)?,
            "sim_bilateral_fraction" => self.sim.bilateral_fraction = parse(key, value)?,
            "sim_interaction" => {
                self.sim.interaction = match value {
                    "" | "none" => None,
                    v => {
                        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                        let [a, b, c] = parts[..] else {
                            return Err(SurvError::invalid(
                                "`sim_interaction` takes `feature_a,feature_b,coefficient`",
                            ));
                        };
                        Some(Interaction {
                            a: parse(key, a)?,
                            b: parse(key, b)?,
                            coefficient: parse(key, c)?,
                        })
                    }
                }
            }
            other => return Err(SurvError::invalid(format!("unknown setting `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(SurvError::invalid(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.fractions.iter().any(|f| !(*f > 0.0)) || (self.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SurvError::invalid("fractions must be positive and sum to 1"));
        }
        if !(self.horizon >= 1.0) || !self.horizon.is_finite() {
            return Err(SurvError::invalid("horizon must be at least one year"));
        }
        if self.threads == Some(0) {
            return Err(SurvError::invalid("threads must be positive"));
        }
        Ok(())
    }

    pub fn horizon_years(&self) -> usize {
        self.horizon.floor() as usize
    }

    pub fn synth_spec(&self) -> SynthSpec {
        let mut spec = SynthSpec::sparse(self.sim.n, self.sim.p, &self.sim.signals, self.seed);
        spec.weibull_shape = self.sim.shape;
        spec.weibull_scale = self.sim.scale;
        spec.censor_rate = self.sim.censor_rate;
        spec.horizon = self.horizon;
        spec.bilateral_fraction = self.sim.bilateral_fraction;
        spec.interaction = self.sim.interaction.clone();
        spec
    }

    pub fn rsf_params(&self) -> RsfParams {
        RsfParams {
            seed: self.seed,
            ..self.rsf.clone()
        }
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn model_path(&self) -> PathBuf {
        self.model_file.clone().unwrap_or_else(|| self.out_path("model.json"))
    }

    pub fn input_path(&self) -> PathBuf {
        self.input.clone().unwrap_or_else(|| self.out_path("test.csv"))
    }

    pub fn truth_path(&self) -> PathBuf {
        self.truth.clone().unwrap_or_else(|| self.out_path("test.csv"))
    }

    /// Schema for prepared files: the one written by `prepare` if present.
    pub fn prepared_schema_path(&self) -> PathBuf {
        self.out_path("schema.txt")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let text = "# run\nseed = 7\nmodel = glm\nfractions = 0.6, 0.2, 0.2\nmtry = 3\nbootstrap = no\nsim_interaction = 0,1,1.5\n";
        let mut cfg = PipelineConfig::parse(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.model, ModelKind::Glm);
        assert_eq!(cfg.fractions, [0.6, 0.2, 0.2]);
        assert_eq!(cfg.rsf.mtry, Some(3));
        assert!(!cfg.rsf.bootstrap);
        assert_eq!(cfg.sim.interaction.as_ref().unwrap().coefficient, 1.5);
        cfg.set("seed", "9").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.rsf_params().seed, 9);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(PipelineConfig::parse("colour = blue").is_err());
        assert!(PipelineConfig::parse("seed").is_err());
        assert!(PipelineConfig::parse("fractions = 0.5,0.5").is_err());
        let cfg = PipelineConfig::parse("threshold = 1.0").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig::parse("fractions = 0.5,0.3,0.3").unwrap();
        assert!(cfg.validate().is_err());
    }
}
