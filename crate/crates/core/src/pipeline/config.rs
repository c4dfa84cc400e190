use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::calib::RecalibratorKind;
use crate::dataset::{screening_schema, MissingPolicy, Schema};
use crate::explain::AttributionMethod;
use crate::linmod::{CvOptions, FitOptions, PathSpec, SelectionRule};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Rows set aside before anything else as background and diff set.
    pub explain_holdout: usize,
    pub train_fraction: f64,
    /// Leading share of the test partition used to fit the recalibrator; the
    /// rest evaluates it.
    pub calibration_fit_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { explain_holdout: 100, train_fraction: 0.8, calibration_fit_fraction: 0.5 }
    }
}

/// Class rebalancing of the rows the model is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    #[default]
    None,
    /// Keep every positive and an equally sized random sample of negatives.
    Undersample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    pub nlambda: usize,
    pub lambda_min_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub folds: usize,
    pub repeats: usize,
    pub selection: SelectionRule,
    pub balance: Balance,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            nlambda: 100,
            lambda_min_ratio: 1e-3,
            tol: 1e-7,
            max_iter: 10_000,
            folds: 10,
            repeats: 10,
            selection: SelectionRule::MaxAuc,
            balance: Balance::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub kind: RecalibratorKind,
    pub span: f64,
    pub hl_bins: usize,
    pub grid_size: usize,
    /// Coverage of the AUC percentile interval.
    pub level: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig { kind: RecalibratorKind::LogitLinear, span: 0.75, hl_bins: 10, grid_size: 100, level: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Attribution method used by `diff`; `explain` always emits both.
    pub method: AttributionMethod,
    pub permutations: usize,
    pub k: usize,
    pub grid_size: usize,
    pub tau_threshold: f64,
    /// `use_case`, `index:<n>` into the explanation holdout, or a row id.
    pub instance: String,
    pub profile_features: Vec<String>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            method: AttributionMethod::BreakDown,
            permutations: 50,
            k: 10,
            grid_size: 101,
            tau_threshold: 0.8,
            instance: "use_case".into(),
            profile_features: vec!["BMI".into(), "Age".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n: 5000 }
    }
}

/// Settings for a whole run. Relative paths resolve against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: PathBuf,
    /// Schema document; the built-in 53-feature screening schema when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    pub missing: MissingPolicy,
    pub seed: u64,
    pub out: PathBuf,
    pub split: SplitConfig,
    pub lasso: LassoConfig,
    pub calibration: CalibrationConfig,
    pub explain: ExplainConfig,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data: "cohort.csv".into(),
            schema: None,
            missing: MissingPolicy::FailFast,
            seed: 0,
            out: ".".into(),
            split: SplitConfig::default(),
            lasso: LassoConfig::default(),
            calibration: CalibrationConfig::default(),
            explain: ExplainConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

impl PipelineConfig {
    /// The demo whose raw outputs need recalibration: the model is fitted on a
    /// class-balanced sample, which inflates its intercept, and on a truncated
    /// penalty path, whose heavy shrinkage pushes the calibration slope above 1.
    pub fn distorted_demo() -> Self {
        let mut c = PipelineConfig::default();
        c.synth.n = 60_000;
        c.lasso.folds = 5;
        c.lasso.repeats = 2;
        c.lasso.nlambda = 30;
        c.lasso.lambda_min_ratio = 0.15;
        c.lasso.balance = Balance::Undersample;
        c
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every numeric setting against the preconditions of the
    /// operation that consumes it.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let s = &self.split;
        if s.explain_holdout == 0 {
            return Err(config_err("split.explain_holdout must be positive"));
        }
        if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
            return Err(config_err("split.train_fraction must lie in (0, 1)"));
        }
        if !(s.calibration_fit_fraction > 0.0 && s.calibration_fit_fraction < 1.0) {
            return Err(config_err("split.calibration_fit_fraction must lie in (0, 1)"));
        }
        self.cv_options().path.validate().map_err(|e| config_err(format!("lasso: {e}")))?;
        if self.lasso.folds < 2 || self.lasso.repeats == 0 {
            return Err(config_err("lasso needs folds >= 2 and repeats >= 1"));
        }
        let c = &self.calibration;
        if !(c.span > 0.0 && c.span <= 1.0) {
            return Err(config_err("calibration.span must lie in (0, 1]"));
        }
        if c.hl_bins < 3 || c.grid_size < 2 || !(c.level > 0.0 && c.level < 1.0) {
            return Err(config_err("calibration needs hl_bins >= 3, grid_size >= 2 and level in (0, 1)"));
        }
        let e = &self.explain;
        if e.permutations == 0 || e.k == 0 || e.grid_size < 2 {
            return Err(config_err("explain needs permutations >= 1, k >= 1 and grid_size >= 2"));
        }
        if !(-1.0..=1.0).contains(&e.tau_threshold) {
            return Err(config_err("explain.tau_threshold must lie in [-1, 1]"));
        }
        if self.synth.n < 2 {
            return Err(config_err("synth.n must be at least 2"));
        }
        Ok(())
    }

    pub fn cv_options(&self) -> CvOptions {
        let l = &self.lasso;
        CvOptions {
            folds: l.folds,
            repeats: l.repeats,
            path: PathSpec {
                nlambda: l.nlambda,
                lambda_min_ratio: l.lambda_min_ratio,
                fit: FitOptions { tol: l.tol, max_iter: l.max_iter },
            },
            seed: rng::derive_seed(self.seed, SEED_CV),
            rule: l.selection,
        }
    }
}

pub(crate) const SEED_HOLDOUT: u64 = 0;
pub(crate) const SEED_SPLIT: u64 = 1;
pub(crate) const SEED_CV: u64 = 2;
pub(crate) const SEED_SHAP: u64 = 3;
pub(crate) const SEED_DIFF: u64 = 4;
pub(crate) const SEED_BALANCE: u64 = 5;

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A validated config with its paths resolved.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: PipelineConfig,
    pub data_path: PathBuf,
    pub schema_path: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl RunContext {
    /// Builds a context from a config read from `config_path` (or defaults
    /// rooted at the working directory), applying command-line overrides.
    pub fn load(
        config_path: Option<&Path>,
        seed: Option<u64>,
        out: Option<&Path>,
    ) -> Result<RunContext, PipelineError> {
        Self::load_or(config_path, PipelineConfig::default(), seed, out)
    }

    /// Like [`RunContext::load`], with `fallback` used when no config file is given.
    pub fn load_or(
        config_path: Option<&Path>,
        fallback: PipelineConfig,
        seed: Option<u64>,
        out: Option<&Path>,
    ) -> Result<RunContext, PipelineError> {
        let (mut config, base) = match config_path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (PipelineConfig::from_toml(&text)?, base)
            }
            None => (fallback, PathBuf::new()),
        };
        if let Some(s) = seed {
            config.seed = s;
        }
        let out_dir = match out {
            Some(o) => o.to_path_buf(),
            None => base.join(&config.out),
        };
        Self::from_config(config, &base, out_dir)
    }

    pub fn from_config(config: PipelineConfig, base: &Path, out_dir: PathBuf) -> Result<RunContext, PipelineError> {
        config.validate()?;
        Ok(RunContext {
            data_path: base.join(&config.data),
            schema_path: config.schema.as_ref().map(|s| base.join(s)),
            config,
            out_dir,
        })
    }

    pub fn schema(&self) -> Result<Schema, PipelineError> {
        match &self.schema_path {
            None => Ok(screening_schema()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|_| crate::dataset::DatasetError::MissingFile(p.display().to_string()))?;
                Ok(Schema::from_toml(&text)?)
            }
        }
    }

    /// sha256 over the settings (paths excluded) and the bytes of the data
    /// and schema files.
    pub fn config_hash(&self) -> Result<String, PipelineError> {
        let data = fs::read(&self.data_path)
            .map_err(|_| crate::dataset::DatasetError::MissingFile(self.data_path.display().to_string()))?;
        let schema = self.schema()?.to_toml();
        let mut settings = self.config.clone();
        settings.data = PathBuf::new();
        settings.schema = None;
        settings.out = PathBuf::new();
        let canonical = serde_json::json!({
            "settings": settings,
            "data_sha256": sha256_hex(&data),
            "schema_sha256": sha256_hex(schema.as_bytes()),
        });
        Ok(sha256_hex(canonical.to_string().as_bytes()))
    }
}
