//! The study pipeline behind the `calexplain` binary.
//!
//! Each command re-derives the data partitions from `(data, config, seed)`,
//! reads the artifacts of the commands before it from the output directory
//! and writes its own. Every artifact is `{"provenance": ..., "payload": ...}`
//! and the provenance hash covers the settings and the input bytes, so
//! artifacts from different runs cannot be mixed silently.

mod artifacts;
mod commands;
mod config;

use thiserror::Error;

use crate::calib::CalibError;
use crate::dataset::DatasetError;
use crate::diff::DiffError;
use crate::eval::EvalError;
use crate::explain::ExplainError;
use crate::linmod::LinmodError;

pub use artifacts::{
    Artifact, CalibrationReport, Diagnostics, DiffReport, Discrimination, ExplanationReport, ModelPayload,
    ModelReport, Pair, Provenance, RunReport, SplitSizes, ARTIFACT_VERSION,
};
pub use commands::{
    cmd_calibrate, cmd_diff, cmd_explain, cmd_report, cmd_synth, cmd_train, run_all, InstanceSelector,
};
pub use config::{
    Balance, CalibrationConfig, ExplainConfig, LassoConfig, PipelineConfig, RunContext, SplitConfig, SynthConfig,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("unknown instance {0:?}")]
    UnknownInstance(String),
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),
    #[error("artifacts come from different runs: {0}")]
    MixedProvenance(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Linmod(#[from] LinmodError),
    #[error(transparent)]
    Calib(#[from] CalibError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("stored values disagree with recomputation: {0}")]
    Inconsistent(String),
}

/// Variant name of an error enum, from its `Debug` form.
fn variant_name(debug: String) -> String {
    debug.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or_default().to_string()
}

impl PipelineError {
    /// 2 for configuration problems, 3 for data / artifact problems, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        use PipelineError::*;
        match self {
            Config(_) | UnknownInstance(_) => 2,
            Data(_) | MissingArtifacts(_) | MixedProvenance(_) | Io { .. } => 3,
            Linmod(LinmodError::DegenerateTarget | LinmodError::TooFewPerClass { .. }) => 3,
            Linmod(_) | Calib(_) | Eval(_) | Explain(_) | Diff(_) | Inconsistent(_) => 4,
        }
    }

    /// Short machine-readable name, e.g. `MissingFile` for a missing data file.
    pub fn kind(&self) -> String {
        use PipelineError::*;
        match self {
            Data(e) => variant_name(format!("{e:?}")),
            Linmod(e) => variant_name(format!("{e:?}")),
            Calib(e) => variant_name(format!("{e:?}")),
            Eval(e) => variant_name(format!("{e:?}")),
            Explain(e) => variant_name(format!("{e:?}")),
            Diff(DiffError::Explain(e)) => variant_name(format!("{e:?}")),
            Diff(e) => variant_name(format!("{e:?}")),
            other => variant_name(format!("{other:?}")),
        }
    }

    /// The JSON error record written to stderr by the binary.
    pub fn record(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() }
        })
        .to_string()
    }
}
