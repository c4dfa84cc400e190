use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::calib::{CalibrationCurve, HlTestResult, Recalibrator, SlopeIntercept};
use crate::diff::{BatchOptions, DiffSummary, ExplanationDiff};
use crate::eval::AucSummary;
use crate::explain::{Attribution, CpProfile, ShapResult};
use crate::linmod::{CvResult, LogisticLassoModel};

/// Bumped whenever an artifact layout changes.
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub artifact_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact<T> {
    pub provenance: Provenance,
    pub payload: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub total: usize,
    pub explain_holdout: usize,
    pub train: usize,
    /// Training rows the model was fitted on after class rebalancing.
    pub fit: usize,
    pub test: usize,
    pub calibration_fit: usize,
    pub calibration_eval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPayload {
    pub model: LogisticLassoModel,
    pub cv: CvResult,
    /// Fold AUCs at the selected penalty.
    pub cv_auc: AucSummary,
    pub sizes: SplitSizes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub auc: f64,
    pub brier: f64,
    pub slope_intercept: SlopeIntercept,
    pub hosmer_lemeshow: HlTestResult,
    pub curve: CalibrationCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationReport {
    pub recalibrator: Recalibrator,
    /// Cross-validated AUCs of the out-of-fold predictions, raw and mapped.
    pub cv_uncalibrated: AucSummary,
    pub cv_calibrated: AucSummary,
    /// Diagnostics on the calibration-evaluation rows.
    pub before: Diagnostics,
    pub after: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pair<T> {
    pub uncalibrated: T,
    pub calibrated: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyCheck {
    pub block: String,
    /// `prediction - baseline - Σ contributions`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationReport {
    pub instance_id: String,
    pub background_rows: usize,
    pub break_down: Pair<Attribution>,
    pub shap: Pair<ShapResult>,
    pub profiles: Vec<Pair<CpProfile>>,
    pub efficiency: Vec<EfficiencyCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffReport {
    pub options: BatchOptions,
    pub summary: DiffSummary,
    pub instances: Vec<ExplanationDiff>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedValue {
    pub feature: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvRow {
    pub lambda: f64,
    pub mean_auc: f64,
    pub sd_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelReport {
    pub lambda: f64,
    pub intercept: f64,
    /// Non-zero coefficients on the original feature scale, in schema order.
    pub coefficients: Vec<NamedValue>,
    pub dropped_features: Vec<String>,
    pub cv_table: Vec<CvRow>,
    pub selected_index: usize,
    pub sizes: SplitSizes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discrimination {
    pub cv_uncalibrated: AucSummary,
    pub cv_calibrated: AucSummary,
    pub holdout_auc_uncalibrated: f64,
    pub holdout_auc_calibrated: f64,
}

/// The consolidated document written by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub provenance: Provenance,
    pub model: ModelReport,
    pub discrimination: Discrimination,
    pub calibration: CalibrationReport,
    pub explanation: ExplanationReport,
    pub diff: DiffSummary,
    pub plots: Vec<String>,
}

pub(crate) fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io { path: path.display().to_string(), message: e.to_string() }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// CSV with a header row; floats use the shortest round-trip form.
pub(crate) fn write_csv_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub(crate) fn read_csv_rows(path: &Path) -> Result<Vec<csv::StringRecord>, PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.records().collect::<Result<_, _>>().map_err(|e| io_err(path, e))
}
