//! Calibrated-vs-uncalibrated local explanations for L1-penalized logistic
//! screening models.
//!
//! The crate is organised around one study workflow:
//!
//! 1. [`dataset`] ingests (or synthesizes) a screening cohort and produces
//!    deterministic train / test / explanation splits.
//! 2. [`linmod`] fits a LASSO logistic regression by IRLS + cyclic coordinate
//!    descent and selects the penalty by repeated stratified k-fold CV scored
//!    with AUC.
//! 3. [`calib`] fits a logit-linear recalibration map and computes calibration
//!    diagnostics (loess reliability curve, slope / intercept, Hosmer–Lemeshow).
//! 4. [`eval`] provides AUC, percentile AUC intervals and the Brier score.
//! 5. [`explain`] computes break-down attributions, Shapley values and
//!    ceteris-paribus profiles for a [`explain::Predictor`], with or without
//!    the recalibration map composed in.
//! 6. [`diff`] compares the two explanation sets and flags instances whose
//!    feature rankings moved.
//! 7. [`pipeline`] wires all of the above into the `calexplain` command-line
//!    tool and writes the artifact / report tree.
//!
//! Every capability has a runnable program under `examples/`.

pub mod calib;
pub mod dataset;
pub mod diff;
pub mod eval;
pub mod explain;
pub mod linmod;
pub mod pipeline;
pub mod rng;
pub mod svg;

pub(crate) mod math;

pub use calib::{CalibrationCurve, HlTestResult, Recalibrator, SlopeIntercept};
pub use dataset::{DataTable, FeatureKind, FeatureSchema, Schema};
pub use diff::{DiffSummary, ExplanationDiff};
pub use eval::AucSummary;
pub use explain::{Attribution, CpProfile, Model, Predictor, ShapResult};
pub use linmod::{CvResult, LogisticLassoModel, RegularizationPath};
