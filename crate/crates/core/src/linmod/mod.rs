//! L1-penalized logistic regression.
//!
//! The objective, over standardized features `x~` with an unpenalized intercept, is
//!
//! ```text
//! -(1/n) * sum_i [ y_i * eta_i - log(1 + exp(eta_i)) ] + lambda * ||beta||_1
//! ```
//!
//! minimized by an IRLS outer loop (quadratic approximation of the
//! log-likelihood, with step halving so the objective never increases) around
//! a cyclic coordinate-descent inner loop with soft-thresholding and
//! active-set cycling. Paths are computed from `lambda_max` downwards with warm
//! starts; [`cross_validate`] scores a shared grid by repeated stratified
//! k-fold AUC.

mod cv;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DataTable;
use crate::eval::EvalError;
use crate::math;

pub use cv::{cross_validate, repeat_aucs, stratified_folds, CvOptions, CvResult, SelectionRule};
pub use solver::{
    fit, fit_with_trace, lambda_max, path, path_on_grid, penalized_objective, FitOptions, PathSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinmodError {
    #[error("target is constant; both classes are required")]
    DegenerateTarget,
    #[error("non-finite working response during IRLS")]
    NonFinite,
    #[error("row width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("class `{class}` has {count} rows; cross-validation needs at least {needed}")]
    TooFewPerClass { class: u8, count: usize, needed: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `sign(z) * max(|z| - gamma, 0)`.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Column centring / scaling (population sd). Zero-variance columns are kept
/// with `sd = 0`, listed in `dropped`, and their coefficient is pinned at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub dropped: Vec<String>,
}

impl Standardizer {
    pub fn fit(table: &DataTable) -> Standardizer {
        let p = table.n_features();
        let mut means = Vec::with_capacity(p);
        let mut sds = Vec::with_capacity(p);
        let mut dropped = Vec::new();
        for j in 0..p {
            let col = table.column(j);
            let m = math::mean(&col);
            let sd = math::pop_sd(&col);
            let retained = sd > 1e-12 * m.abs().max(1.0);
            if !retained {
                dropped.push(table.schema().get(j).name.clone());
            }
            means.push(m);
            sds.push(if retained { sd } else { 0.0 });
        }
        Standardizer { means, sds, dropped }
    }

    pub fn is_retained(&self, j: usize) -> bool {
        self.sds[j] > 0.0
    }

    /// Standardized value of feature `j`; 0 for dropped columns.
    pub fn transform(&self, j: usize, x: f64) -> f64 {
        if self.is_retained(j) {
            (x - self.means[j]) / self.sds[j]
        } else {
            0.0
        }
    }
}

/// A fitted LASSO logistic model on the original feature scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticLassoModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub standardizer: Standardizer,
    pub feature_names: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticLassoModel {
    pub(crate) fn from_standardized(
        b0: f64,
        beta: &[f64],
        lambda: f64,
        standardizer: Standardizer,
        feature_names: Vec<String>,
        converged: bool,
        iterations: usize,
    ) -> Self {
        let mut intercept = b0;
        let coefficients: Vec<f64> = beta
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                if b == 0.0 || !standardizer.is_retained(j) {
                    0.0
                } else {
                    intercept -= b * standardizer.means[j] / standardizer.sds[j];
                    b / standardizer.sds[j]
                }
            })
            .collect();
        LogisticLassoModel { intercept, coefficients, lambda, standardizer, feature_names, converged, iterations }
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    /// Coefficients on the standardized scale.
    pub fn std_coefficients(&self) -> Vec<f64> {
        self.coefficients.iter().zip(&self.standardizer.sds).map(|(b, sd)| b * sd).collect()
    }

    /// Intercept on the standardized scale.
    pub fn std_intercept(&self) -> f64 {
        self.intercept
            + self.coefficients.iter().zip(&self.standardizer.means).map(|(b, m)| b * m).sum::<f64>()
    }

    pub fn nnz(&self) -> usize {
        self.coefficients.iter().filter(|&&b| b != 0.0).count()
    }

    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.coefficients.len());
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }

    /// Probability for one row, clamped to `(1e-12, 1 - 1e-12)`.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        math::clamp_prob(math::sigmoid(self.linear_predictor(row)))
    }

    pub fn predict_proba<'a, I>(&self, rows: I) -> Result<Vec<f64>, LinmodError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        rows.into_iter()
            .map(|r| {
                if r.len() != self.n_features() {
                    Err(LinmodError::WidthMismatch { expected: self.n_features(), got: r.len() })
                } else {
                    Ok(self.predict_row(r))
                }
            })
            .collect()
    }

    pub fn predict_table(&self, table: &DataTable) -> Result<Vec<f64>, LinmodError> {
        self.predict_proba(table.rows())
    }
}

/// Solutions along a decreasing penalty grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationPath {
    pub lambdas: Vec<f64>,
    /// Original-scale coefficients, one row per lambda.
    pub coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
    pub standardizer: Standardizer,
    pub feature_names: Vec<String>,
}

impl RegularizationPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn model(&self, k: usize) -> LogisticLassoModel {
        LogisticLassoModel {
            intercept: self.intercepts[k],
            coefficients: self.coefficients[k].clone(),
            lambda: self.lambdas[k],
            standardizer: self.standardizer.clone(),
            feature_names: self.feature_names.clone(),
            converged: self.converged[k],
            iterations: self.iterations[k],
        }
    }

    pub fn nnz(&self, k: usize) -> usize {
        self.coefficients[k].iter().filter(|&&b| b != 0.0).count()
    }
}
