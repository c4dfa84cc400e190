//! Local explanations of a single prediction against a background sample.
//!
//! Every method works on plug-in conditional expectations: copy the background
//! rows, overwrite a set of features with the instance's values and average the
//! predictions. Attributions are on the probability scale.

mod profile;
mod shap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::Recalibrator;
use crate::dataset::DataTable;
use crate::linmod::LogisticLassoModel;
use crate::math;

pub use profile::{ceteris_paribus, CpProfile};
pub use shap::{shap_exact, shap_sampling, ShapResult, MAX_EXACT_FEATURES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("background sample is empty")]
    EmptyBackground,
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("feature {0:?} is binary; profile both levels with a 2-point grid instead")]
    BinaryFeature(String),
    #[error("exact Shapley values need at most {max} features, got {p}")]
    TooManyFeatures { p: usize, max: usize },
    #[error("instance has {got} values, background has {expected} features")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Anything that maps a feature row to a score.
pub trait Model: Sync {
    fn predict(&self, row: &[f64]) -> f64;
}

impl Model for LogisticLassoModel {
    fn predict(&self, row: &[f64]) -> f64 {
        self.predict_row(row)
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Model for F {
    fn predict(&self, row: &[f64]) -> f64 {
        self(row)
    }
}

/// A model optionally followed by a recalibration map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor<M = LogisticLassoModel> {
    pub model: M,
    pub recalibrator: Option<Recalibrator>,
}

impl<M: Model> Predictor<M> {
    pub fn new(model: M) -> Self {
        Predictor { model, recalibrator: None }
    }

    pub fn calibrated(model: M, recalibrator: Recalibrator) -> Self {
        Predictor { model, recalibrator: Some(recalibrator) }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let p = self.model.predict(row);
        match &self.recalibrator {
            Some(r) => r.apply(p),
            None => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    BreakDown,
    Shap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionEntry {
    pub feature_index: usize,
    pub feature: String,
    pub value: f64,
    pub contribution: f64,
}

/// Additive decomposition `baseline + Σ contribution = prediction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub instance_id: Option<String>,
    pub baseline: f64,
    pub prediction: f64,
    pub entries: Vec<AttributionEntry>,
    pub method: AttributionMethod,
}

impl Attribution {
    /// Contributions indexed by feature position in the schema.
    pub fn contributions(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.entries.len()];
        for e in &self.entries {
            out[e.feature_index] = e.contribution;
        }
        out
    }

    /// `prediction - baseline - Σ contributions`.
    pub fn efficiency_gap(&self) -> f64 {
        self.prediction - self.baseline - self.entries.iter().map(|e| e.contribution).sum::<f64>()
    }
}

/// Background rows with feature columns progressively fixed to an instance.
pub(crate) struct PlugIn<'a, M> {
    pred: &'a Predictor<M>,
    background: &'a DataTable,
    instance: &'a [f64],
}

impl<'a, M: Model> PlugIn<'a, M> {
    pub(crate) fn new(
        pred: &'a Predictor<M>,
        background: &'a DataTable,
        instance: &'a [f64],
    ) -> Result<Self, ExplainError> {
        if background.n_rows() == 0 {
            return Err(ExplainError::EmptyBackground);
        }
        if instance.len() != background.n_features() {
            return Err(ExplainError::WidthMismatch { expected: background.n_features(), got: instance.len() });
        }
        Ok(PlugIn { pred, background, instance })
    }

    fn p(&self) -> usize {
        self.instance.len()
    }

    fn mean_over(&self, rows: &[f64]) -> f64 {
        let preds: Vec<f64> = rows.chunks_exact(self.p()).map(|r| self.pred.predict(r)).collect();
        math::shifted_mean(&preds)
    }

    fn background_copy(&self) -> Vec<f64> {
        self.background.rows().flatten().copied().collect()
    }

    fn fix(&self, rows: &mut [f64], j: usize) {
        let p = self.p();
        for r in rows.chunks_exact_mut(p) {
            r[j] = self.instance[j];
        }
    }

    /// Expectation with the features in `mask` fixed.
    pub(crate) fn expectation(&self, mask: &[bool]) -> f64 {
        let mut rows = self.background_copy();
        for j in (0..self.p()).filter(|&j| mask[j]) {
            self.fix(&mut rows, j);
        }
        self.mean_over(&rows)
    }

    /// Expectations after fixing `order[..k]`, for k = 0..=len.
    pub(crate) fn walk(&self, order: &[usize]) -> Vec<f64> {
        let mut rows = self.background_copy();
        let mut out = Vec::with_capacity(order.len() + 1);
        out.push(self.mean_over(&rows));
        for &j in order {
            self.fix(&mut rows, j);
            out.push(self.mean_over(&rows));
        }
        out
    }

    /// Entries in `order`, each carrying `contribution(feature_index)`.
    pub(crate) fn entries(&self, order: &[usize], contribution: impl Fn(usize) -> f64) -> Vec<AttributionEntry> {
        let schema = self.background.schema();
        order
            .iter()
            .map(|&j| AttributionEntry {
                feature_index: j,
                feature: schema.get(j).name.clone(),
                value: self.instance[j],
                contribution: contribution(j),
            })
            .collect()
    }
}

/// Mean prediction over the background rows.
pub fn expected_prediction<M: Model>(pred: &Predictor<M>, background: &DataTable) -> Result<f64, ExplainError> {
    if background.n_rows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    let preds: Vec<f64> = background.rows().map(|r| pred.predict(r)).collect();
    Ok(math::shifted_mean(&preds))
}

/// Plug-in expectation of the prediction with the `fixed` features set to the
/// instance's values.
pub fn conditional_expectation<M: Model>(
    pred: &Predictor<M>,
    background: &DataTable,
    instance: &[f64],
    fixed: &[&str],
) -> Result<f64, ExplainError> {
    let plug = PlugIn::new(pred, background, instance)?;
    let mut mask = vec![false; instance.len()];
    for name in fixed {
        let j = background.schema().index_of(name).ok_or_else(|| ExplainError::UnknownFeature(name.to_string()))?;
        mask[j] = true;
    }
    Ok(plug.expectation(&mask))
}

/// Sequential break-down attribution.
///
/// Features are ordered by the absolute change a single one of them makes to
/// the expectation (ties keep schema order); each then contributes the change
/// in expectation when it is fixed on top of those before it.
pub fn break_down<M: Model>(
    pred: &Predictor<M>,
    background: &DataTable,
    instance: &[f64],
    instance_id: Option<&str>,
) -> Result<Attribution, ExplainError> {
    let plug = PlugIn::new(pred, background, instance)?;
    let p = instance.len();
    let baseline = plug.expectation(&vec![false; p]);
    let deltas: Vec<f64> = (0..p)
        .map(|j| {
            let mut mask = vec![false; p];
            mask[j] = true;
            plug.expectation(&mask) - baseline
        })
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| deltas[b].abs().total_cmp(&deltas[a].abs()));
    let steps = plug.walk(&order);
    let mut contribution = vec![0.0; p];
    for (k, &j) in order.iter().enumerate() {
        contribution[j] = steps[k + 1] - steps[k];
    }
    Ok(Attribution {
        instance_id: instance_id.map(str::to_string),
        baseline,
        prediction: pred.predict(instance),
        entries: plug.entries(&order, |j| contribution[j]),
        method: AttributionMethod::BreakDown,
    })
}
