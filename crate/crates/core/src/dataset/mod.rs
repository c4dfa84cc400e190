//! Tabular screening data: schemas, tables, ingestion, splits, cohort summaries
//! and a synthetic generator shaped like a 53-feature ageing-survey cohort.

mod ingest;
mod split;
mod summary;
mod synth;

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

pub use ingest::{load_csv, write_csv, MissingPolicy};
pub use split::{hold_out, split};
pub use summary::{summarize, ClassSummary, CohortSummary, FeatureStat};
pub use synth::{
    screening_schema, synthesize, use_case_patient, Marginal, SyntheticSpec, USE_CASE_PATIENT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("cannot parse row {row}, column `{col}`")]
    ParseError { row: usize, col: String },
    #[error("row {row}, column `{col}`: value {value} violates the schema")]
    SchemaViolation { row: usize, col: String, value: f64 },
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("file has no data rows")]
    EmptyFile,
    #[error("table is empty")]
    EmptyTable,
    #[error("train fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("hold-out count {count} is invalid for a table of {n} rows")]
    BadCount { count: usize, n: usize },
    #[error("split would leave an empty partition")]
    EmptyPartition,
    #[error("invalid schema: {0}")]
    BadSchema(String),
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Binary,
    Ordinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Demographic,
    Physical,
    Aggregated,
    Behavioural,
}

/// One column of the design matrix. `lo` / `hi` are inclusive; `None` is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    pub group: FeatureGroup,
}

impl FeatureSchema {
    pub fn new(name: &str, kind: FeatureKind, group: FeatureGroup) -> Self {
        FeatureSchema { name: name.to_string(), kind, lo: None, hi: None, group }
    }

    pub fn bounded(mut self, lo: f64, hi: f64) -> Self {
        self.lo = Some(lo);
        self.hi = Some(hi);
        self
    }

    /// Whether `value` is admissible for this feature.
    pub fn admits(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match self.kind {
            FeatureKind::Binary => value == 0.0 || value == 1.0,
            FeatureKind::Numeric | FeatureKind::Ordinal => {
                self.lo.is_none_or(|lo| value >= lo) && self.hi.is_none_or(|hi| value <= hi)
            }
        }
    }
}

/// Ordered list of features with unique names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(rename = "feature")]
    features: Vec<FeatureSchema>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSchema>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(DatasetError::BadSchema(format!("duplicate feature `{}`", f.name)));
            }
            if f.name == "target" {
                return Err(DatasetError::BadSchema("`target` is reserved".into()));
            }
            if let (Some(lo), Some(hi)) = (f.lo, f.hi) {
                if lo > hi {
                    return Err(DatasetError::BadSchema(format!("`{}` has lo > hi", f.name)));
                }
            }
        }
        if features.is_empty() {
            return Err(DatasetError::BadSchema("schema has no features".into()));
        }
        Ok(Schema { features })
    }

    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        let raw: Schema = toml::from_str(text).map_err(|e| DatasetError::BadSchema(e.to_string()))?;
        Schema::new(raw.features)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSchema] {
        &self.features
    }

    pub fn get(&self, index: usize) -> &FeatureSchema {
        &self.features[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }
}

/// Feature matrix (row-major) plus binary target and row identifiers.
///
/// Tables are immutable once built; every constructor validates the schema
/// bounds and rejects non-finite cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    schema: Schema,
    values: Vec<f64>,
    target: Vec<u8>,
    row_ids: Vec<String>,
}

impl DataTable {
    pub fn new(
        schema: Schema,
        rows: Vec<Vec<f64>>,
        target: Vec<u8>,
        row_ids: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let p = schema.len();
        if rows.len() != target.len() || rows.len() != row_ids.len() {
            return Err(DatasetError::Shape(format!(
                "{} rows, {} targets, {} ids",
                rows.len(),
                target.len(),
                row_ids.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(DatasetError::Shape(format!("row width {} != {}", row.len(), p)));
            }
            values.extend(row);
        }
        Self::from_flat(schema, values, target, row_ids)
    }

    pub(crate) fn from_flat(
        schema: Schema,
        values: Vec<f64>,
        target: Vec<u8>,
        row_ids: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let p = schema.len();
        let n = target.len();
        if values.len() != n * p || row_ids.len() != n {
            return Err(DatasetError::Shape("flat buffer does not match n x p".into()));
        }
        for (i, &y) in target.iter().enumerate() {
            if y > 1 {
                return Err(DatasetError::SchemaViolation {
                    row: i,
                    col: "target".into(),
                    value: y as f64,
                });
            }
        }
        for i in 0..n {
            for (j, f) in schema.features().iter().enumerate() {
                let v = values[i * p + j];
                if !f.admits(v) {
                    return Err(DatasetError::SchemaViolation { row: i, col: f.name.clone(), value: v });
                }
            }
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &row_ids {
            if !seen.insert(id.as_str()) {
                return Err(DatasetError::Shape(format!("duplicate row id `{id}`")));
            }
        }
        Ok(DataTable { schema, values, target, row_ids })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features().max(1)).take(self.n_rows())
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn position_of(&self, row_id: &str) -> Option<usize> {
        self.row_ids.iter().position(|r| r == row_id)
    }

    pub fn n_positive(&self) -> usize {
        self.target.iter().filter(|&&y| y == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.n_positive();
        pos > 0 && pos < self.n_rows()
    }

    /// Column means over all rows.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_rows() as f64;
        let mut m = vec![0.0; self.n_features()];
        for row in self.rows() {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Observed `[min, max]` of column `j`.
    pub fn column_range(&self, j: usize) -> (f64, f64) {
        self.rows().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])))
    }

    /// New table with the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> DataTable {
        let p = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * p);
        let mut target = Vec::with_capacity(indices.len());
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            target.push(self.target[i]);
            ids.push(self.row_ids[i].clone());
        }
        DataTable { schema: self.schema.clone(), values, target, row_ids: ids }
    }
}
