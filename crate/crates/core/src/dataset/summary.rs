use serde::{Deserialize, Serialize};

use super::{DataTable, DatasetError, FeatureKind};
use crate::math;

/// Per-feature statistic in one outcome class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stat", rename_all = "snake_case")]
pub enum FeatureStat {
    /// Mean and population sd (numeric / ordinal features).
    Continuous { mean: f64, sd: f64 },
    /// Share of ones and their count (binary features).
    Prevalence { prevalence: f64, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub n: usize,
    pub share: f64,
    pub features: Vec<(String, FeatureStat)>,
}

/// Cohort statistics stratified by outcome. A class with no rows is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub positive: Option<ClassSummary>,
    pub negative: Option<ClassSummary>,
}

impl CohortSummary {
    pub fn stat(&self, positive: bool, feature: &str) -> Option<&FeatureStat> {
        let class = if positive { self.positive.as_ref() } else { self.negative.as_ref() }?;
        class.features.iter().find(|(n, _)| n == feature).map(|(_, s)| s)
    }
}

pub fn summarize(table: &DataTable) -> Result<CohortSummary, DatasetError> {
    let n = table.n_rows();
    if n == 0 {
        return Err(DatasetError::EmptyTable);
    }
    let class = |label: u8| -> Option<ClassSummary> {
        let idx: Vec<usize> = (0..n).filter(|&i| table.target()[i] == label).collect();
        if idx.is_empty() {
            return None;
        }
        let features = table
            .schema()
            .features()
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let vals: Vec<f64> = idx.iter().map(|&i| table.value(i, j)).collect();
                let stat = match f.kind {
                    FeatureKind::Binary => {
                        let count = vals.iter().filter(|&&v| v == 1.0).count();
                        FeatureStat::Prevalence { prevalence: count as f64 / vals.len() as f64, count }
                    }
                    _ => FeatureStat::Continuous { mean: math::mean(&vals), sd: math::pop_sd(&vals) },
                };
                (f.name.clone(), stat)
            })
            .collect();
        Some(ClassSummary { n: idx.len(), share: idx.len() as f64 / n as f64, features })
    };
    Ok(CohortSummary { positive: class(1), negative: class(0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureGroup, FeatureSchema, Schema};

    fn table(bmi: &[f64], smoker: &[f64], target: &[u8]) -> DataTable {
        let schema = Schema::new(vec![
            FeatureSchema::new("BMI", FeatureKind::Numeric, FeatureGroup::Aggregated),
            FeatureSchema::new("Smoker", FeatureKind::Binary, FeatureGroup::Behavioural),
        ])
        .unwrap();
        DataTable::new(
            schema,
            bmi.iter().zip(smoker).map(|(&a, &b)| vec![a, b]).collect(),
            target.to_vec(),
            (0..bmi.len()).map(|i| i.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn singleton_class() {
        let s = summarize(&table(&[28.8, 25.0, 26.0], &[1.0, 0.0, 1.0], &[1, 0, 0])).unwrap();
        assert_eq!(s.stat(true, "BMI"), Some(&FeatureStat::Continuous { mean: 28.8, sd: 0.0 }));
        assert_eq!(s.stat(true, "Smoker"), Some(&FeatureStat::Prevalence { prevalence: 1.0, count: 1 }));
    }

    #[test]
    fn population_sd() {
        let s = summarize(&table(&[26.0, 30.0, 0.0], &[0.0, 1.0, 0.0], &[1, 1, 0])).unwrap();
        assert_eq!(s.stat(true, "BMI"), Some(&FeatureStat::Continuous { mean: 28.0, sd: 2.0 }));
        assert_eq!(s.stat(true, "Smoker"), Some(&FeatureStat::Prevalence { prevalence: 0.5, count: 1 }));
        assert_eq!(s.positive.as_ref().unwrap().n + s.negative.as_ref().unwrap().n, 3);
    }

    #[test]
    fn one_class_only() {
        let s = summarize(&table(&[1.0], &[0.0], &[0])).unwrap();
        assert!(s.positive.is_none());
        assert_eq!(s.negative.unwrap().n, 1);
    }
}
