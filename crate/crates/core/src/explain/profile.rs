use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExplainError, Model, Predictor};
use crate::dataset::{DataTable, FeatureKind};

/// Predictions along one feature with everything else held at the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpProfile {
    pub feature: String,
    pub grid: Vec<f64>,
    pub predictions: Vec<f64>,
    pub instance_value: f64,
    pub instance_prediction: f64,
}

impl CpProfile {
    /// Position of the instance's own value in the grid.
    pub fn instance_index(&self) -> usize {
        self.grid.iter().position(|&g| g == self.instance_value).expect("grid holds the instance value")
    }
}

/// Ceteris-paribus profile of `feature` over `grid_size` evenly spaced values
/// plus the instance's own value.
///
/// `range` defaults to the feature's observed range in `training`, which also
/// supplies the schema.
pub fn ceteris_paribus<M: Model>(
    pred: &Predictor<M>,
    training: &DataTable,
    instance: &[f64],
    feature: &str,
    grid_size: usize,
    range: Option<(f64, f64)>,
) -> Result<CpProfile, ExplainError> {
    let schema = training.schema();
    let j = schema.index_of(feature).ok_or_else(|| ExplainError::UnknownFeature(feature.to_string()))?;
    if schema.get(j).kind == FeatureKind::Binary {
        return Err(ExplainError::BinaryFeature(feature.to_string()));
    }
    if instance.len() != schema.len() {
        return Err(ExplainError::WidthMismatch { expected: schema.len(), got: instance.len() });
    }
    if grid_size < 2 {
        return Err(ExplainError::BadParameter("grid_size must be at least 2".into()));
    }
    let (lo, hi) = match range {
        Some(r) => r,
        None if training.n_rows() > 0 => training.column_range(j),
        None => return Err(ExplainError::EmptyBackground),
    };
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(ExplainError::BadParameter(format!("bad range [{lo}, {hi}]")));
    }

    let step = (hi - lo) / (grid_size - 1) as f64;
    let mut grid: Vec<f64> =
        (0..grid_size).map(|k| if k + 1 == grid_size { hi } else { lo + k as f64 * step }).collect();
    let own = instance[j];
    if !grid.contains(&own) {
        grid.push(own);
        grid.sort_by(f64::total_cmp);
    }
    grid.dedup();

    let predictions: Vec<f64> = grid
        .par_iter()
        .map(|&v| {
            let mut row = instance.to_vec();
            row[j] = v;
            pred.predict(&row)
        })
        .collect();
    Ok(CpProfile {
        feature: feature.to_string(),
        grid,
        predictions,
        instance_value: own,
        instance_prediction: pred.predict(instance),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::Recalibrator;
    use crate::dataset::{synthesize, use_case_patient, SyntheticSpec};
    use crate::linmod::{fit, FitOptions};

    #[test]
    fn use_case_bmi_profile() {
        let train = synthesize(&SyntheticSpec::screening_demo(1500, 3)).unwrap();
        let model = fit(&train, 0.01, FitOptions::default()).unwrap();
        let patient = use_case_patient(&train);
        let pred = Predictor::new(model.clone());
        let cp = ceteris_paribus(&pred, &train, &patient, "BMI", 101, None).unwrap();
        let k = cp.instance_index();
        assert_eq!(cp.grid[k], 28.04);
        assert_eq!(cp.predictions[k], pred.predict(&patient));
        assert_eq!(cp.instance_prediction, pred.predict(&patient));
        assert!(cp.grid.windows(2).all(|w| w[0] < w[1]));

        let bmi = train.schema().index_of("BMI").unwrap();
        if model.coefficients[bmi] > 0.0 {
            assert!(cp.predictions.windows(2).all(|w| w[0] < w[1]));
        }

        let cal = Predictor::calibrated(model, Recalibrator::logit_linear(-0.4, 1.7));
        let cp2 = ceteris_paribus(&cal, &train, &patient, "BMI", 101, None).unwrap();
        let argsort = |v: &[f64]| {
            let mut o: Vec<usize> = (0..v.len()).collect();
            o.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            o
        };
        assert_eq!(argsort(&cp.predictions), argsort(&cp2.predictions));
    }

    #[test]
    fn profile_errors() {
        let train = synthesize(&SyntheticSpec::screening_demo(200, 4)).unwrap();
        let pred = Predictor::new(|_: &[f64]| 0.5);
        let x = train.row(0).to_vec();
        assert_eq!(
            ceteris_paribus(&pred, &train, &x, "Female", 101, None).unwrap_err(),
            ExplainError::BinaryFeature("Female".into())
        );
        assert_eq!(
            ceteris_paribus(&pred, &train, &x, "Height", 101, None).unwrap_err(),
            ExplainError::UnknownFeature("Height".into())
        );
        let cp = ceteris_paribus(&pred, &train, &x, "Age", 11, Some((60.0, 70.0))).unwrap();
        assert!(cp.grid.contains(&x[0]) && cp.grid.contains(&60.0) && cp.grid.contains(&70.0));
    }
}
