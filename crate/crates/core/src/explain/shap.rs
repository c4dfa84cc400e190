use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Attribution, AttributionMethod, ExplainError, Model, PlugIn, Predictor};
use crate::dataset::DataTable;
use crate::rng;

/// Subset enumeration visits `2^p` expectations.
pub const MAX_EXACT_FEATURES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapResult {
    pub instance_id: Option<String>,
    pub feature_names: Vec<String>,
    pub instance: Vec<f64>,
    pub baseline: f64,
    pub prediction: f64,
    pub mean: Vec<f64>,
    /// Spread of a feature's contribution across orderings: the sample sd over
    /// the drawn permutations, or the exact sd over all orderings.
    pub sd: Vec<f64>,
    /// Number of orderings averaged (`p!` when exact).
    pub permutations: u64,
    pub seed: Option<u64>,
    pub exact: bool,
}

impl ShapResult {
    /// Entries ordered by decreasing |mean| (ties keep schema order).
    pub fn attribution(&self) -> Attribution {
        let mut order: Vec<usize> = (0..self.mean.len()).collect();
        order.sort_by(|&a, &b| self.mean[b].abs().total_cmp(&self.mean[a].abs()));
        Attribution {
            instance_id: self.instance_id.clone(),
            baseline: self.baseline,
            prediction: self.prediction,
            entries: order
                .into_iter()
                .map(|j| super::AttributionEntry {
                    feature_index: j,
                    feature: self.feature_names[j].clone(),
                    value: self.instance[j],
                    contribution: self.mean[j],
                })
                .collect(),
            method: AttributionMethod::Shap,
        }
    }
}

fn result_shell<M: Model>(
    plug: &PlugIn<'_, M>,
    background: &DataTable,
    instance: &[f64],
    instance_id: Option<&str>,
    baseline: f64,
) -> ShapResult {
    ShapResult {
        instance_id: instance_id.map(str::to_string),
        feature_names: background.schema().names(),
        instance: instance.to_vec(),
        baseline,
        prediction: plug.pred.predict(instance),
        mean: Vec::new(),
        sd: Vec::new(),
        permutations: 0,
        seed: None,
        exact: false,
    }
}

/// Shapley values averaged over `permutations` random feature orderings.
///
/// Ordering `b` is drawn from a generator seeded by `(seed, b)`, so the result
/// does not depend on how the orderings are scheduled across threads.
pub fn shap_sampling<M: Model>(
    pred: &Predictor<M>,
    background: &DataTable,
    instance: &[f64],
    instance_id: Option<&str>,
    permutations: usize,
    seed: u64,
) -> Result<ShapResult, ExplainError> {
    let plug = PlugIn::new(pred, background, instance)?;
    if permutations == 0 {
        return Err(ExplainError::BadParameter("permutations must be positive".into()));
    }
    let p = instance.len();
    let draws: Vec<(f64, Vec<f64>)> = (0..permutations as u64)
        .into_par_iter()
        .map(|b| {
            let mut order: Vec<usize> = (0..p).collect();
            order.shuffle(&mut rng::rng_for_stream(seed, b));
            let steps = plug.walk(&order);
            let mut contrib = vec![0.0; p];
            for (k, &j) in order.iter().enumerate() {
                contrib[j] = steps[k + 1] - steps[k];
            }
            (steps[0], contrib)
        })
        .collect();

    let baseline = draws[0].0;
    let mut result = result_shell(&plug, background, instance, instance_id, baseline);
    let b = permutations as f64;
    result.mean = (0..p).map(|j| draws.iter().map(|d| d.1[j]).sum::<f64>() / b).collect();
    result.sd = (0..p)
        .map(|j| {
            if permutations < 2 {
                return 0.0;
            }
            let m = result.mean[j];
            (draws.iter().map(|d| (d.1[j] - m).powi(2)).sum::<f64>() / (b - 1.0)).sqrt()
        })
        .collect();
    result.permutations = permutations as u64;
    result.seed = Some(seed);
    Ok(result)
}

/// Exact Shapley values by enumerating all `2^p` feature subsets.
pub fn shap_exact<M: Model>(
    pred: &Predictor<M>,
    background: &DataTable,
    instance: &[f64],
    instance_id: Option<&str>,
) -> Result<ShapResult, ExplainError> {
    let plug = PlugIn::new(pred, background, instance)?;
    let p = instance.len();
    if p > MAX_EXACT_FEATURES {
        return Err(ExplainError::TooManyFeatures { p, max: MAX_EXACT_FEATURES });
    }
    let values: Vec<f64> = (0..1usize << p)
        .into_par_iter()
        .map(|s| {
            let mask: Vec<bool> = (0..p).map(|j| s >> j & 1 == 1).collect();
            plug.expectation(&mask)
        })
        .collect();

    // weight of a predecessor set of size k: k! (p - k - 1)! / p!
    let mut fact = vec![1.0f64; p + 1];
    for k in 1..=p {
        fact[k] = fact[k - 1] * k as f64;
    }
    let weight: Vec<f64> = (0..p).map(|k| fact[k] * fact[p - k - 1] / fact[p]).collect();

    let mut mean = vec![0.0; p];
    let mut sd = vec![0.0; p];
    for j in 0..p {
        let bit = 1usize << j;
        let marginal = |s: usize| values[s | bit] - values[s];
        let subsets = || (0..1usize << p).filter(move |s| s & bit == 0);
        let phi: f64 = subsets().map(|s| weight[s.count_ones() as usize] * marginal(s)).sum();
        let var: f64 = subsets().map(|s| weight[s.count_ones() as usize] * (marginal(s) - phi).powi(2)).sum();
        mean[j] = phi;
        sd[j] = var.max(0.0).sqrt();
    }

    let mut result = result_shell(&plug, background, instance, instance_id, values[0]);
    result.mean = mean;
    result.sd = sd;
    result.permutations = fact[p] as u64;
    result.exact = true;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::explain::{break_down, expected_prediction};

    /// Average of sequential contributions over all p! orderings.
    fn brute_force(f: &dyn Fn(&[f64]) -> f64, bg: &DataTable, x: &[f64]) -> Vec<f64> {
        fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.clone();
                let head = rest.remove(i);
                for mut tail in perms(rest) {
                    tail.insert(0, head);
                    out.push(tail);
                }
            }
            out
        }
        let ce = |fixed: &[usize]| {
            bg.rows()
                .map(|r| {
                    let mut z = r.to_vec();
                    for &j in fixed {
                        z[j] = x[j];
                    }
                    f(&z)
                })
                .sum::<f64>()
                / bg.n_rows() as f64
        };
        let p = x.len();
        let all = perms((0..p).collect());
        let mut phi = vec![0.0; p];
        for order in &all {
            for k in 0..p {
                phi[order[k]] += (ce(&order[..=k]) - ce(&order[..k])) / all.len() as f64;
            }
        }
        phi
    }

    #[test]
    fn exact_matches_permutation_enumeration() {
        let bg = table(random_rows(5, 3, 11));
        let f = logistic(vec![1.1, -0.9, 0.5]);
        let x = [1.2, 0.4, -1.6];
        let s = shap_exact(&Predictor::new(&f), &bg, &x, None).unwrap();
        let oracle = brute_force(&f, &bg, &x);
        for j in 0..3 {
            assert!((s.mean[j] - oracle[j]).abs() < 1e-12, "{j}: {} vs {}", s.mean[j], oracle[j]);
        }
        assert_eq!(s.permutations, 6);
        assert!(s.attribution().efficiency_gap().abs() < 1e-9);
    }

    #[test]
    fn single_feature() {
        let bg = table(random_rows(4, 1, 12));
        let pred = Predictor::new(logistic(vec![0.8]));
        let s = shap_exact(&pred, &bg, &[1.5], None).unwrap();
        let v0 = expected_prediction(&pred, &bg).unwrap();
        assert!((s.mean[0] - (pred.predict(&[1.5]) - v0)).abs() < 1e-15);
        assert_eq!(s.sd[0], 0.0);
    }

    #[test]
    fn symmetric_features_share_credit() {
        let rows: Vec<Vec<f64>> = random_rows(6, 1, 13).into_iter().map(|r| vec![r[0], r[0]]).collect();
        let bg = table(rows);
        let pred = Predictor::new(logistic(vec![0.9, 0.9]));
        let s = shap_exact(&pred, &bg, &[1.3, 1.3], None).unwrap();
        assert!((s.mean[0] - s.mean[1]).abs() < 1e-12);
    }

    #[test]
    fn sampling_close_to_exact() {
        let bg = table(random_rows(5, 8, 14));
        let pred = Predictor::new(logistic(vec![1.0, -0.7, 0.4, 0.0, 1.4, -0.2, 0.6, -1.1]));
        let x: Vec<f64> = random_rows(1, 8, 15).remove(0);
        let exact = shap_exact(&pred, &bg, &x, None).unwrap();
        for seed in 0..10 {
            let s = shap_sampling(&pred, &bg, &x, None, 200, seed).unwrap();
            for j in 0..8 {
                assert!((s.mean[j] - exact.mean[j]).abs() <= 0.02);
            }
            assert!(s.attribution().efficiency_gap().abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let bg = table(random_rows(8, 5, 16));
        let pred = Predictor::new(logistic(vec![0.3, 0.2, -0.5, 0.9, 0.1]));
        let x = [0.1, -0.2, 0.3, -0.4, 0.5];
        let a = shap_sampling(&pred, &bg, &x, None, 37, 99).unwrap();
        assert_eq!(a, shap_sampling(&pred, &bg, &x, None, 37, 99).unwrap());
        assert_ne!(a.mean, shap_sampling(&pred, &bg, &x, None, 37, 100).unwrap().mean);
    }

    #[test]
    fn additive_predictor_has_no_order_effects() {
        let bg = table(random_rows(9, 4, 17));
        let beta = [0.4, -1.0, 0.0, 2.5];
        let pred = Predictor::new(move |x: &[f64]| 0.1 + x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>());
        let x = [0.5, 0.5, -1.0, 1.0];
        let s = shap_sampling(&pred, &bg, &x, None, 25, 3).unwrap();
        assert!(s.sd.iter().all(|&v| v < 1e-12));
        let exact = shap_exact(&pred, &bg, &x, None).unwrap();
        let bd = break_down(&pred, &bg, &x, None).unwrap().contributions();
        for j in 0..4 {
            assert!((exact.mean[j] - bd[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn dummy_feature_zero_under_shap() {
        let mut rows = random_rows(7, 3, 18);
        for r in rows.iter_mut() {
            r[2] = -0.3;
        }
        let bg = table(rows);
        let pred = Predictor::new(logistic(vec![0.7, -0.4, 3.0]));
        let x = [0.2, 1.0, -0.3];
        assert!(shap_exact(&pred, &bg, &x, None).unwrap().mean[2].abs() <= 1e-12);
        assert!(shap_sampling(&pred, &bg, &x, None, 20, 1).unwrap().mean[2].abs() <= 1e-12);
    }

    #[test]
    fn too_many_features() {
        let bg = table(random_rows(2, 13, 19));
        let pred = Predictor::new(|_: &[f64]| 0.5);
        assert_eq!(
            shap_exact(&pred, &bg, &[0.0; 13], None).unwrap_err(),
            ExplainError::TooManyFeatures { p: 13, max: 12 }
        );
    }
}
