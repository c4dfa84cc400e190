//! Differences between explanations of the uncalibrated and calibrated model.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DataTable;
use crate::explain::{self, Attribution, AttributionMethod, ExplainError, Model, Predictor};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("attribution has no entries")]
    Empty,
    #[error("ranks are not a permutation of 1..=p")]
    NotPermutation,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two features to compare rankings, got {0}")]
    TooFewFeatures(usize),
    #[error("k = {k} is outside 1..={p}")]
    BadK { k: usize, p: usize },
    #[error("attributions cover different features or instances")]
    FeatureSetMismatch,
    #[error(transparent)]
    Explain(#[from] ExplainError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDiff {
    pub feature: String,
    pub rank_uncal: usize,
    pub rank_cal: usize,
    pub contribution_uncal: f64,
    pub contribution_cal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDiff {
    pub instance_id: Option<String>,
    /// In schema order.
    pub features: Vec<FeatureDiff>,
    pub kendall_tau: f64,
    pub topk_jaccard: f64,
    pub entered_topk: Vec<String>,
    pub left_topk: Vec<String>,
    pub sign_flips: Vec<String>,
    pub k: usize,
}

impl ExplanationDiff {
    pub fn is_flagged(&self, tau_threshold: f64) -> bool {
        !self.left_topk.is_empty() || self.kendall_tau < tau_threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMovement {
    pub feature: String,
    pub exits: usize,
    pub entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub n: usize,
    pub k: usize,
    pub method: AttributionMethod,
    pub tau_threshold: f64,
    pub mean_tau: f64,
    pub min_tau: f64,
    /// Counts of top-k Jaccard values in ten equal bins over [0, 1].
    pub jaccard_histogram: Vec<usize>,
    /// Per feature, in schema order.
    pub movements: Vec<FeatureMovement>,
    pub flagged: Vec<String>,
}

/// Rank (1 = largest) of each feature's |contribution|, indexed by feature
/// position; equal magnitudes rank in feature order.
pub fn rank_by_magnitude(attr: &Attribution) -> Result<Vec<usize>, DiffError> {
    let p = attr.entries.len();
    if p == 0 {
        return Err(DiffError::Empty);
    }
    let contrib = attr.contributions();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| contrib[b].abs().total_cmp(&contrib[a].abs()));
    let mut ranks = vec![0; p];
    for (r, &j) in order.iter().enumerate() {
        ranks[j] = r + 1;
    }
    Ok(ranks)
}

fn check_permutation(ranks: &[usize]) -> Result<(), DiffError> {
    let mut seen = vec![false; ranks.len()];
    for &r in ranks {
        if r == 0 || r > ranks.len() || std::mem::replace(&mut seen[r - 1], true) {
            return Err(DiffError::NotPermutation);
        }
    }
    Ok(())
}

/// Kendall tau-a between two rankings of the same items.
pub fn kendall_tau(ranks_a: &[usize], ranks_b: &[usize]) -> Result<f64, DiffError> {
    if ranks_a.len() != ranks_b.len() {
        return Err(DiffError::LengthMismatch(ranks_a.len(), ranks_b.len()));
    }
    let p = ranks_a.len();
    if p < 2 {
        return Err(DiffError::TooFewFeatures(p));
    }
    check_permutation(ranks_a)?;
    check_permutation(ranks_b)?;
    let mut score: i64 = 0;
    for i in 0..p {
        for j in i + 1..p {
            let a = ranks_a[i] < ranks_a[j];
            let b = ranks_b[i] < ranks_b[j];
            score += if a == b { 1 } else { -1 };
        }
    }
    Ok(score as f64 / (p * (p - 1) / 2) as f64)
}

fn top_k(ranks: &[usize], k: usize) -> BTreeSet<usize> {
    (0..ranks.len()).filter(|&j| ranks[j] <= k).collect()
}

/// Jaccard similarity of the two top-k feature sets.
pub fn topk_overlap(ranks_a: &[usize], ranks_b: &[usize], k: usize) -> Result<f64, DiffError> {
    if ranks_a.len() != ranks_b.len() {
        return Err(DiffError::LengthMismatch(ranks_a.len(), ranks_b.len()));
    }
    let p = ranks_a.len();
    if k == 0 || k > p {
        return Err(DiffError::BadK { k, p });
    }
    check_permutation(ranks_a)?;
    check_permutation(ranks_b)?;
    let (a, b) = (top_k(ranks_a, k), top_k(ranks_b, k));
    Ok(a.intersection(&b).count() as f64 / a.union(&b).count() as f64)
}

/// Compare two attributions of the same instance, reading movements in the
/// uncalibrated to calibrated direction.
pub fn compare(uncal: &Attribution, cal: &Attribution, k: usize) -> Result<ExplanationDiff, DiffError> {
    let p = uncal.entries.len();
    let names = |a: &Attribution| {
        let mut v = vec![String::new(); a.entries.len()];
        for e in &a.entries {
            if let Some(slot) = v.get_mut(e.feature_index) {
                *slot = e.feature.clone();
            }
        }
        v
    };
    let feature_names = names(uncal);
    if cal.entries.len() != p || names(cal) != feature_names || uncal.instance_id != cal.instance_id {
        return Err(DiffError::FeatureSetMismatch);
    }
    let ranks_u = rank_by_magnitude(uncal)?;
    let ranks_c = rank_by_magnitude(cal)?;
    let contrib_u = uncal.contributions();
    let contrib_c = cal.contributions();
    let kendall_tau = kendall_tau(&ranks_u, &ranks_c)?;
    let topk_jaccard = topk_overlap(&ranks_u, &ranks_c, k)?;
    let (top_u, top_c) = (top_k(&ranks_u, k), top_k(&ranks_c, k));
    let named = |set: Vec<usize>| set.into_iter().map(|j| feature_names[j].clone()).collect::<Vec<_>>();
    let sign_flips = (0..p)
        .filter(|&j| {
            let (a, b) = (contrib_u[j], contrib_c[j]);
            a.abs() > 1e-12 && b.abs() > 1e-12 && a.signum() != b.signum()
        })
        .collect();
    Ok(ExplanationDiff {
        instance_id: uncal.instance_id.clone(),
        features: (0..p)
            .map(|j| FeatureDiff {
                feature: feature_names[j].clone(),
                rank_uncal: ranks_u[j],
                rank_cal: ranks_c[j],
                contribution_uncal: contrib_u[j],
                contribution_cal: contrib_c[j],
            })
            .collect(),
        kendall_tau,
        topk_jaccard,
        entered_topk: named(top_c.difference(&top_u).copied().collect()),
        left_topk: named(top_u.difference(&top_c).copied().collect()),
        sign_flips: named(sign_flips),
        k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchOptions {
    pub method: AttributionMethod,
    pub k: usize,
    /// Orderings per instance when `method` is Shap.
    pub permutations: usize,
    pub seed: u64,
    pub tau_threshold: f64,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions { method: AttributionMethod::BreakDown, k: 10, permutations: 50, seed: 0, tau_threshold: 0.8 }
    }
}

fn explain_one<M: Model>(
    pred: &Predictor<M>,
    background: &DataTable,
    instance: &[f64],
    id: &str,
    opts: &BatchOptions,
    seed: u64,
) -> Result<Attribution, ExplainError> {
    match opts.method {
        AttributionMethod::BreakDown => explain::break_down(pred, background, instance, Some(id)),
        AttributionMethod::Shap => {
            explain::shap_sampling(pred, background, instance, Some(id), opts.permutations, seed).map(|s| s.attribution())
        }
    }
}

/// Explain every row of `instances` under both predictors and summarise the
/// differences. Shapley orderings for row `i` use a seed derived from
/// `(seed, i)`, shared by both predictors.
pub fn batch_compare<M: Model, N: Model>(
    pred_uncal: &Predictor<M>,
    pred_cal: &Predictor<N>,
    background: &DataTable,
    instances: &DataTable,
    opts: &BatchOptions,
) -> Result<(DiffSummary, Vec<ExplanationDiff>), DiffError> {
    let n = instances.n_rows();
    if n == 0 {
        return Err(DiffError::Empty);
    }
    let diffs: Vec<ExplanationDiff> = (0..n)
        .into_par_iter()
        .map(|i| {
            let id = &instances.row_ids()[i];
            let seed = rng::derive_seed(opts.seed, i as u64);
            let row = instances.row(i);
            let a = explain_one(pred_uncal, background, row, id, opts, seed)?;
            let b = explain_one(pred_cal, background, row, id, opts, seed)?;
            compare(&a, &b, opts.k)
        })
        .collect::<Result<_, DiffError>>()?;

    let names = instances.schema().names();
    let mut movements: Vec<FeatureMovement> =
        names.iter().map(|f| FeatureMovement { feature: f.clone(), exits: 0, entries: 0 }).collect();
    let mut histogram = vec![0; 10];
    for d in &diffs {
        histogram[((d.topk_jaccard * 10.0).floor() as usize).min(9)] += 1;
        for f in &d.left_topk {
            movements[instances.schema().index_of(f).unwrap()].exits += 1;
        }
        for f in &d.entered_topk {
            movements[instances.schema().index_of(f).unwrap()].entries += 1;
        }
    }
    let taus: Vec<f64> = diffs.iter().map(|d| d.kendall_tau).collect();
    let summary = DiffSummary {
        n,
        k: opts.k,
        method: opts.method,
        tau_threshold: opts.tau_threshold,
        mean_tau: taus.iter().sum::<f64>() / n as f64,
        min_tau: taus.iter().copied().fold(f64::INFINITY, f64::min),
        jaccard_histogram: histogram,
        movements,
        flagged: diffs
            .iter()
            .filter(|d| d.is_flagged(opts.tau_threshold))
            .map(|d| d.instance_id.clone().unwrap_or_default())
            .collect(),
    };
    Ok((summary, diffs))
}


#[cfg(test)]
mod tests {
    use super::fixtures::attribution;
    use super::*;
    use crate::calib::Recalibrator;
    use crate::explain::testutil::{random_rows, table};
    use proptest::prelude::*;

    #[test]
    fn rank_examples() {
        assert_eq!(rank_by_magnitude(&attribution(&[0.3, -0.5, 0.1])).unwrap(), vec![2, 1, 3]);
        assert_eq!(rank_by_magnitude(&attribution(&[0.2, -0.2, 0.2])).unwrap(), vec![1, 2, 3]);
        assert_eq!(rank_by_magnitude(&attribution(&[0.7])).unwrap(), vec![1]);
        assert_eq!(rank_by_magnitude(&attribution(&[])), Err(DiffError::Empty));
    }

    #[test]
    fn tau_examples() {
        assert_eq!(kendall_tau(&[1, 2, 3, 4], &[1, 2, 3, 4]).unwrap(), 1.0);
        assert_eq!(kendall_tau(&[1, 2, 3, 4], &[4, 3, 2, 1]).unwrap(), -1.0);
        assert!((kendall_tau(&[1, 2, 3, 4], &[2, 1, 3, 4]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(kendall_tau(&[1, 1, 3], &[1, 2, 3]), Err(DiffError::NotPermutation));
        assert_eq!(kendall_tau(&[1, 2], &[1, 2, 3]), Err(DiffError::LengthMismatch(2, 3)));
    }

    #[test]
    fn overlap_examples() {
        // features A..D at indices 0..3
        let a = [1, 2, 3, 4];
        let b = [4, 1, 2, 3];
        assert_eq!(topk_overlap(&a, &a, 3).unwrap(), 1.0);
        assert_eq!(topk_overlap(&a, &b, 3).unwrap(), 0.5);
        assert_eq!(topk_overlap(&[1, 2, 3, 4], &[3, 4, 1, 2], 2).unwrap(), 0.0);
        assert_eq!(topk_overlap(&a, &b, 5), Err(DiffError::BadK { k: 5, p: 4 }));
        assert_eq!(topk_overlap(&a, &b, 0), Err(DiffError::BadK { k: 0, p: 4 }));
    }

    #[test]
    fn rank_six_feature_leaves_top_ten() {
        // f5 is sixth by magnitude before, eleventh after
        let before: Vec<f64> = (0..14).map(|j| 1.0 - j as f64 * 0.05).collect();
        let mut after = before.clone();
        after[5] = 0.48;
        let d = compare(&attribution(&before), &attribution(&after), 10).unwrap();
        assert_eq!(d.features[5].rank_uncal, 6);
        assert_eq!(d.features[5].rank_cal, 11);
        assert_eq!(d.left_topk, vec!["f5".to_string()]);
        assert_eq!(d.entered_topk, vec!["f10".to_string()]);
    }

    #[test]
    fn sign_flip_detected() {
        let d = compare(&attribution(&[0.2, 0.1, 0.0]), &attribution(&[-0.2, 0.1, 1e-13]), 2).unwrap();
        assert_eq!(d.sign_flips, vec!["f0".to_string()]);
    }

    #[test]
    fn mismatched_features() {
        let mut b = attribution(&[0.1, 0.2]);
        b.entries[0].feature = "other".into();
        assert_eq!(compare(&attribution(&[0.1, 0.2]), &b, 1), Err(DiffError::FeatureSetMismatch));
    }

    fn contributions() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..15).prop_flat_map(|p| {
            (proptest::collection::vec(-1.0f64..1.0, p), proptest::collection::vec(-1.0f64..1.0, p))
        })
    }

    proptest! {
        #[test]
        fn self_comparison_is_identity((a, _) in contributions()) {
            let at = attribution(&a);
            let d = compare(&at, &at, (a.len() / 2).max(1)).unwrap();
            prop_assert_eq!(d.kendall_tau, 1.0);
            prop_assert_eq!(d.topk_jaccard, 1.0);
            prop_assert!(d.left_topk.is_empty() && d.entered_topk.is_empty() && d.sign_flips.is_empty());
        }

        #[test]
        fn flags_are_antisymmetric((a, b) in contributions()) {
            let k = (a.len() / 2).max(1);
            let ab = compare(&attribution(&a), &attribution(&b), k).unwrap();
            let ba = compare(&attribution(&b), &attribution(&a), k).unwrap();
            prop_assert_eq!(&ab.left_topk, &ba.entered_topk);
            prop_assert_eq!(&ab.entered_topk, &ba.left_topk);
            prop_assert!(ab.left_topk.iter().all(|f| !ab.entered_topk.contains(f)));
            prop_assert!((-1.0..=1.0).contains(&ab.kendall_tau));
        }
    }

    fn logistic(x: &[f64]) -> f64 {
        crate::math::sigmoid(0.9 * x[0] - 0.6 * x[1] + 0.3 * x[2] + 1.2 * x[3] - 0.1 * x[4])
    }

    #[test]
    fn identity_recalibrator_never_flags() {
        let bg = table(random_rows(15, 5, 1));
        let inst = table(random_rows(12, 5, 2));
        let uncal = Predictor::new(logistic);
        let cal = Predictor::calibrated(logistic, Recalibrator::identity());
        for method in [AttributionMethod::BreakDown, AttributionMethod::Shap] {
            let opts = BatchOptions { method, k: 3, permutations: 10, ..Default::default() };
            let (s, diffs) = batch_compare(&uncal, &cal, &bg, &inst, &opts).unwrap();
            assert_eq!(s.n, 12);
            assert!(s.flagged.is_empty());
            assert!(diffs.iter().all(|d| d.kendall_tau == 1.0));
        }
    }

    #[test]
    fn affine_rescaling_keeps_ranks() {
        let bg = table(random_rows(15, 5, 3));
        let inst = table(random_rows(10, 5, 4));
        let add = |x: &[f64]| 0.2 + 0.05 * x[0] - 0.03 * x[1] + 0.01 * x[2] + 0.04 * x[3] - 0.02 * x[4];
        let scaled = move |x: &[f64]| 0.1 + 0.7 * add(x);
        let (s, _) = batch_compare(&Predictor::new(add), &Predictor::new(scaled), &bg, &inst, &BatchOptions {
            k: 3,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.min_tau, 1.0);
    }

    #[test]
    fn batch_is_deterministic_and_bounded() {
        let bg = table(random_rows(15, 5, 5));
        let inst = table(random_rows(20, 5, 6));
        let uncal = Predictor::new(logistic);
        let cal = Predictor::calibrated(logistic, Recalibrator::logit_linear(-1.0, 2.5));
        let opts = BatchOptions { method: AttributionMethod::Shap, k: 2, permutations: 8, seed: 4, tau_threshold: 0.8 };
        let (s, diffs) = batch_compare(&uncal, &cal, &bg, &inst, &opts).unwrap();
        assert_eq!((s.clone(), diffs.clone()), batch_compare(&uncal, &cal, &bg, &inst, &opts).unwrap());
        assert_eq!(s.jaccard_histogram.iter().sum::<usize>(), 20);
        assert!(s.movements.iter().all(|m| m.exits <= 20 && m.entries <= 20));
        assert!(diffs.iter().all(|d| (-1.0..=1.0).contains(&d.kendall_tau)));
    }
}
