//! Discrimination and accuracy metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("labels contain only one class")]
    OneClassOnly,
    #[error("length mismatch: {0} labels vs {1} scores")]
    LengthMismatch(usize, usize),
    #[error("need at least two estimates, got {0}")]
    TooFewEstimates(usize),
    #[error("empty input")]
    Empty,
    #[error("level {0} is outside (0, 1)")]
    BadLevel(f64),
}

/// Mean of repeated-CV AUCs with an empirical percentile interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_estimates: usize,
    pub level: f64,
}

/// Area under the ROC curve as the Mann–Whitney statistic
/// `(concordant + 0.5 * tied) / (n1 * n0)`.
///
/// Sorts once and counts pairs per group of exactly equal scores, so the
/// result depends only on the ordering of `scores` (including ties).
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64, EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch(labels.len(), scores.len()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::OneClassOnly);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // 2 * (concordant + 0.5 * ties), kept integral.
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) q`).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean AUC with the `(1 - level) / 2` and `1 - (1 - level) / 2` empirical percentiles.
pub fn auc_ci(estimates: &[f64], level: f64) -> Result<AucSummary, EvalError> {
    if estimates.len() < 2 {
        return Err(EvalError::TooFewEstimates(estimates.len()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EvalError::BadLevel(level));
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(AucSummary {
        mean: math::shifted_mean(estimates),
        ci_lo: quantile_sorted(&sorted, tail),
        ci_hi: quantile_sorted(&sorted, 1.0 - tail),
        n_estimates: estimates.len(),
        level,
    })
}

/// Mean squared difference between probability and outcome.
pub fn brier(labels: &[u8], probs: &[f64]) -> Result<f64, EvalError> {
    if labels.len() != probs.len() {
        return Err(EvalError::LengthMismatch(labels.len(), probs.len()));
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(labels.iter().zip(probs).map(|(&y, &p)| (p - y as f64).powi(2)).sum::<f64>() / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// O(n^2) pair-counting reference.
    fn auc_pairs(labels: &[u8], scores: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn four_pair_example() {
        assert_eq!(auc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
        assert_eq!(auc_pairs(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]), 0.75);
    }

    #[test]
    fn separation_and_ties() {
        assert_eq!(auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(auc(&[0, 1, 0, 1], &[0.5; 4]).unwrap(), 0.5);
    }

    #[test]
    fn auc_errors() {
        assert_eq!(auc(&[1, 1], &[0.1, 0.2]), Err(EvalError::OneClassOnly));
        assert_eq!(auc(&[1, 0], &[0.1]), Err(EvalError::LengthMismatch(2, 1)));
    }

    #[test]
    fn ci_examples() {
        let s = auc_ci(&[0.7; 100], 0.95).unwrap();
        assert_eq!((s.mean, s.ci_lo, s.ci_hi), (0.7, 0.7, 0.7));
        let s = auc_ci(&[0.6, 0.8], 0.95).unwrap();
        assert!(s.ci_lo >= 0.6 && s.ci_hi <= 0.8 && s.ci_lo <= s.ci_hi);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let s = auc_ci(&grid, 0.95).unwrap();
        assert!((s.ci_lo - 0.025).abs() < 1e-12 && (s.ci_hi - 0.975).abs() < 1e-12);
        assert_eq!(auc_ci(&[0.5], 0.95), Err(EvalError::TooFewEstimates(1)));
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&[0, 1, 1], &[0.5; 3]).unwrap(), 0.25);
        assert_eq!(brier(&[0, 1], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((brier(&[1, 0], &[0.8, 0.4]).unwrap() - 0.10).abs() < 1e-15);
        assert_eq!(brier(&[], &[]), Err(EvalError::Empty));
        assert_eq!(brier(&[1], &[0.1, 0.2]), Err(EvalError::LengthMismatch(1, 2)));
    }

    #[test]
    fn brier_minimized_by_base_rate() {
        let labels = [1u8, 0, 0, 0, 1, 0, 0, 0, 0, 0];
        let base = 0.2;
        let at_base = brier(&labels, &[base; 10]).unwrap();
        for k in 0..=1000 {
            let c = k as f64 / 1000.0;
            assert!(brier(&labels, &[c; 10]).unwrap() >= at_base - 1e-15);
        }
    }

    fn labelled() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
        (2usize..500).prop_flat_map(|n| {
            (
                proptest::collection::vec(0u8..2, n),
                // coarse scores so ties are common
                proptest::collection::vec((0i32..20).prop_map(|v| v as f64 / 20.0), n),
            )
        })
    }

    proptest! {
        #[test]
        fn rank_auc_matches_pair_count((labels, scores) in labelled()) {
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let fast = auc(&labels, &scores).unwrap();
            prop_assert!((fast - auc_pairs(&labels, &scores)).abs() < 1e-12);
        }

        #[test]
        fn auc_label_flip_symmetry((labels, scores) in labelled()) {
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert_eq!(auc(&flipped, &neg).unwrap(), auc(&labels, &scores).unwrap());
        }

        #[test]
        fn auc_invariant_to_increasing_map((labels, scores) in labelled()) {
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s - 1.0).exp()).collect();
            prop_assert_eq!(auc(&labels, &mapped).unwrap(), auc(&labels, &scores).unwrap());
        }
    }
}
