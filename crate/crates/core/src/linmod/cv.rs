use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lambda_max, path_on_grid, LinmodError, PathSpec};
use crate::dataset::DataTable;
use crate::{eval, math, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Penalty with the highest mean AUC (largest penalty on ties).
    #[default]
    MaxAuc,
    /// Largest penalty whose mean AUC is within one standard error of the best.
    OneSe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub repeats: usize,
    pub path: PathSpec,
    pub seed: u64,
    pub rule: SelectionRule,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { folds: 10, repeats: 10, path: PathSpec::default(), seed: 0, rule: SelectionRule::MaxAuc }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Per penalty: one AUC per (repeat, fold), repeat-major. When `pooled`,
    /// one AUC per repeat computed on the pooled out-of-fold predictions.
    pub fold_aucs: Vec<Vec<f64>>,
    pub mean_auc: Vec<f64>,
    pub sd_auc: Vec<f64>,
    pub selected_index: usize,
    pub selected_lambda: f64,
    pub rule: SelectionRule,
    pub folds: usize,
    pub repeats: usize,
    pub pooled: bool,
    pub seed: u64,
    /// Out-of-fold predictions at the selected penalty, one row-ordered vector per repeat.
    #[serde(skip)]
    pub selected_oof: Vec<Vec<f64>>,
    /// Fold label of every row, one vector per repeat.
    #[serde(skip)]
    pub assignments: Vec<Vec<usize>>,
}

/// Stratified fold labels for `target`: each class is shuffled on its own and
/// dealt round-robin, the negative class continuing where the positives stopped.
pub fn stratified_folds(target: &[u8], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::rng_for(seed);
    let mut pos: Vec<usize> = (0..target.len()).filter(|&i| target[i] == 1).collect();
    let mut neg: Vec<usize> = (0..target.len()).filter(|&i| target[i] == 0).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assignment = vec![0; target.len()];
    for (k, &i) in pos.iter().chain(&neg).enumerate() {
        assignment[i] = k % folds;
    }
    assignment
}

/// AUCs of one repeat's out-of-fold predictions: one per fold, or a single
/// pooled AUC over all rows.
pub fn repeat_aucs(
    target: &[u8],
    assignment: &[usize],
    oof: &[f64],
    folds: usize,
    pooled: bool,
) -> Result<Vec<f64>, LinmodError> {
    if pooled {
        return Ok(vec![eval::auc(target, oof)?]);
    }
    (0..folds)
        .map(|f| {
            let idx: Vec<usize> = (0..target.len()).filter(|&i| assignment[i] == f).collect();
            let labels: Vec<u8> = idx.iter().map(|&i| target[i]).collect();
            let scores: Vec<f64> = idx.iter().map(|&i| oof[i]).collect();
            Ok(eval::auc(&labels, &scores)?)
        })
        .collect()
}

struct FoldOutcome {
    held_out: Vec<usize>,
    /// Per penalty, predictions for `held_out` rows.
    predictions: Vec<Vec<f64>>,
}

/// Repeated stratified k-fold cross-validation of a LASSO path, scored by AUC.
///
/// The penalty grid comes from the full table's `lambda_max`, so every fold is
/// scored on the same grid. Each repeat draws fold labels from a seed derived
/// from `(seed, repeat)`; (repeat, fold) tasks run in parallel and are reduced
/// in a fixed order, so the result is independent of thread count.
pub fn cross_validate(train: &DataTable, opts: &CvOptions) -> Result<CvResult, LinmodError> {
    opts.path.validate()?;
    let n = train.n_rows();
    if opts.folds < 2 || opts.folds > n {
        return Err(LinmodError::BadParameter(format!("folds must lie in [2, {n}]")));
    }
    if opts.repeats == 0 {
        return Err(LinmodError::BadParameter("repeats must be positive".into()));
    }
    let n_pos = train.n_positive();
    for (class, count) in [(1u8, n_pos), (0u8, n - n_pos)] {
        if count < 2 {
            return Err(LinmodError::TooFewPerClass { class, count, needed: 2 });
        }
    }
    let pooled = n_pos.min(n - n_pos) < opts.folds;
    let lambdas = opts.path.grid(lambda_max(train)?);

    let assignments: Vec<Vec<usize>> = (0..opts.repeats)
        .map(|r| stratified_folds(train.target(), opts.folds, rng::derive_seed(opts.seed, r as u64)))
        .collect();
    let tasks: Vec<(usize, usize)> =
        (0..opts.repeats).flat_map(|r| (0..opts.folds).map(move |f| (r, f))).collect();

    let outcomes: Vec<FoldOutcome> = tasks
        .par_iter()
        .map(|&(r, f)| {
            let (fit_idx, held_out): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assignments[r][i] != f);
            let path = path_on_grid(&train.subset(&fit_idx), &lambdas, opts.path.fit)?;
            let rows: Vec<&[f64]> = held_out.iter().map(|&i| train.row(i)).collect();
            let predictions = (0..path.len())
                .map(|k| path.model(k).predict_proba(rows.iter().copied()))
                .collect::<Result<_, _>>()?;
            Ok(FoldOutcome { held_out, predictions })
        })
        .collect::<Result<_, LinmodError>>()?;

    // per repeat and penalty, out-of-fold predictions in row order
    let oof: Vec<Vec<Vec<f64>>> = (0..opts.repeats)
        .map(|r| {
            (0..lambdas.len())
                .map(|k| {
                    let mut v = vec![0.0; n];
                    for o in &outcomes[r * opts.folds..(r + 1) * opts.folds] {
                        for (t, &i) in o.held_out.iter().enumerate() {
                            v[i] = o.predictions[k][t];
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();
    let mut fold_aucs = vec![Vec::new(); lambdas.len()];
    for (r, per_lambda) in oof.iter().enumerate() {
        for (k, aucs) in fold_aucs.iter_mut().enumerate() {
            aucs.extend(repeat_aucs(train.target(), &assignments[r], &per_lambda[k], opts.folds, pooled)?);
        }
    }

    let mean_auc: Vec<f64> = fold_aucs.iter().map(|a| math::mean(a)).collect();
    let sd_auc: Vec<f64> = fold_aucs.iter().map(|a| math::sample_sd(a)).collect();
    let best = (0..lambdas.len()).fold(0, |b, k| if mean_auc[k] > mean_auc[b] { k } else { b });
    let selected_index = match opts.rule {
        SelectionRule::MaxAuc => best,
        SelectionRule::OneSe => {
            let se = sd_auc[best] / (fold_aucs[best].len() as f64).sqrt();
            (0..=best).find(|&k| mean_auc[k] >= mean_auc[best] - se).unwrap_or(best)
        }
    };

    Ok(CvResult {
        selected_lambda: lambdas[selected_index],
        lambdas,
        fold_aucs,
        mean_auc,
        sd_auc,
        selected_index,
        rule: opts.rule,
        folds: opts.folds,
        repeats: opts.repeats,
        pooled,
        seed: opts.seed,
        selected_oof: oof.into_iter().map(|mut per_lambda| per_lambda.swap_remove(selected_index)).collect(),
        assignments,
    })
}
