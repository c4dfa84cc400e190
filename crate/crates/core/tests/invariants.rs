use calexplain::calib::{self, Recalibrator};
use calexplain::dataset::{DataTable, FeatureGroup, FeatureKind, FeatureSchema, Schema};
use calexplain::diff;
use calexplain::eval;
use calexplain::explain::{self, Predictor};
use calexplain::linmod::{self, CvOptions, PathSpec};
use proptest::prelude::*;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn table(rows: Vec<Vec<f64>>, target: Vec<u8>) -> DataTable {
    let p = rows[0].len();
    let schema = Schema::new(
        (0..p).map(|j| FeatureSchema::new(&format!("f{j}"), FeatureKind::Numeric, FeatureGroup::Physical)).collect(),
    )
    .unwrap();
    let ids = (0..rows.len()).map(|i| i.to_string()).collect();
    DataTable::new(schema, rows, target, ids).unwrap()
}

fn labelled_probs(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    prop::collection::vec((any::<bool>(), 0.001f64..0.999), n)
        .prop_filter("both classes", |v| v.iter().any(|x| x.0) && v.iter().any(|x| !x.0))
        .prop_map(|v| v.into_iter().map(|(y, p)| (y as u8, p)).unzip())
}

/// Coefficients, background rows and an instance for a p-feature logistic model.
fn explain_case() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..7).prop_flat_map(|p| {
        (
            prop::collection::vec(-1.5f64..1.5, p + 1),
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, p), 2..6),
            prop::collection::vec(-3.0f64..3.0, p),
        )
    })
}

fn logistic(coefs: Vec<f64>) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| sigmoid(coefs[0] + x.iter().zip(&coefs[1..]).map(|(a, b)| a * b).sum::<f64>())
}

fn background(rows: Vec<Vec<f64>>) -> DataTable {
    let target = (0..rows.len()).map(|i| (i % 2) as u8).collect();
    table(rows, target)
}

proptest! {
    #[test]
    fn recalibrator_maps_into_unit_interval_and_keeps_order(
        a in -4.0f64..4.0, b in 0.05f64..5.0, p in 1e-9f64..1.0, q in 1e-9f64..1.0,
    ) {
        let r = Recalibrator::logit_linear(a, b);
        for x in [r.apply(p), r.apply(q)] {
            prop_assert!(x > 0.0 && x < 1.0);
        }
        if p < q {
            prop_assert!(r.apply(p) <= r.apply(q));
        }
        prop_assert!(r.is_increasing());
        prop_assert!(!Recalibrator::logit_linear(a, -b).is_increasing());
    }

    #[test]
    fn auc_unchanged_by_increasing_recalibration((y, p) in labelled_probs(4..200), a in -3.0f64..3.0, b in 0.1f64..4.0) {
        let cal = Recalibrator::logit_linear(a, b).apply_all(&p);
        prop_assert_eq!(eval::auc(&y, &cal).unwrap(), eval::auc(&y, &p).unwrap());
    }

    #[test]
    fn auc_interval_is_ordered(est in prop::collection::vec(0.0f64..=1.0, 2..50), level in 0.5f64..0.99) {
        let s = eval::auc_ci(&est, level).unwrap();
        let (lo, hi) = est.iter().fold((1.0f64, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        prop_assert!(lo <= s.ci_lo && s.ci_lo <= s.ci_hi && s.ci_hi <= hi);
        prop_assert!(lo <= s.mean && s.mean <= hi);
        prop_assert_eq!(s.n_estimates, est.len());
    }

    #[test]
    fn auc_interval_brackets_mean_of_fold_aucs(est in prop::collection::vec(0.6f64..0.8, 10..100)) {
        // a percentile interval can miss the mean of very skewed sets; fold
        // AUCs of one penalty are not that skewed
        let s = eval::auc_ci(&est, 0.95).unwrap();
        prop_assert!(s.ci_lo <= s.mean && s.mean <= s.ci_hi);
    }

    #[test]
    fn hosmer_lemeshow_bins_cover_sample((y, p) in labelled_probs(30..300), seed in any::<u64>()) {
        let hl = calib::hosmer_lemeshow(&y, &p, 10).unwrap();
        prop_assert_eq!(hl.bins.iter().map(|b| b.n).sum::<usize>(), y.len());
        let stat: f64 = hl.bins.iter().map(|b| {
            let m = b.n as f64;
            let pbar = b.expected / m;
            (b.observed as f64 - b.expected).powi(2) / (m * pbar * (1.0 - pbar))
        }).sum();
        prop_assert!((stat - hl.statistic).abs() <= 1e-9 * stat.max(1.0));
        prop_assert!((0.0..=1.0).contains(&hl.p_value));

        // shuffling rows changes nothing
        let mut idx: Vec<usize> = (0..y.len()).collect();
        let mut s = seed;
        for i in (1..idx.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (s >> 33) as usize % (i + 1));
        }
        let y2: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        let p2: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
        prop_assert_eq!(calib::hosmer_lemeshow(&y2, &p2, 10).unwrap().statistic, hl.statistic);
    }

    #[test]
    fn loess_band_contains_fit((y, p) in labelled_probs(20..200), span in 0.3f64..1.0) {
        prop_assume!(p.iter().cloned().fold(f64::INFINITY, f64::min) < p.iter().cloned().fold(0.0, f64::max));
        let c = calib::loess_curve(&y, &p, span, 40).unwrap();
        prop_assert!(c.grid.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(c.rows().all(|[_, s, lo, hi]| lo <= s && s <= hi));
    }

    #[test]
    fn attributions_are_efficient((coefs, rows, x) in explain_case(), a in -2.0f64..2.0, b in 0.2f64..3.0) {
        let bg = background(rows);
        let p = x.len();
        let pred = Predictor::calibrated(logistic(coefs), Recalibrator::logit_linear(a, b));
        let bd = explain::break_down(&pred, &bg, &x, None).unwrap();
        let ex = explain::shap_exact(&pred, &bg, &x, None).unwrap();
        for attr in [&bd, &ex.attribution()] {
            prop_assert!(attr.efficiency_gap().abs() <= 1e-9);
            let mut seen: Vec<usize> = attr.entries.iter().map(|e| e.feature_index).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..p).collect::<Vec<_>>());
        }
        prop_assert!(ex.sd.iter().all(|s| *s >= 0.0));
        let y = pred.predict(&x);
        prop_assert!(y > 0.0 && y < 1.0);
    }

    #[test]
    fn profile_passes_through_instance((coefs, rows, x) in explain_case(), j in 0usize..2) {
        let bg = background(rows);
        let pred = Predictor::new(logistic(coefs));
        let name = format!("f{j}");
        let prof = explain::ceteris_paribus(&pred, &bg, &x, &name, 25, None).unwrap();
        prop_assert!(prof.grid.contains(&prof.instance_value));
        prop_assert!(prof.grid.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((prof.predictions[prof.instance_index()] - prof.instance_prediction).abs() <= 1e-12);
    }

    #[test]
    fn affine_output_change_keeps_additive_ranks(
        (coefs, rows, x) in explain_case(), scale in 0.1f64..3.0, shift in -1.0f64..1.0,
    ) {
        // identity link, additive: contributions scale by a common factor
        let c2 = coefs.clone();
        let f = move |v: &[f64]| c2[0] + v.iter().zip(&c2[1..]).map(|(a, b)| a * b).sum::<f64>();
        let c3 = coefs.clone();
        let g = move |v: &[f64]| shift + scale * (c3[0] + v.iter().zip(&c3[1..]).map(|(a, b)| a * b).sum::<f64>());
        let bg = background(rows);
        let a = explain::break_down(&Predictor::new(f), &bg, &x, None).unwrap();
        let b = explain::break_down(&Predictor::new(g), &bg, &x, None).unwrap();
        let ca = a.contributions();
        // near-ties may swap under rounding; skip them
        let mut mags: Vec<f64> = ca.iter().map(|c| c.abs()).collect();
        mags.sort_by(f64::total_cmp);
        prop_assume!(mags.windows(2).all(|w| w[1] - w[0] > 1e-9));
        let d = diff::compare(&a, &b, x.len()).unwrap();
        prop_assert_eq!(d.kendall_tau, 1.0);
        let ra = diff::rank_by_magnitude(&a).unwrap();
        let mut sorted = ra.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (1..=x.len()).collect::<Vec<_>>());
    }
}

fn sparse_problem(seed: u64, n: usize, p: usize) -> DataTable {
    // deterministic pseudo-data from a simple LCG
    let mut s = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut unif = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| 4.0 * unif() - 2.0).collect();
        let eta = x[0] - 0.8 * x[1] + 0.4 * x[2] - 0.3;
        y.push((unif() < sigmoid(eta)) as u8);
        rows.push(x);
    }
    table(rows, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn path_support_grows_with_small_reversals(seed in any::<u64>()) {
        let t = sparse_problem(seed, 200, 8);
        let spec = PathSpec { nlambda: 25, lambda_min_ratio: 0.01, ..Default::default() };
        let path = linmod::path(&t, &spec).unwrap();
        prop_assert!(path.lambdas.windows(2).all(|w| w[1] < w[0]));
        prop_assert_eq!(path.nnz(0), 0);
        let mut peak = 0;
        for k in 0..path.len() {
            peak = peak.max(path.nnz(k));
            prop_assert!(path.nnz(k) + 2 >= peak);
        }
        for k in 0..path.len() {
            let m = path.model(k);
            prop_assert!(m.predict_table(&t).unwrap().iter().all(|&q| q > 0.0 && q < 1.0));
        }
    }

    #[test]
    fn cv_lists_have_one_entry_per_fold(seed in any::<u64>(), folds in 2usize..5, repeats in 1usize..3) {
        let t = sparse_problem(seed, 150, 4);
        let opts = CvOptions {
            folds,
            repeats,
            path: PathSpec { nlambda: 6, lambda_min_ratio: 0.05, ..Default::default() },
            seed,
            rule: Default::default(),
        };
        let cv = linmod::cross_validate(&t, &opts).unwrap();
        for (k, aucs) in cv.fold_aucs.iter().enumerate() {
            let per = if cv.pooled { repeats } else { repeats * folds };
            prop_assert_eq!(aucs.len(), per);
            let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
            prop_assert!((mean - cv.mean_auc[k]).abs() <= 1e-12);
        }
        prop_assert_eq!(cv.selected_lambda, cv.lambdas[cv.selected_index]);
    }
}
