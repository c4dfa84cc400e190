//! Warm-started LASSO path and repeated stratified cross-validation.
//!
//! `cargo run --release --example lasso_path`

use calexplain::dataset::{self, SyntheticSpec};
use calexplain::linmod::{self, CvOptions, PathSpec, SelectionRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = dataset::synthesize(&SyntheticSpec::screening_demo(4000, 7))?;
    let (train, test) = dataset::split(&table, 0.8, 7)?;

    let spec = PathSpec { nlambda: 30, lambda_min_ratio: 0.01, ..Default::default() };
    let path = linmod::path(&train, &spec)?;
    println!("{:>10} {:>6}", "lambda", "nnz");
    for k in (0..path.len()).step_by(3) {
        println!("{:>10.5} {:>6}", path.lambdas[k], path.nnz(k));
    }

    for rule in [SelectionRule::MaxAuc, SelectionRule::OneSe] {
        let opts = CvOptions { folds: 5, repeats: 3, path: spec, seed: 1, rule };
        let cv = linmod::cross_validate(&train, &opts)?;
        let model = linmod::fit(&train, cv.selected_lambda, spec.fit)?;
        let auc = calexplain::eval::auc(test.target(), &model.predict_table(&test)?)?;
        println!(
            "\n{rule:?}: lambda {:.5}, CV AUC {:.4} (sd {:.4}), {} features, test AUC {auc:.4}",
            cv.selected_lambda,
            cv.mean_auc[cv.selected_index],
            cv.sd_auc[cv.selected_index],
            model.nnz()
        );
        let mut kept: Vec<(&str, f64)> = model
            .feature_names
            .iter()
            .zip(&model.std_coefficients())
            .filter(|(_, b)| **b != 0.0)
            .map(|(n, b)| (n.as_str(), *b))
            .collect();
        kept.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        for (name, b) in kept.iter().take(5) {
            println!("  {name:<24} {b:+.3} per sd");
        }
    }
    Ok(())
}
