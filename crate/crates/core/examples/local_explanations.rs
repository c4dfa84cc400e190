//! Break-down, Shapley and ceteris-paribus explanations of one patient under
//! the raw and the recalibrated model.
//!
//! `cargo run --release --example local_explanations`

use calexplain::calib;
use calexplain::dataset::{self, SyntheticSpec};
use calexplain::explain::{self, Attribution, Predictor};
use calexplain::linmod::{self, FitOptions};

fn top(a: &Attribution, k: usize) -> Vec<String> {
    let mut e: Vec<_> = a.entries.iter().collect();
    e.sort_by(|x, y| y.contribution.abs().total_cmp(&x.contribution.abs()));
    e.iter().take(k).map(|e| format!("{} {:+.4}", e.feature, e.contribution)).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = dataset::synthesize(&SyntheticSpec::screening_demo(6000, 5))?;
    let (rest, background) = dataset::hold_out(&table, 100, 5)?;
    let (train, calib_rows) = dataset::split(&rest, 0.7, 5)?;

    // fit on a class-balanced sample so the raw outputs are badly calibrated
    let pos: Vec<usize> = (0..train.n_rows()).filter(|&i| train.target()[i] == 1).collect();
    let neg: Vec<usize> = (0..train.n_rows()).filter(|&i| train.target()[i] == 0).take(pos.len()).collect();
    let balanced = train.subset(&[pos, neg].concat());
    let lmax = linmod::lambda_max(&balanced)?;
    let model = linmod::fit(&balanced, 0.03 * lmax, FitOptions::default())?;
    let rec = calib::fit_recalibrator(calib_rows.target(), &model.predict_table(&calib_rows)?)?;

    let raw = Predictor::new(model.clone());
    let cal = Predictor::calibrated(model, rec);
    let patient = dataset::use_case_patient(&train);

    for (name, pred) in [("uncalibrated", &raw), ("calibrated", &cal)] {
        let bd = explain::break_down(pred, &background, &patient, Some("use_case"))?;
        let shap = explain::shap_sampling(pred, &background, &patient, Some("use_case"), 50, 9)?;
        println!("{name}: baseline {:.4} -> prediction {:.4}", bd.baseline, bd.prediction);
        println!("  break-down top 5: {}", top(&bd, 5).join(", "));
        println!("  shap top 5:       {}", top(&shap.attribution(), 5).join(", "));

        let prof = explain::ceteris_paribus(pred, &train, &patient, "BMI", 11, Some((18.0, 38.0)))?;
        let line: Vec<String> =
            prof.grid.iter().zip(&prof.predictions).map(|(x, p)| format!("{x:.1}:{p:.3}")).collect();
        println!("  BMI profile: {}", line.join(" "));
    }
    Ok(())
}
