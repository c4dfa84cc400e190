//! Compare explanations of the raw and recalibrated model over a batch of
//! instances and list the features that move in or out of the top k.
//!
//! `cargo run --release --example explanation_diff`

use calexplain::calib::{self, Recalibrator};
use calexplain::dataset::{self, SyntheticSpec};
use calexplain::diff::{self, BatchOptions};
use calexplain::explain::Predictor;
use calexplain::linmod::{self, FitOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = dataset::synthesize(&SyntheticSpec::screening_demo(6000, 8))?;
    let (rest, holdout) = dataset::hold_out(&table, 100, 8)?;
    let (train, calib_rows) = dataset::split(&rest, 0.7, 8)?;
    // fitted on balanced classes, so recalibration has to pull every
    // prediction down by about two logits
    let pos: Vec<usize> = (0..train.n_rows()).filter(|&i| train.target()[i] == 1).collect();
    let neg: Vec<usize> = (0..train.n_rows()).filter(|&i| train.target()[i] == 0).take(pos.len()).collect();
    let balanced = train.subset(&[pos, neg].concat());
    let lmax = linmod::lambda_max(&balanced)?;
    let model = linmod::fit(&balanced, 0.03 * lmax, FitOptions::default())?;
    let rec = calib::fit_recalibrator(calib_rows.target(), &model.predict_table(&calib_rows)?)?;
    println!("recalibrator a = {:.3}, b = {:.3}", rec.intercept, rec.slope);

    let raw = Predictor::new(model.clone());
    for (name, r) in [("identity", Recalibrator::identity()), ("fitted", rec)] {
        let cal = Predictor::calibrated(model.clone(), r);
        let (summary, diffs) = diff::batch_compare(&raw, &cal, &holdout, &holdout, &BatchOptions::default())?;
        println!(
            "\n{name}: {} of {} flagged, mean tau {:.3}, min tau {:.3}",
            summary.flagged.len(),
            summary.n,
            summary.mean_tau,
            summary.min_tau
        );
        println!("  top-10 Jaccard histogram {:?}", summary.jaccard_histogram);
        let mut moves: Vec<_> = summary.movements.iter().filter(|m| m.exits + m.entries > 0).collect();
        moves.sort_by_key(|m| std::cmp::Reverse(m.exits + m.entries));
        for m in moves.iter().take(5) {
            println!("  {:<24} left top-10 {:>3}x, entered {:>3}x", m.feature, m.exits, m.entries);
        }
        let least = diffs.iter().min_by(|a, b| a.kendall_tau.total_cmp(&b.kendall_tau));
        if let Some(d) = least.filter(|d| d.kendall_tau < 1.0) {
            println!(
                "  least concordant {}: tau {:.3}, left {:?}, entered {:?}",
                d.instance_id.as_deref().unwrap_or("?"),
                d.kendall_tau,
                d.left_topk,
                d.entered_topk
            );
        }
    }
    Ok(())
}
