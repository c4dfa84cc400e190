//! Plant a miscalibration, recover it with logit-linear recalibration and
//! compare the diagnostics before and after.
//!
//! `cargo run --release --example recalibration -- [reliability.svg]`

use calexplain::calib;
use calexplain::eval;
use calexplain::rng;
use calexplain::svg::{self, Band, Series};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut r = rng::rng_for(3);
    let (mut y, mut raw) = (Vec::new(), Vec::new());
    for _ in 0..10_000 {
        let z: f64 = StandardNormal.sample(&mut r);
        let l = -1.5 + 1.2 * z;
        y.push((r.random::<f64>() < sigmoid(l)) as u8);
        // raw scores are too timid: half the true logit, shifted
        raw.push(sigmoid(0.5 * l + 0.3));
    }

    let rec = calib::fit_recalibrator(&y, &raw)?;
    println!("fitted recalibrator: a = {:.3}, b = {:.3} (planted -0.6, 2.0)", rec.intercept, rec.slope);
    let cal = rec.apply_all(&raw);

    for (name, p) in [("raw", &raw), ("calibrated", &cal)] {
        let si = calib::slope_intercept(&y, p)?;
        let hl = calib::hosmer_lemeshow(&y, p, 10)?;
        println!(
            "{name:<11} AUC {:.4}  Brier {:.5}  slope {:.3}  intercept {:+.3}  HL {:.1} (p {:.2e})",
            eval::auc(&y, p)?,
            eval::brier(&y, p)?,
            si.slope,
            si.intercept,
            hl.statistic,
            hl.p_value
        );
    }

    let before = calib::loess_curve(&y, &raw, 0.75, 50)?;
    let after = calib::loess_curve(&y, &cal, 0.75, 50)?;
    let doc = svg::line_plot(
        "Reliability",
        "predicted",
        "observed",
        &[
            Series { label: "raw", x: &before.grid, y: &before.smoothed_observed, color: svg::BLUE },
            Series { label: "calibrated", x: &after.grid, y: &after.smoothed_observed, color: svg::ORANGE },
        ],
        &[
            Band { x: &before.grid, lo: &before.ci_lo, hi: &before.ci_hi, color: svg::BLUE },
            Band { x: &after.grid, lo: &after.ci_lo, hi: &after.ci_hi, color: svg::ORANGE },
        ],
        true,
    );
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, doc)?;
        println!("wrote {path}");
    }
    Ok(())
}
