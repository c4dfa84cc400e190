//! Output recalibration and calibration diagnostics.
//!
//! Recalibration is logit-linear: `p' = sigmoid(a + b * logit(p))`, fitted as a
//! logistic regression of the outcome on the logit of the raw probability. The
//! same regression gives the calibration slope (`b`), while the calibration
//! intercept is the calibration-in-the-large term of the offset model
//! `logit P(y = 1) = a + logit(p)`.

mod hosmer;
mod loess;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

pub use hosmer::{hosmer_lemeshow, HlBin, HlTestResult};
pub use loess::{loess_curve, CalibrationCurve};

const NEWTON_MAX_ITER: usize = 100;
const GRADIENT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibError {
    #[error("labels contain only one class")]
    OneClassOnly,
    #[error("logit of the probabilities has zero variance")]
    Degenerate,
    #[error("length mismatch: {0} labels vs {1} probabilities")]
    LengthMismatch(usize, usize),
    #[error("Newton-Raphson did not converge (separable data?)")]
    NoConvergence,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("span {0} is outside (0, 1]")]
    BadSpan(f64),
    #[error("only {0} non-empty bins after merging tied probabilities; need at least 3")]
    TooFewBins(usize),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecalibratorKind {
    Identity,
    LogitLinear,
}

/// Map from raw probability to calibrated probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recalibrator {
    pub kind: RecalibratorKind,
    pub intercept: f64,
    pub slope: f64,
}

impl Recalibrator {
    pub fn identity() -> Self {
        Recalibrator { kind: RecalibratorKind::Identity, intercept: 0.0, slope: 1.0 }
    }

    pub fn logit_linear(intercept: f64, slope: f64) -> Self {
        Recalibrator { kind: RecalibratorKind::LogitLinear, intercept, slope }
    }

    pub fn apply(&self, p: f64) -> f64 {
        match self.kind {
            RecalibratorKind::Identity => p,
            RecalibratorKind::LogitLinear => {
                math::clamp_prob(math::sigmoid(self.intercept + self.slope * math::logit(p)))
            }
        }
    }

    pub fn apply_all(&self, probs: &[f64]) -> Vec<f64> {
        probs.iter().map(|&p| self.apply(p)).collect()
    }

    /// Whether the map is strictly increasing (and so preserves AUC).
    pub fn is_increasing(&self) -> bool {
        self.kind == RecalibratorKind::Identity || self.slope > 0.0
    }
}

/// Weak-calibration summary: 1 and 0 for a perfectly calibrated model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeIntercept {
    pub intercept: f64,
    pub slope: f64,
}

fn check_inputs(labels: &[u8], probs: &[f64]) -> Result<Vec<f64>, CalibError> {
    if labels.len() != probs.len() {
        return Err(CalibError::LengthMismatch(labels.len(), probs.len()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(CalibError::OneClassOnly);
    }
    let x: Vec<f64> = probs.iter().map(|&p| math::logit(p)).collect();
    let sd = math::pop_sd(&x);
    if !(sd > 1e-12) {
        return Err(CalibError::Degenerate);
    }
    Ok(x)
}

fn log_lik(labels: &[u8], eta: impl Iterator<Item = f64>) -> f64 {
    labels
        .iter()
        .zip(eta)
        .map(|(&y, e)| {
            let p = math::sigmoid(e);
            if y == 1 {
                p.max(f64::MIN_POSITIVE).ln()
            } else {
                (1.0 - p).max(f64::MIN_POSITIVE).ln()
            }
        })
        .sum()
}

/// Logistic regression of `labels` on `x`: returns `(a, b)`.
fn newton_two_param(labels: &[u8], x: &[f64]) -> Result<(f64, f64), CalibError> {
    let n = labels.len() as f64;
    let ybar = labels.iter().filter(|&&y| y == 1).count() as f64 / n;
    let (mut a, mut b) = (math::logit(ybar), 0.0);
    let mut ll = log_lik(labels, x.iter().map(|xi| a + b * xi));
    for _ in 0..NEWTON_MAX_ITER {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&y, &xi) in labels.iter().zip(x) {
            let p = math::sigmoid(a + b * xi);
            let w = p * (1.0 - p);
            let r = y as f64 - p;
            g0 += r;
            g1 += r * xi;
            h00 += w;
            h01 += w * xi;
            h11 += w * xi * xi;
        }
        if (g0 / n).hypot(g1 / n) <= GRADIENT_TOL {
            return Ok((a, b));
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 0.0) {
            return Err(CalibError::NoConvergence);
        }
        let da = (h11 * g0 - h01 * g1) / det;
        let db = (h00 * g1 - h01 * g0) / det;
        let mut t = 1.0;
        loop {
            let (na, nb) = (a + t * da, b + t * db);
            let nll = log_lik(labels, x.iter().map(|xi| na + nb * xi));
            // near the optimum the change is below rounding noise; accept it
            if nll >= ll - 1e-12 * ll.abs().max(1.0) || t < 1e-10 {
                a = na;
                b = nb;
                ll = nll;
                break;
            }
            t *= 0.5;
        }
    }
    Err(CalibError::NoConvergence)
}

/// Logistic regression with `x` as a fixed offset: returns the intercept.
fn newton_offset(labels: &[u8], x: &[f64]) -> Result<f64, CalibError> {
    let n = labels.len() as f64;
    let mut a = 0.0;
    for _ in 0..NEWTON_MAX_ITER {
        let (mut g, mut h) = (0.0, 0.0);
        for (&y, &xi) in labels.iter().zip(x) {
            let p = math::sigmoid(a + xi);
            g += y as f64 - p;
            h += p * (1.0 - p);
        }
        if (g / n).abs() <= GRADIENT_TOL {
            return Ok(a);
        }
        if !(h > 0.0) {
            return Err(CalibError::NoConvergence);
        }
        // the offset log-likelihood is concave in one parameter; cap the step
        a += (g / h).clamp(-5.0, 5.0);
    }
    Err(CalibError::NoConvergence)
}

/// Fit `p' = sigmoid(a + b * logit(raw))` by Newton–Raphson.
pub fn fit_recalibrator(labels: &[u8], raw_probs: &[f64]) -> Result<Recalibrator, CalibError> {
    let x = check_inputs(labels, raw_probs)?;
    let (a, b) = newton_two_param(labels, &x)?;
    Ok(Recalibrator::logit_linear(a, b))
}

/// Calibration slope and calibration-in-the-large intercept.
pub fn slope_intercept(labels: &[u8], probs: &[f64]) -> Result<SlopeIntercept, CalibError> {
    let x = check_inputs(labels, probs)?;
    let (_, slope) = newton_two_param(labels, &x)?;
    let intercept = newton_offset(labels, &x)?;
    Ok(SlopeIntercept { intercept, slope })
}


#[cfg(test)]
mod tests {
    use super::testdata::*;
    use super::*;
    use crate::eval;

    #[test]
    fn self_calibration_recovers_identity() {
        let (y, p) = calibrated(10_000, 1);
        let r = fit_recalibrator(&y, &p).unwrap();
        assert!(r.intercept.abs() <= 0.1 && (r.slope - 1.0).abs() <= 0.1, "{r:?}");
    }

    #[test]
    fn planted_distortion_inverted() {
        let (y, p) = calibrated(10_000, 2);
        let raw = distort(&p, 0.5, 0.3);
        let r = fit_recalibrator(&y, &raw).unwrap();
        assert!((r.intercept + 0.6).abs() <= 0.15 && (r.slope - 2.0).abs() <= 0.15, "{r:?}");
    }

    #[test]
    fn converges_on_small_samples() {
        for seed in 0..30 {
            let (y, p) = calibrated(490, 200 + seed);
            let s = slope_intercept(&y, &distort(&p, 0.9, 0.1)).unwrap();
            assert!(s.slope.is_finite() && s.intercept.is_finite());
        }
    }

    #[test]
    fn degenerate_and_one_class() {
        assert_eq!(fit_recalibrator(&[0, 1, 1], &[0.3; 3]), Err(CalibError::Degenerate));
        assert_eq!(fit_recalibrator(&[1, 1], &[0.3, 0.4]), Err(CalibError::OneClassOnly));
        assert_eq!(fit_recalibrator(&[1, 0], &[0.3]), Err(CalibError::LengthMismatch(2, 1)));
    }

    #[test]
    fn apply_examples() {
        assert_eq!(Recalibrator::identity().apply(0.37), 0.37);
        assert!((Recalibrator::logit_linear(0.0, 1.0).apply(0.3) - 0.3).abs() < 1e-15);
        let v = Recalibrator::logit_linear(-0.6, 2.0).apply(0.5);
        assert!((v - math::sigmoid(-0.6)).abs() < 1e-15);
        assert!((v - 0.354_343_693_774_2).abs() < 1e-12);
    }

    #[test]
    fn slope_intercept_examples() {
        let (y, p) = calibrated(10_000, 3);
        let s = slope_intercept(&y, &p).unwrap();
        assert!((s.slope - 1.0).abs() <= 0.1 && s.intercept.abs() <= 0.1, "{s:?}");
        let shrunk = distort(&p, 0.5, 0.0);
        assert!((slope_intercept(&y, &shrunk).unwrap().slope - 2.0).abs() <= 0.15);
        let shifted = distort(&p, 1.0, 0.4);
        assert!((slope_intercept(&y, &shifted).unwrap().intercept + 0.4).abs() <= 0.1);
    }

    #[test]
    fn recalibration_is_idempotent_to_first_order() {
        let (y, p) = calibrated(10_000, 4);
        let raw = distort(&p, 0.6, -0.5);
        let cal = fit_recalibrator(&y, &raw).unwrap().apply_all(&raw);
        let s = slope_intercept(&y, &cal).unwrap();
        assert!((s.slope - 1.0).abs() <= 0.05 && s.intercept.abs() <= 0.05, "{s:?}");
    }

    #[test]
    fn brier_not_worse_in_sample() {
        for seed in 0..5 {
            let (y, p) = calibrated(5_000, 10 + seed);
            let raw = distort(&p, 0.5, 0.3);
            let cal = fit_recalibrator(&y, &raw).unwrap().apply_all(&raw);
            assert!(eval::brier(&y, &cal).unwrap() <= eval::brier(&y, &raw).unwrap() + 1e-9);
        }
    }

    #[test]
    fn positive_slope_is_strictly_increasing() {
        let r = Recalibrator::logit_linear(-0.6, 2.0);
        let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
        let out = r.apply_all(&grid);
        assert!(out.windows(2).all(|w| w[0] < w[1]));
        assert!(r.is_increasing() && !Recalibrator::logit_linear(0.0, -1.0).is_increasing());
    }
}
