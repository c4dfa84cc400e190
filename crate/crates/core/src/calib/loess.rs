use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CalibError;

const MIN_POINTS: usize = 10;
const Z95: f64 = 1.959_963_984_540_054;

/// Loess reliability curve with a pointwise 95% band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub grid: Vec<f64>,
    pub smoothed_observed: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub span: f64,
}

impl CalibrationCurve {
    /// Rows of `(grid, fit, lo, hi)` for plot-data export.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        (0..self.grid.len()).map(|i| [self.grid[i], self.smoothed_observed[i], self.ci_lo[i], self.ci_hi[i]])
    }
}

/// Local-linear smoother over `x` sorted ascending.
struct Smoother<'a> {
    x: &'a [f64],
    y: &'a [f64],
    q: usize,
}

struct LocalFit {
    value: f64,
    /// Σ l_i² for the equivalent-kernel weights `l`.
    l_sq: f64,
    /// Weight the fit puts on the observation at `self_index`, if requested.
    l_self: f64,
}

impl Smoother<'_> {
    /// The `q` nearest neighbours of `x0` as a contiguous range of the sorted data.
    fn window(&self, x0: f64) -> (usize, usize) {
        let n = self.x.len();
        let mut hi = self.x.partition_point(|&v| v < x0);
        let mut lo = hi;
        while hi - lo < self.q {
            let take_left = match (lo > 0, hi < n) {
                (true, true) => x0 - self.x[lo - 1] <= self.x[hi] - x0,
                (l, _) => l,
            };
            if take_left {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        (lo, hi)
    }

    fn fit_at(&self, x0: f64, self_index: Option<usize>) -> LocalFit {
        let (lo, hi) = self.window(x0);
        let xs = &self.x[lo..hi];
        let d = xs.iter().map(|&v| (v - x0).abs()).fold(0.0, f64::max);
        let w: Vec<f64> = xs
            .iter()
            .map(|&v| {
                if d == 0.0 {
                    1.0
                } else {
                    let u = (v - x0).abs() / d;
                    if u >= 1.0 { 0.0 } else { (1.0 - u * u * u).powi(3) }
                }
            })
            .collect();
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (&wi, &v) in w.iter().zip(xs) {
            let dx = v - x0;
            s0 += wi;
            s1 += wi * dx;
            s2 += wi * dx * dx;
        }
        let det = s0 * s2 - s1 * s1;
        let linear = det > 1e-12 * s0 * s2 && det > 0.0;
        let (mut value, mut l_sq, mut l_self) = (0.0, 0.0, 0.0);
        for (k, (&wi, &v)) in w.iter().zip(xs).enumerate() {
            let l = if linear { wi * (s2 - (v - x0) * s1) / det } else { wi / s0 };
            value += l * self.y[lo + k];
            l_sq += l * l;
            if self_index == Some(lo + k) {
                l_self = l;
            }
        }
        LocalFit { value, l_sq, l_self }
    }
}

/// Loess of real responses on `x`; the labelled case goes through [`loess_curve`].
pub(crate) fn loess_xy(x: &[f64], y: &[f64], span: f64, grid_size: usize) -> Result<CalibrationCurve, CalibError> {
    if x.len() != y.len() {
        return Err(CalibError::LengthMismatch(y.len(), x.len()));
    }
    let n = x.len();
    if n < MIN_POINTS {
        return Err(CalibError::TooFewPoints { needed: MIN_POINTS, got: n });
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(CalibError::BadSpan(span));
    }
    if grid_size < 2 {
        return Err(CalibError::BadParameter("grid_size must be at least 2".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let (x_min, x_max) = (xs[0], xs[n - 1]);
    if !(x_max > x_min) {
        return Err(CalibError::Degenerate);
    }
    let q = ((span * n as f64).ceil() as usize).clamp(3, n);
    let sm = Smoother { x: &xs, y: &ys, q };

    // residual variance from the fit at the data points
    let at_data: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let f = sm.fit_at(xs[i], Some(i));
            ((ys[i] - f.value).powi(2), f.l_self)
        })
        .collect();
    let rss: f64 = at_data.iter().map(|r| r.0).sum();
    let trace: f64 = at_data.iter().map(|r| r.1).sum();
    let sigma = (rss / (n as f64 - trace).max(1.0)).sqrt();

    let step = (x_max - x_min) / (grid_size - 1) as f64;
    let grid: Vec<f64> =
        (0..grid_size).map(|k| if k + 1 == grid_size { x_max } else { x_min + k as f64 * step }).collect();
    let fits: Vec<LocalFit> = grid.par_iter().map(|&g| sm.fit_at(g, None)).collect();
    let smoothed_observed: Vec<f64> = fits.iter().map(|f| f.value).collect();
    let half: Vec<f64> = fits.iter().map(|f| Z95 * sigma * f.l_sq.sqrt()).collect();
    Ok(CalibrationCurve {
        ci_lo: smoothed_observed.iter().zip(&half).map(|(v, h)| v - h).collect(),
        ci_hi: smoothed_observed.iter().zip(&half).map(|(v, h)| v + h).collect(),
        smoothed_observed,
        grid,
        span,
    })
}

/// Degree-1 loess of outcomes on predicted probabilities, tricube weights over
/// the `ceil(span * n)` nearest neighbours, evaluated on an even grid spanning
/// the observed probabilities.
pub fn loess_curve(labels: &[u8], probs: &[f64], span: f64, grid_size: usize) -> Result<CalibrationCurve, CalibError> {
    let y: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
    loess_xy(probs, &y, span, grid_size)
}
