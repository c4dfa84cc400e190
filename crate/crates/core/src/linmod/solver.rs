use serde::{Deserialize, Serialize};

use super::{soft_threshold, LinmodError, LogisticLassoModel, RegularizationPath, Standardizer};
use crate::dataset::DataTable;
use crate::math;

/// IRLS weights are floored here so near-separable data cannot blow up the
/// working response.
const WEIGHT_FLOOR: f64 = 1e-5;
const MAX_HALVINGS: usize = 60;
/// Inner coordinate-descent sweeps stop at `tol * INNER_TOL_FACTOR`.
const INNER_TOL_FACTOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Convergence threshold on the largest coefficient change (standardized scale).
    pub tol: f64,
    /// Cap on coordinate-descent sweeps, summed over IRLS iterations.
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-7, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub nlambda: usize,
    pub lambda_min_ratio: f64,
    #[serde(flatten)]
    pub fit: FitOptions,
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec { nlambda: 100, lambda_min_ratio: 1e-3, fit: FitOptions::default() }
    }
}

impl PathSpec {
    pub(crate) fn validate(&self) -> Result<(), LinmodError> {
        if self.nlambda < 2 {
            return Err(LinmodError::BadParameter("nlambda must be at least 2".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(LinmodError::BadParameter("lambda_min_ratio must lie in (0, 1)".into()));
        }
        self.fit.validate()
    }

    /// Log-spaced grid from `lmax` down to `lambda_min_ratio * lmax`.
    pub fn grid(&self, lmax: f64) -> Vec<f64> {
        let step = self.lambda_min_ratio.ln() / (self.nlambda - 1) as f64;
        (0..self.nlambda).map(|k| lmax * (step * k as f64).exp()).collect()
    }
}

impl FitOptions {
    fn validate(&self) -> Result<(), LinmodError> {
        if !(self.tol > 0.0) {
            return Err(LinmodError::BadParameter("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(LinmodError::BadParameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Standardized, column-major design.
pub(crate) struct Design {
    n: usize,
    cols: Vec<Vec<f64>>,
    retained: Vec<bool>,
    y: Vec<f64>,
    ybar: f64,
    standardizer: Standardizer,
    names: Vec<String>,
}

impl Design {
    pub(crate) fn new(table: &DataTable) -> Result<Design, LinmodError> {
        if !table.has_both_classes() {
            return Err(LinmodError::DegenerateTarget);
        }
        let standardizer = Standardizer::fit(table);
        let p = table.n_features();
        let cols = (0..p)
            .map(|j| table.rows().map(|r| standardizer.transform(j, r[j])).collect())
            .collect();
        let y: Vec<f64> = table.target().iter().map(|&v| v as f64).collect();
        Ok(Design {
            n: table.n_rows(),
            cols,
            retained: (0..p).map(|j| standardizer.is_retained(j)).collect(),
            ybar: math::mean(&y),
            y,
            standardizer,
            names: table.schema().names(),
        })
    }

    fn p(&self) -> usize {
        self.cols.len()
    }

    fn lambda_max(&self) -> f64 {
        let n = self.n as f64;
        self.cols
            .iter()
            .map(|c| (c.iter().zip(&self.y).map(|(x, y)| x * (y - self.ybar)).sum::<f64>() / n).abs())
            .fold(0.0, f64::max)
    }

    fn null_state(&self) -> State {
        State { b0: math::logit(self.ybar), beta: vec![0.0; self.p()] }
    }

    fn eta(&self, s: &State) -> Vec<f64> {
        let mut eta = vec![s.b0; self.n];
        for (c, &b) in self.cols.iter().zip(&s.beta) {
            if b != 0.0 {
                eta.iter_mut().zip(c).for_each(|(e, x)| *e += b * x);
            }
        }
        eta
    }

    fn objective(&self, s: &State, lambda: f64) -> f64 {
        let eta = self.eta(s);
        let nll = eta
            .iter()
            .zip(&self.y)
            .map(|(&e, &y)| softplus(e) - y * e)
            .sum::<f64>()
            / self.n as f64;
        nll + lambda * s.beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn model(&self, s: &State, lambda: f64, converged: bool, iterations: usize) -> LogisticLassoModel {
        LogisticLassoModel::from_standardized(
            s.b0,
            &s.beta,
            lambda,
            self.standardizer.clone(),
            self.names.clone(),
            converged,
            iterations,
        )
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct State {
    b0: f64,
    beta: Vec<f64>,
}

impl State {
    fn max_change(&self, other: &State) -> f64 {
        self.beta
            .iter()
            .zip(&other.beta)
            .map(|(a, b)| (a - b).abs())
            .fold((self.b0 - other.b0).abs(), f64::max)
    }

    fn lerp(&self, towards: &State, t: f64) -> State {
        State {
            b0: self.b0 + t * (towards.b0 - self.b0),
            beta: self.beta.iter().zip(&towards.beta).map(|(a, b)| a + t * (b - a)).collect(),
        }
    }
}

struct Outcome {
    state: State,
    converged: bool,
    sweeps: usize,
    trace: Vec<f64>,
}

/// One penalized weighted least-squares solve by cyclic coordinate descent.
/// `resid` holds the working residual `z - eta` and is updated in place.
fn cd_wls(
    d: &Design,
    w: &[f64],
    resid: &mut [f64],
    state: &mut State,
    lambda: f64,
    tol: f64,
    sweep_budget: usize,
) -> usize {
    let n = d.n as f64;
    let w_sum: f64 = w.iter().sum();
    let curvature: Vec<f64> = d
        .cols
        .iter()
        .map(|c| c.iter().zip(w).map(|(x, wi)| wi * x * x).sum::<f64>() / n)
        .collect();

    let mut sweeps = 0;
    let update = |j: usize, state: &mut State, resid: &mut [f64]| -> f64 {
        if !d.retained[j] || curvature[j] <= 0.0 {
            return 0.0;
        }
        let col = &d.cols[j];
        let old = state.beta[j];
        let g = col.iter().zip(w).zip(resid.iter()).map(|((x, wi), r)| wi * x * r).sum::<f64>() / n
            + curvature[j] * old;
        let new = soft_threshold(g, lambda) / curvature[j];
        let delta = new - old;
        if delta != 0.0 {
            resid.iter_mut().zip(col).for_each(|(r, x)| *r -= delta * x);
            state.beta[j] = new;
        }
        delta.abs()
    };
    let intercept = |state: &mut State, resid: &mut [f64]| -> f64 {
        let delta = resid.iter().zip(w).map(|(r, wi)| wi * r).sum::<f64>() / w_sum;
        resid.iter_mut().for_each(|r| *r -= delta);
        state.b0 += delta;
        delta.abs()
    };

    while sweeps < sweep_budget {
        // full sweep
        sweeps += 1;
        let mut change = intercept(state, resid);
        for j in 0..d.p() {
            change = change.max(update(j, state, resid));
        }
        if change < tol {
            break;
        }
        // cycle on the active set until it settles, then re-check everything
        let active: Vec<usize> = (0..d.p()).filter(|&j| state.beta[j] != 0.0).collect();
        while sweeps < sweep_budget {
            sweeps += 1;
            let mut change = intercept(state, resid);
            for &j in &active {
                change = change.max(update(j, state, resid));
            }
            if change < tol {
                break;
            }
        }
    }
    sweeps
}

fn solve(d: &Design, lambda: f64, start: State, opts: FitOptions) -> Result<Outcome, LinmodError> {
    if lambda >= d.lambda_max() {
        let state = d.null_state();
        let trace = vec![d.objective(&state, lambda)];
        return Ok(Outcome { state, converged: true, sweeps: 0, trace });
    }
    let mut state = start;
    let mut obj = d.objective(&state, lambda);
    let mut trace = vec![obj];
    let mut sweeps = 0;

    while sweeps < opts.max_iter {
        let eta = d.eta(&state);
        let mut w = Vec::with_capacity(d.n);
        let mut resid = Vec::with_capacity(d.n);
        for (&e, &y) in eta.iter().zip(&d.y) {
            let p = math::sigmoid(e);
            let wi = (p * (1.0 - p)).max(WEIGHT_FLOOR);
            let r = (y - p) / wi;
            if !r.is_finite() {
                return Err(LinmodError::NonFinite);
            }
            w.push(wi);
            resid.push(r);
        }

        let mut candidate = state.clone();
        sweeps += cd_wls(d, &w, &mut resid, &mut candidate, lambda, opts.tol * INNER_TOL_FACTOR, opts.max_iter - sweeps);

        // Step halving keeps the penalized objective monotone.
        let mut t = 1.0;
        let mut next = candidate.clone();
        let mut next_obj = d.objective(&next, lambda);
        let mut halvings = 0;
        while next_obj > obj && halvings < MAX_HALVINGS {
            t *= 0.5;
            halvings += 1;
            next = state.lerp(&candidate, t);
            next_obj = d.objective(&next, lambda);
        }
        if !next_obj.is_finite() {
            return Err(LinmodError::NonFinite);
        }
        if next_obj > obj {
            // no descent along the IRLS direction: we are at the optimum to working precision
            trace.push(obj);
            return Ok(Outcome { state, converged: true, sweeps, trace });
        }
        let change = next.max_change(&state);
        state = next;
        obj = next_obj;
        trace.push(obj);
        if change < opts.tol {
            return Ok(Outcome { state, converged: true, sweeps, trace });
        }
    }
    Ok(Outcome { state, converged: false, sweeps, trace })
}

/// `max_j |x~_j . (y - ybar)| / n` on the standardized design: the smallest
/// penalty at which every coefficient is zero.
pub fn lambda_max(train: &DataTable) -> Result<f64, LinmodError> {
    Ok(Design::new(train)?.lambda_max())
}

/// Penalized objective of `model` on `train` (standardized scale).
pub fn penalized_objective(model: &LogisticLassoModel, train: &DataTable) -> Result<f64, LinmodError> {
    let d = Design::new(train)?;
    let state = State { b0: model.std_intercept(), beta: model.std_coefficients() };
    Ok(d.objective(&state, model.lambda))
}

/// Fit at a single penalty from a cold start (`b0 = logit(ybar)`, `beta = 0`).
pub fn fit(train: &DataTable, lambda: f64, opts: FitOptions) -> Result<LogisticLassoModel, LinmodError> {
    fit_with_trace(train, lambda, opts).map(|(m, _)| m)
}

/// As [`fit`], also returning the penalized objective after each IRLS iteration.
pub fn fit_with_trace(
    train: &DataTable,
    lambda: f64,
    opts: FitOptions,
) -> Result<(LogisticLassoModel, Vec<f64>), LinmodError> {
    opts.validate()?;
    if !(lambda >= 0.0) {
        return Err(LinmodError::BadParameter("lambda must be non-negative".into()));
    }
    let d = Design::new(train)?;
    let out = solve(&d, lambda, d.null_state(), opts)?;
    Ok((d.model(&out.state, lambda, out.converged, out.sweeps), out.trace))
}

/// Warm-started path on the grid defined by `spec` and the table's `lambda_max`.
pub fn path(train: &DataTable, spec: &PathSpec) -> Result<RegularizationPath, LinmodError> {
    spec.validate()?;
    let lmax = lambda_max(train)?;
    path_on_grid(train, &spec.grid(lmax), spec.fit)
}

/// Warm-started path on an explicit, strictly decreasing grid.
pub fn path_on_grid(train: &DataTable, lambdas: &[f64], opts: FitOptions) -> Result<RegularizationPath, LinmodError> {
    opts.validate()?;
    if lambdas.windows(2).any(|w| w[1] >= w[0]) || lambdas.iter().any(|&l| !(l >= 0.0)) {
        return Err(LinmodError::BadParameter("lambda grid must be non-negative and strictly decreasing".into()));
    }
    let d = Design::new(train)?;
    let mut out = RegularizationPath {
        lambdas: lambdas.to_vec(),
        coefficients: Vec::with_capacity(lambdas.len()),
        intercepts: Vec::with_capacity(lambdas.len()),
        converged: Vec::with_capacity(lambdas.len()),
        iterations: Vec::with_capacity(lambdas.len()),
        standardizer: d.standardizer.clone(),
        feature_names: d.names.clone(),
    };
    let mut warm = d.null_state();
    for &lambda in lambdas {
        let res = solve(&d, lambda, warm, opts)?;
        let m = d.model(&res.state, lambda, res.converged, res.sweeps);
        out.coefficients.push(m.coefficients);
        out.intercepts.push(m.intercept);
        out.converged.push(res.converged);
        out.iterations.push(res.sweeps);
        warm = res.state;
    }
    Ok(out)
}
