use std::path::Path;
use std::str::FromStr;

use super::artifacts::*;
use super::config::{Balance, RunContext, SEED_BALANCE, SEED_DIFF, SEED_HOLDOUT, SEED_SHAP, SEED_SPLIT};
use super::PipelineError;
use crate::calib::{self, Recalibrator, RecalibratorKind};
use crate::dataset::{self, DataTable, SyntheticSpec};
use crate::diff::{self, BatchOptions};
use crate::eval::{self, AucSummary};
use crate::explain::{self, Attribution, Predictor};
use crate::linmod::{self, CvResult, LogisticLassoModel};
use crate::{rng, svg};

const MODEL: &str = "model.json";
const CALIBRATOR: &str = "calibrator.json";
const EXPLANATION: &str = "explanation.json";
const DIFF: &str = "diff.json";
const REPORT: &str = "report.json";
const CV_TABLE: &str = "cv_table.csv";
const CV_PREDICTIONS: &str = "cv_predictions.csv";
const PREDICTIONS: &str = "predictions.csv";
const CURVES: &str = "calibration_curves.csv";
const ATTRIBUTIONS: &str = "attributions.csv";
const PROFILES: &str = "profiles.csv";
const DIFF_INSTANCES: &str = "diff_instances.csv";

/// The data and its partitions, re-derived identically by every command.
struct Study {
    provenance: Provenance,
    table: DataTable,
    holdout: DataTable,
    train: DataTable,
    /// The rows the model is fitted on: `train`, possibly rebalanced.
    fit: DataTable,
    test: DataTable,
    cal_fit: DataTable,
    cal_eval: DataTable,
}

impl Study {
    fn load(ctx: &RunContext) -> Result<Study, PipelineError> {
        let cfg = &ctx.config;
        let schema = ctx.schema()?;
        let table = dataset::load_csv(&ctx.data_path, &schema, cfg.missing)?;
        let provenance = Provenance {
            artifact_version: ARTIFACT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config_hash: ctx.config_hash()?,
        };
        let (rest, holdout) =
            dataset::hold_out(&table, cfg.split.explain_holdout, rng::derive_seed(cfg.seed, SEED_HOLDOUT))?;
        let (train, test) = dataset::split(&rest, cfg.split.train_fraction, rng::derive_seed(cfg.seed, SEED_SPLIT))?;
        if test.n_rows() < 2 {
            return Err(dataset::DatasetError::EmptyPartition.into());
        }
        let n_fit = ((test.n_rows() as f64 * cfg.split.calibration_fit_fraction).round() as usize)
            .clamp(1, test.n_rows() - 1);
        let cal_fit = test.subset(&(0..n_fit).collect::<Vec<_>>());
        let cal_eval = test.subset(&(n_fit..test.n_rows()).collect::<Vec<_>>());
        let fit = match cfg.lasso.balance {
            Balance::None => train.clone(),
            Balance::Undersample => undersample(&train, rng::derive_seed(cfg.seed, SEED_BALANCE)),
        };
        Ok(Study { provenance, table, holdout, train, fit, test, cal_fit, cal_eval })
    }

    fn sizes(&self) -> SplitSizes {
        SplitSizes {
            total: self.table.n_rows(),
            explain_holdout: self.holdout.n_rows(),
            train: self.train.n_rows(),
            fit: self.fit.n_rows(),
            test: self.test.n_rows(),
            calibration_fit: self.cal_fit.n_rows(),
            calibration_eval: self.cal_eval.n_rows(),
        }
    }
}

/// Every row of the minority class plus an equally sized sample of the
/// majority class, in file order.
fn undersample(table: &DataTable, seed: u64) -> DataTable {
    use rand::seq::index::sample;
    let pos: Vec<usize> = (0..table.n_rows()).filter(|&i| table.target()[i] == 1).collect();
    let neg: Vec<usize> = (0..table.n_rows()).filter(|&i| table.target()[i] == 0).collect();
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut keep = minority.clone();
    keep.extend(sample(&mut rng::rng_for(seed), majority.len(), minority.len()).into_iter().map(|k| majority[k]));
    keep.sort_unstable();
    table.subset(&keep)
}

fn require(out: &Path, names: &[&str]) -> Result<(), PipelineError> {
    let missing: Vec<String> = names.iter().filter(|n| !out.join(n).exists()).map(|n| n.to_string()).collect();
    if missing.is_empty() { Ok(()) } else { Err(PipelineError::MissingArtifacts(missing)) }
}

/// Reads an artifact and checks it was produced under `provenance`.
fn load_artifact<T: serde::de::DeserializeOwned>(
    out: &Path,
    name: &str,
    provenance: &Provenance,
) -> Result<T, PipelineError> {
    require(out, &[name])?;
    let a: Artifact<T> = read_json(&out.join(name))?;
    if &a.provenance != provenance {
        return Err(PipelineError::MixedProvenance(format!(
            "{name} has config hash {} (seed {}), expected {} (seed {})",
            a.provenance.config_hash, a.provenance.seed, provenance.config_hash, provenance.seed
        )));
    }
    Ok(a.payload)
}

fn f(v: f64) -> String {
    v.to_string()
}

fn parse_f64(path: &Path, s: &str) -> Result<f64, PipelineError> {
    s.parse().map_err(|_| io_err(path, format!("bad number {s:?}")))
}

fn parse_usize(path: &Path, s: &str) -> Result<usize, PipelineError> {
    s.parse().map_err(|_| io_err(path, format!("bad integer {s:?}")))
}

/// Writes `cohort.csv`, `schema.toml` and a ready-to-run `calexplain.toml`
/// for the synthetic demo cohort into the output directory.
pub fn cmd_synth(ctx: &RunContext, n: Option<usize>) -> Result<String, PipelineError> {
    let mut cfg = ctx.config.clone();
    if let Some(n) = n {
        cfg.synth.n = n;
    }
    cfg.validate()?;
    let spec = SyntheticSpec::screening_demo(cfg.synth.n, cfg.seed);
    let table = dataset::synthesize(&spec)?;
    std::fs::create_dir_all(&ctx.out_dir).map_err(|e| io_err(&ctx.out_dir, e))?;
    dataset::write_csv(&table, ctx.out_dir.join("cohort.csv"))?;
    write_text(&ctx.out_dir.join("schema.toml"), &table.schema().to_toml())?;
    cfg.data = "cohort.csv".into();
    cfg.schema = Some("schema.toml".into());
    cfg.out = ".".into();
    write_text(&ctx.out_dir.join("calexplain.toml"), &cfg.to_toml())?;
    Ok(format!(
        "wrote {} rows ({} positive) to {}",
        table.n_rows(),
        table.n_positive(),
        ctx.out_dir.join("cohort.csv").display()
    ))
}

/// Cross-validates the penalty path on the training partition, refits at the
/// selected penalty and writes the model artifact and CV tables.
pub fn cmd_train(ctx: &RunContext) -> Result<String, PipelineError> {
    let study = Study::load(ctx)?;
    let cfg = &ctx.config;
    let opts = cfg.cv_options();
    let cv = linmod::cross_validate(&study.fit, &opts)?;
    let model = linmod::fit(&study.fit, cv.selected_lambda, opts.path.fit)?;
    let cv_auc = eval::auc_ci(&cv.fold_aucs[cv.selected_index], cfg.calibration.level)?;
    let out = &ctx.out_dir;

    let mut table_rows = Vec::new();
    for (k, aucs) in cv.fold_aucs.iter().enumerate() {
        let per_repeat = aucs.len() / cv.repeats;
        for (t, &a) in aucs.iter().enumerate() {
            let fold = if cv.pooled { "pooled".to_string() } else { (t % per_repeat).to_string() };
            table_rows.push(vec![k.to_string(), f(cv.lambdas[k]), (t / per_repeat).to_string(), fold, f(a)]);
        }
    }
    write_csv_rows(&out.join(CV_TABLE), &["lambda_index", "lambda", "repeat", "fold", "auc"], &table_rows)?;

    let mut pred_rows = Vec::new();
    for (r, oof) in cv.selected_oof.iter().enumerate() {
        for i in 0..study.fit.n_rows() {
            pred_rows.push(vec![
                r.to_string(),
                cv.assignments[r][i].to_string(),
                study.fit.row_ids()[i].clone(),
                study.fit.target()[i].to_string(),
                f(oof[i]),
            ]);
        }
    }
    write_csv_rows(&out.join(CV_PREDICTIONS), &["repeat", "fold", "row_id", "target", "prediction"], &pred_rows)?;

    let msg = format!(
        "selected lambda {:.6} ({} of {}), mean CV AUC {:.4} [{:.4}, {:.4}] over {} estimates, {} non-zero coefficients",
        cv.selected_lambda,
        cv.selected_index + 1,
        cv.lambdas.len(),
        cv_auc.mean,
        cv_auc.ci_lo,
        cv_auc.ci_hi,
        cv_auc.n_estimates,
        model.nnz()
    );
    let payload = ModelPayload { model, cv, cv_auc, sizes: study.sizes() };
    write_json(&out.join(MODEL), &Artifact { provenance: study.provenance, payload })?;
    Ok(msg)
}

/// AUC summary of the stored out-of-fold predictions after mapping them
/// through `recal`, scored fold by fold exactly as in training.
fn cv_summary_from_predictions(
    out: &Path,
    cv: &CvResult,
    recal: &Recalibrator,
    level: f64,
) -> Result<AucSummary, PipelineError> {
    let path = out.join(CV_PREDICTIONS);
    require(out, &[CV_PREDICTIONS])?;
    let mut repeats: Vec<(Vec<u8>, Vec<usize>, Vec<f64>)> = vec![Default::default(); cv.repeats];
    for rec in read_csv_rows(&path)? {
        let r = parse_usize(&path, &rec[0])?;
        let slot = repeats.get_mut(r).ok_or_else(|| io_err(&path, format!("repeat {r} out of range")))?;
        slot.1.push(parse_usize(&path, &rec[1])?);
        slot.0.push(if &rec[3] == "1" { 1 } else { 0 });
        slot.2.push(recal.apply(parse_f64(&path, &rec[4])?));
    }
    let mut aucs = Vec::new();
    for (target, assignment, preds) in &repeats {
        aucs.extend(linmod::repeat_aucs(target, assignment, preds, cv.folds, cv.pooled)?);
    }
    Ok(eval::auc_ci(&aucs, level)?)
}

fn diagnostics(
    labels: &[u8],
    probs: &[f64],
    cfg: &super::CalibrationConfig,
) -> Result<Diagnostics, PipelineError> {
    Ok(Diagnostics {
        auc: eval::auc(labels, probs)?,
        brier: eval::brier(labels, probs)?,
        slope_intercept: calib::slope_intercept(labels, probs)?,
        hosmer_lemeshow: calib::hosmer_lemeshow(labels, probs, cfg.hl_bins)?,
        curve: calib::loess_curve(labels, probs, cfg.span, cfg.grid_size)?,
    })
}

/// Fits the recalibrator on the first part of the test partition and compares
/// raw and recalibrated predictions on the rest.
pub fn cmd_calibrate(ctx: &RunContext) -> Result<String, PipelineError> {
    let study = Study::load(ctx)?;
    let out = &ctx.out_dir;
    let cfg = &ctx.config.calibration;
    let m: ModelPayload = load_artifact(out, MODEL, &study.provenance)?;
    let raw_fit = m.model.predict_table(&study.cal_fit)?;
    let raw_eval = m.model.predict_table(&study.cal_eval)?;
    let recalibrator = match cfg.kind {
        RecalibratorKind::Identity => Recalibrator::identity(),
        RecalibratorKind::LogitLinear => calib::fit_recalibrator(study.cal_fit.target(), &raw_fit)?,
    };
    let cal_eval = recalibrator.apply_all(&raw_eval);
    let labels = study.cal_eval.target();
    let report = CalibrationReport {
        recalibrator,
        cv_uncalibrated: cv_summary_from_predictions(out, &m.cv, &Recalibrator::identity(), cfg.level)?,
        cv_calibrated: cv_summary_from_predictions(out, &m.cv, &recalibrator, cfg.level)?,
        before: diagnostics(labels, &raw_eval, cfg)?,
        after: diagnostics(labels, &cal_eval, cfg)?,
    };

    let mut rows = Vec::new();
    for (role, table, raw) in [("calibration_fit", &study.cal_fit, &raw_fit), ("calibration_eval", &study.cal_eval, &raw_eval)] {
        for i in 0..table.n_rows() {
            rows.push(vec![
                table.row_ids()[i].clone(),
                role.to_string(),
                table.target()[i].to_string(),
                f(raw[i]),
                f(recalibrator.apply(raw[i])),
            ]);
        }
    }
    write_csv_rows(&out.join(PREDICTIONS), &["row_id", "role", "target", "raw", "calibrated"], &rows)?;
    let mut curve_rows = Vec::new();
    for (name, d) in [("uncalibrated", &report.before), ("calibrated", &report.after)] {
        for r in d.curve.rows() {
            curve_rows.push(std::iter::once(name.to_string()).chain(r.iter().map(|&v| f(v))).collect());
        }
    }
    write_csv_rows(&out.join(CURVES), &["model", "predicted", "observed", "lo", "hi"], &curve_rows)?;

    let msg = format!(
        "recalibrator a={:.4} b={:.4}; slope {:.3} -> {:.3}, intercept {:.3} -> {:.3}, Brier {:.5} -> {:.5}, HL p {:.3e} -> {:.3e}",
        recalibrator.intercept,
        recalibrator.slope,
        report.before.slope_intercept.slope,
        report.after.slope_intercept.slope,
        report.before.slope_intercept.intercept,
        report.after.slope_intercept.intercept,
        report.before.brier,
        report.after.brier,
        report.before.hosmer_lemeshow.p_value,
        report.after.hosmer_lemeshow.p_value,
    );
    write_json(&out.join(CALIBRATOR), &Artifact { provenance: study.provenance, payload: report })?;
    Ok(msg)
}

/// Which row `explain` describes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceSelector {
    /// The built-in use-case patient.
    UseCase,
    /// Position in the explanation holdout.
    Index(usize),
    RowId(String),
}

impl FromStr for InstanceSelector {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "use_case" || s == "use-case" {
            return Ok(InstanceSelector::UseCase);
        }
        if let Some(n) = s.strip_prefix("index:") {
            return n.parse().map(InstanceSelector::Index).map_err(|_| PipelineError::UnknownInstance(s.into()));
        }
        if s.is_empty() {
            return Err(PipelineError::UnknownInstance(s.into()));
        }
        Ok(InstanceSelector::RowId(s.to_string()))
    }
}

fn predictors(
    out: &Path,
    provenance: &Provenance,
) -> Result<(Predictor, Predictor), PipelineError> {
    let m: ModelPayload = load_artifact(out, MODEL, provenance)?;
    let c: CalibrationReport = load_artifact(out, CALIBRATOR, provenance)?;
    Ok((Predictor::new(m.model.clone()), Predictor::calibrated(m.model, c.recalibrator)))
}

fn attribution_rows(rows: &mut Vec<Vec<String>>, model: &str, method: &str, a: &Attribution, sd: Option<&[f64]>) {
    for (pos, e) in a.entries.iter().enumerate() {
        let spread = sd.map(|s| f(s[e.feature_index])).unwrap_or_default();
        rows.push(vec![
            model.to_string(),
            method.to_string(),
            (pos + 1).to_string(),
            e.feature.clone(),
            f(e.value),
            f(e.contribution),
            spread,
        ]);
    }
}

/// Break-down, Shapley and ceteris-paribus explanations of one instance under
/// both predictors, against the explanation holdout as background.
pub fn cmd_explain(ctx: &RunContext, selector: Option<InstanceSelector>) -> Result<String, PipelineError> {
    let study = Study::load(ctx)?;
    let out = &ctx.out_dir;
    let cfg = &ctx.config.explain;
    let (uncal, cal) = predictors(out, &study.provenance)?;
    let selector = match selector {
        Some(s) => s,
        None => cfg.instance.parse()?,
    };
    let (id, instance) = match &selector {
        InstanceSelector::UseCase => ("use_case".to_string(), dataset::use_case_patient(&study.train)),
        InstanceSelector::Index(i) if *i < study.holdout.n_rows() => {
            (study.holdout.row_ids()[*i].clone(), study.holdout.row(*i).to_vec())
        }
        InstanceSelector::RowId(r) if study.table.position_of(r).is_some() => {
            (r.clone(), study.table.row(study.table.position_of(r).unwrap()).to_vec())
        }
        other => return Err(PipelineError::UnknownInstance(format!("{other:?}"))),
    };
    let bg = &study.holdout;
    let seed = rng::derive_seed(ctx.config.seed, SEED_SHAP);
    let break_down = Pair {
        uncalibrated: explain::break_down(&uncal, bg, &instance, Some(&id))?,
        calibrated: explain::break_down(&cal, bg, &instance, Some(&id))?,
    };
    let shap = Pair {
        uncalibrated: explain::shap_sampling(&uncal, bg, &instance, Some(&id), cfg.permutations, seed)?,
        calibrated: explain::shap_sampling(&cal, bg, &instance, Some(&id), cfg.permutations, seed)?,
    };
    let profiles = cfg
        .profile_features
        .iter()
        .map(|feat| {
            Ok(Pair {
                uncalibrated: explain::ceteris_paribus(&uncal, &study.train, &instance, feat, cfg.grid_size, None)?,
                calibrated: explain::ceteris_paribus(&cal, &study.train, &instance, feat, cfg.grid_size, None)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let shap_u = shap.uncalibrated.attribution();
    let shap_c = shap.calibrated.attribution();
    let efficiency = [
        ("break_down_uncalibrated", &break_down.uncalibrated),
        ("break_down_calibrated", &break_down.calibrated),
        ("shap_uncalibrated", &shap_u),
        ("shap_calibrated", &shap_c),
    ]
    .iter()
    .map(|(block, a)| EfficiencyCheck { block: block.to_string(), gap: a.efficiency_gap() })
    .collect::<Vec<_>>();

    let mut rows = Vec::new();
    attribution_rows(&mut rows, "uncalibrated", "break_down", &break_down.uncalibrated, None);
    attribution_rows(&mut rows, "calibrated", "break_down", &break_down.calibrated, None);
    attribution_rows(&mut rows, "uncalibrated", "shap", &shap_u, Some(&shap.uncalibrated.sd));
    attribution_rows(&mut rows, "calibrated", "shap", &shap_c, Some(&shap.calibrated.sd));
    write_csv_rows(
        &out.join(ATTRIBUTIONS),
        &["model", "method", "position", "feature", "value", "contribution", "sd"],
        &rows,
    )?;
    let mut prof_rows = Vec::new();
    for p in &profiles {
        for (name, cp) in [("uncalibrated", &p.uncalibrated), ("calibrated", &p.calibrated)] {
            for (x, y) in cp.grid.iter().zip(&cp.predictions) {
                prof_rows.push(vec![name.to_string(), cp.feature.clone(), f(*x), f(*y)]);
            }
        }
    }
    write_csv_rows(&out.join(PROFILES), &["model", "feature", "value", "prediction"], &prof_rows)?;

    let top = |a: &Attribution| a.entries.iter().take(5).map(|e| e.feature.as_str()).collect::<Vec<_>>().join(", ");
    let msg = format!(
        "instance {id}: prediction {:.4} -> {:.4}; break-down top 5 [{}] vs [{}]; max efficiency gap {:.1e}",
        break_down.uncalibrated.prediction,
        break_down.calibrated.prediction,
        top(&break_down.uncalibrated),
        top(&break_down.calibrated),
        efficiency.iter().map(|e| e.gap.abs()).fold(0.0, f64::max)
    );
    let payload = ExplanationReport { instance_id: id, background_rows: bg.n_rows(), break_down, shap, profiles, efficiency };
    write_json(&out.join(EXPLANATION), &Artifact { provenance: study.provenance, payload })?;
    Ok(msg)
}

/// Compares explanations of every explanation-holdout row under both predictors.
pub fn cmd_diff(ctx: &RunContext) -> Result<String, PipelineError> {
    let study = Study::load(ctx)?;
    let out = &ctx.out_dir;
    let cfg = &ctx.config.explain;
    let (uncal, cal) = predictors(out, &study.provenance)?;
    let options = BatchOptions {
        method: cfg.method,
        k: cfg.k.min(study.holdout.n_features()),
        permutations: cfg.permutations,
        seed: rng::derive_seed(ctx.config.seed, SEED_DIFF),
        tau_threshold: cfg.tau_threshold,
    };
    let (summary, instances) = diff::batch_compare(&uncal, &cal, &study.holdout, &study.holdout, &options)?;
    let rows: Vec<Vec<String>> = instances
        .iter()
        .map(|d| {
            vec![
                d.instance_id.clone().unwrap_or_default(),
                f(d.kendall_tau),
                f(d.topk_jaccard),
                d.left_topk.join(";"),
                d.entered_topk.join(";"),
                d.sign_flips.join(";"),
                d.is_flagged(options.tau_threshold).to_string(),
            ]
        })
        .collect();
    write_csv_rows(
        &out.join(DIFF_INSTANCES),
        &["instance_id", "kendall_tau", "topk_jaccard", "left_topk", "entered_topk", "sign_flips", "flagged"],
        &rows,
    )?;
    let msg = format!(
        "{} instances compared at k={}: {} flagged, mean tau {:.3}, min tau {:.3}",
        summary.n,
        summary.k,
        summary.flagged.len(),
        summary.mean_tau,
        summary.min_tau
    );
    let payload = DiffReport { options, summary, instances };
    write_json(&out.join(DIFF), &Artifact { provenance: study.provenance, payload })?;
    Ok(msg)
}

fn read_provenance(out: &Path, name: &str) -> Result<Provenance, PipelineError> {
    let v: serde_json::Value = read_json(&out.join(name))?;
    serde_json::from_value(v["provenance"].clone()).map_err(|e| io_err(&out.join(name), e))
}

fn check_equal(what: &str, stored: f64, recomputed: f64) -> Result<(), PipelineError> {
    if stored.to_bits() == recomputed.to_bits() {
        Ok(())
    } else {
        Err(PipelineError::Inconsistent(format!("{what}: stored {stored}, recomputed {recomputed}")))
    }
}

fn check_summary(what: &str, stored: &AucSummary, recomputed: &AucSummary) -> Result<(), PipelineError> {
    check_equal(&format!("{what} mean"), stored.mean, recomputed.mean)?;
    check_equal(&format!("{what} ci_lo"), stored.ci_lo, recomputed.ci_lo)?;
    check_equal(&format!("{what} ci_hi"), stored.ci_hi, recomputed.ci_hi)
}

const WATERFALL_STEPS: usize = 12;

fn waterfall_svg(title: &str, a: &Attribution) -> String {
    let mut steps: Vec<(String, f64)> = a
        .entries
        .iter()
        .take(WATERFALL_STEPS)
        .map(|e| (format!("{} = {}", e.feature, short(e.value)), e.contribution))
        .collect();
    if a.entries.len() > WATERFALL_STEPS {
        let rest: f64 = a.entries[WATERFALL_STEPS..].iter().map(|e| e.contribution).sum();
        steps.push((format!("+ {} other features", a.entries.len() - WATERFALL_STEPS), rest));
    }
    svg::waterfall(title, a.baseline, a.prediction, &steps)
}

fn short(v: f64) -> String {
    if v.fract() == 0.0 { format!("{v:.0}") } else { format!("{v:.2}") }
}

fn shap_svg(title: &str, s: &explain::ShapResult) -> String {
    let a = s.attribution();
    let bars: Vec<(String, f64, f64)> =
        a.entries.iter().take(WATERFALL_STEPS).map(|e| (e.feature.clone(), e.contribution, s.sd[e.feature_index])).collect();
    svg::signed_bars(title, &bars)
}

fn model_report(m: &ModelPayload) -> ModelReport {
    let model: &LogisticLassoModel = &m.model;
    ModelReport {
        lambda: model.lambda,
        intercept: model.intercept,
        coefficients: model
            .feature_names
            .iter()
            .zip(&model.coefficients)
            .filter(|(_, &b)| b != 0.0)
            .map(|(name, &b)| NamedValue { feature: name.clone(), value: b })
            .collect(),
        dropped_features: model.standardizer.dropped.clone(),
        cv_table: (0..m.cv.lambdas.len())
            .map(|k| CvRow { lambda: m.cv.lambdas[k], mean_auc: m.cv.mean_auc[k], sd_auc: m.cv.sd_auc[k] })
            .collect(),
        selected_index: m.cv.selected_index,
        sizes: m.sizes,
    }
}

/// Consolidates the artifacts in `out` into `report.json` plus SVG plots.
///
/// Refuses artifacts with differing provenance and cross-checks every stored
/// AUC against a recomputation from the stored predictions.
pub fn cmd_report(out: &Path) -> Result<String, PipelineError> {
    require(out, &[MODEL, CALIBRATOR, EXPLANATION, DIFF, CV_PREDICTIONS, PREDICTIONS])?;
    let provenance = read_provenance(out, MODEL)?;
    for name in [CALIBRATOR, EXPLANATION, DIFF] {
        if read_provenance(out, name)? != provenance {
            return Err(PipelineError::MixedProvenance(format!("{name} and {MODEL} differ")));
        }
    }
    let m: ModelPayload = load_artifact(out, MODEL, &provenance)?;
    let c: CalibrationReport = load_artifact(out, CALIBRATOR, &provenance)?;
    let e: ExplanationReport = load_artifact(out, EXPLANATION, &provenance)?;
    let d: DiffReport = load_artifact(out, DIFF, &provenance)?;

    let path = out.join(PREDICTIONS);
    let (mut labels, mut raw, mut mapped) = (Vec::new(), Vec::new(), Vec::new());
    for rec in read_csv_rows(&path)? {
        if &rec[1] == "calibration_eval" {
            labels.push(if &rec[2] == "1" { 1u8 } else { 0 });
            raw.push(parse_f64(&path, &rec[3])?);
            mapped.push(parse_f64(&path, &rec[4])?);
        }
    }
    let holdout_auc_uncalibrated = eval::auc(&labels, &raw)?;
    let holdout_auc_calibrated = eval::auc(&labels, &mapped)?;
    check_equal("holdout AUC (uncalibrated)", c.before.auc, holdout_auc_uncalibrated)?;
    check_equal("holdout AUC (calibrated)", c.after.auc, holdout_auc_calibrated)?;
    let level = c.cv_uncalibrated.level;
    let cv_uncalibrated = cv_summary_from_predictions(out, &m.cv, &Recalibrator::identity(), level)?;
    let cv_calibrated = cv_summary_from_predictions(out, &m.cv, &c.recalibrator, level)?;
    check_summary("CV AUC (uncalibrated)", &c.cv_uncalibrated, &cv_uncalibrated)?;
    check_summary("CV AUC (calibrated)", &c.cv_calibrated, &cv_calibrated)?;
    check_summary("CV AUC (training)", &m.cv_auc, &cv_uncalibrated)?;

    let mut plots: Vec<(String, String)> = Vec::new();
    let (b, a) = (&c.before.curve, &c.after.curve);
    plots.push((
        "plots/reliability.svg".into(),
        svg::line_plot(
            "Loess calibration curves",
            "predicted probability",
            "observed proportion",
            &[
                svg::Series { label: "uncalibrated", x: &b.grid, y: &b.smoothed_observed, color: svg::BLUE },
                svg::Series { label: "calibrated", x: &a.grid, y: &a.smoothed_observed, color: svg::ORANGE },
            ],
            &[
                svg::Band { x: &b.grid, lo: &b.ci_lo, hi: &b.ci_hi, color: svg::BLUE },
                svg::Band { x: &a.grid, lo: &a.ci_lo, hi: &a.ci_hi, color: svg::ORANGE },
            ],
            true,
        ),
    ));
    for (name, attr) in [("uncalibrated", &e.break_down.uncalibrated), ("calibrated", &e.break_down.calibrated)] {
        plots.push((
            format!("plots/waterfall_{name}.svg"),
            waterfall_svg(&format!("Break-down, {name} model, instance {}", e.instance_id), attr),
        ));
    }
    for (name, s) in [("uncalibrated", &e.shap.uncalibrated), ("calibrated", &e.shap.calibrated)] {
        plots.push((
            format!("plots/shap_{name}.svg"),
            shap_svg(&format!("Shapley values, {name} model, instance {}", e.instance_id), s),
        ));
    }
    for p in &e.profiles {
        let (u, k) = (&p.uncalibrated, &p.calibrated);
        plots.push((
            format!("plots/profile_{}.svg", u.feature),
            svg::line_plot(
                &format!("Ceteris-paribus profile of {} for instance {}", u.feature, e.instance_id),
                &u.feature,
                "prediction",
                &[
                    svg::Series { label: "uncalibrated", x: &u.grid, y: &u.predictions, color: svg::BLUE },
                    svg::Series { label: "calibrated", x: &k.grid, y: &k.predictions, color: svg::ORANGE },
                ],
                &[],
                false,
            ),
        ));
    }
    for (rel, doc) in &plots {
        write_text(&out.join(rel), doc)?;
    }

    let report = RunReport {
        provenance,
        model: model_report(&m),
        discrimination: Discrimination {
            cv_uncalibrated,
            cv_calibrated,
            holdout_auc_uncalibrated,
            holdout_auc_calibrated,
        },
        calibration: c,
        explanation: e,
        diff: d.summary,
        plots: plots.into_iter().map(|(rel, _)| rel).collect(),
    };
    let msg = format!(
        "wrote {} with {} plots; CV AUC {:.4} (calibrated {:.4}), {} of {} instances flagged",
        out.join(REPORT).display(),
        report.plots.len(),
        report.discrimination.cv_uncalibrated.mean,
        report.discrimination.cv_calibrated.mean,
        report.diff.flagged.len(),
        report.diff.n
    );
    write_json(&out.join(REPORT), &report)?;
    Ok(msg)
}

/// `train`, `calibrate`, `explain`, `diff` and `report` in sequence.
pub fn run_all(ctx: &RunContext) -> Result<Vec<String>, PipelineError> {
    Ok(vec![
        cmd_train(ctx)?,
        cmd_calibrate(ctx)?,
        cmd_explain(ctx, None)?,
        cmd_diff(ctx)?,
        cmd_report(&ctx.out_dir)?,
    ])
}
