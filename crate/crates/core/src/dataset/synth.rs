//! Synthetic cohorts with planted logistic ground truth.
//!
//! The default layout mirrors a 53-feature ageing-survey design: 2 demographic,
//! 15 physical-health, 31 aggregated-health and 5 behavioural features. The
//! marginals of the named features are the outcome-prevalence-weighted mixture of
//! the published per-class means / SDs (positives 8.3%); unnamed aggregated
//! indices are standard normal.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataTable, DatasetError, FeatureGroup, FeatureKind, FeatureSchema, Schema};
use crate::{math, rng};

/// Outcome prevalence of the reference cohort (1,360 of 16,363).
pub const REFERENCE_PREVALENCE: f64 = 0.083;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Marginal {
    /// Normal draw clipped to the feature bounds; ordinal features are then rounded.
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub schema: Schema,
    pub marginals: Vec<Marginal>,
    /// Ground-truth logit coefficients on the original feature scale.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub n: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), DatasetError> {
        let p = self.schema.len();
        if self.marginals.len() != p || self.coefficients.len() != p {
            return Err(DatasetError::BadSpec(format!(
                "{} features but {} marginals / {} coefficients",
                p,
                self.marginals.len(),
                self.coefficients.len()
            )));
        }
        if self.n == 0 {
            return Err(DatasetError::BadSpec("n must be positive".into()));
        }
        if !self.intercept.is_finite() || self.coefficients.iter().any(|b| !b.is_finite()) {
            return Err(DatasetError::BadSpec("non-finite coefficient".into()));
        }
        for (f, m) in self.schema.features().iter().zip(&self.marginals) {
            match (*m, f.kind) {
                (Marginal::Bernoulli { p }, FeatureKind::Binary) if (0.0..=1.0).contains(&p) => {}
                (Marginal::Normal { mean, sd }, FeatureKind::Numeric | FeatureKind::Ordinal)
                    if sd >= 0.0 && mean.is_finite() && sd.is_finite() => {}
                _ => return Err(DatasetError::BadSpec(format!("bad marginal for `{}`", f.name))),
            }
        }
        Ok(())
    }

    /// The 53-feature demo cohort. Coefficients follow the direction and rough
    /// size of the per-class differences; the intercept is solved so the
    /// outcome prevalence is 8.3%.
    pub fn screening_demo(n: usize, seed: u64) -> SyntheticSpec {
        let schema = screening_schema();
        let mut marginals = Vec::with_capacity(schema.len());
        let mut coefficients = Vec::with_capacity(schema.len());
        for f in schema.features() {
            let (m, b) = demo_feature(&f.name, f.kind);
            marginals.push(m);
            coefficients.push(b);
        }
        let mut spec = SyntheticSpec { schema, marginals, coefficients, intercept: 0.0, n, seed };
        spec.intercept = spec.solve_intercept(REFERENCE_PREVALENCE);
        spec
    }

    /// Bisection for the intercept giving `prevalence` on a fixed pilot sample.
    pub fn solve_intercept(&self, prevalence: f64) -> f64 {
        let pilot = SyntheticSpec { n: 20_000, seed: 0x9e37, ..self.clone() };
        let rows = pilot.draw_features();
        let eta: Vec<f64> = rows
            .chunks_exact(self.schema.len())
            .map(|r| r.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum())
            .collect();
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let rate = eta.iter().map(|e| math::sigmoid(mid + e)).sum::<f64>() / eta.len() as f64;
            if rate < prevalence {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn draw_features(&self) -> Vec<f64> {
        let mut rng = rng::rng_for_stream(self.seed, 0);
        let mut out = Vec::with_capacity(self.n * self.schema.len());
        for _ in 0..self.n {
            for (f, m) in self.schema.features().iter().zip(&self.marginals) {
                out.push(draw(f, m, &mut rng));
            }
        }
        out
    }
}

fn draw<R: Rng>(f: &FeatureSchema, m: &Marginal, rng: &mut R) -> f64 {
    match *m {
        Marginal::Bernoulli { p } => (rng.random::<f64>() < p) as u8 as f64,
        Marginal::Normal { mean, sd } => {
            let mut v = if sd > 0.0 { Normal::new(mean, sd).expect("valid normal").sample(rng) } else { mean };
            if f.kind == FeatureKind::Ordinal {
                v = v.round();
            }
            if let Some(lo) = f.lo {
                v = v.max(lo);
            }
            if let Some(hi) = f.hi {
                v = v.min(hi);
            }
            v
        }
    }
}

/// Draw a table: features from the marginals, then `target ~ Bernoulli(sigmoid(b0 + b.x))`.
pub fn synthesize(spec: &SyntheticSpec) -> Result<DataTable, DatasetError> {
    spec.validate()?;
    let p = spec.schema.len();
    let values = spec.draw_features();
    let mut rng = rng::rng_for_stream(spec.seed, 1);
    let target = values
        .chunks_exact(p)
        .map(|row| {
            let eta = spec.intercept + row.iter().zip(&spec.coefficients).map(|(x, b)| x * b).sum::<f64>();
            (rng.random::<f64>() < math::sigmoid(eta)) as u8
        })
        .collect();
    let ids = (0..spec.n).map(|i| format!("s{i:05}")).collect();
    DataTable::from_flat(spec.schema.clone(), values, target, ids)
}

/// Fixture values of the worked-example patient: a 59-year-old man with BMI 28.04.
pub const USE_CASE_PATIENT: &[(&str, f64)] = &[
    ("Age", 59.0),
    ("Female", 0.0),
    ("BMI", 28.04),
    ("HighBloodPressure", 1.0),
    ("HighCholesterol", 0.0),
    ("AlcoholConsumption", 7.0),
    ("LongTermIllness", 1.0),
    ("Sport", 4.0),
    ("MathSkills", 5.0),
    ("Orientation", 3.0),
    ("QualityOfLife", 47.0),
    ("SelfPerceivedHealth2", 1.0),
];

/// The fixture patient as a row of `training`'s schema; features without a
/// fixture value take the training column mean.
pub fn use_case_patient(training: &DataTable) -> Vec<f64> {
    let mut row = training.column_means();
    for &(name, value) in USE_CASE_PATIENT {
        if let Some(j) = training.schema().index_of(name) {
            row[j] = value;
        }
    }
    row
}

const PHYSICAL: [&str; 15] = [
    "HighBloodPressure",
    "HighCholesterol",
    "LongTermIllness",
    "HeartAttack",
    "Stroke",
    "ChronicLungDisease",
    "Arthritis",
    "Cancer",
    "StomachUlcer",
    "Parkinson",
    "Cataracts",
    "HipFracture",
    "Osteoporosis",
    "LimitedActivities",
    "ChronicDiseaseCount",
];

const BEHAVIOURAL: [&str; 5] = ["EverSmokedDaily", "AlcoholConsumption", "Sport", "VigorousActivity", "CurrentSmoker"];

/// Default 53-feature schema.
pub fn screening_schema() -> Schema {
    use FeatureGroup::*;
    use FeatureKind::*;
    let mut f = vec![
        FeatureSchema::new("Age", Numeric, Demographic).bounded(50.0, 105.0),
        FeatureSchema::new("Female", Binary, Demographic),
    ];
    for name in PHYSICAL {
        f.push(match name {
            "ChronicDiseaseCount" => FeatureSchema::new(name, Ordinal, Physical).bounded(0.0, 12.0),
            _ => FeatureSchema::new(name, Binary, Physical),
        });
    }
    f.push(FeatureSchema::new("BMI", Numeric, Aggregated).bounded(12.0, 70.0));
    f.push(FeatureSchema::new("QualityOfLife", Ordinal, Aggregated).bounded(12.0, 48.0));
    f.push(FeatureSchema::new("Orientation", Ordinal, Aggregated).bounded(0.0, 4.0));
    f.push(FeatureSchema::new("MathSkills", Ordinal, Aggregated).bounded(1.0, 5.0));
    f.push(FeatureSchema::new("SelfPerceivedHealth2", Binary, Aggregated));
    f.push(FeatureSchema::new("Guilt", Binary, Aggregated));
    for k in 1..=25 {
        f.push(FeatureSchema::new(&format!("HealthIndex{k:02}"), Numeric, Aggregated));
    }
    for name in BEHAVIOURAL {
        f.push(match name {
            "EverSmokedDaily" | "CurrentSmoker" => FeatureSchema::new(name, Binary, Behavioural),
            "AlcoholConsumption" => FeatureSchema::new(name, Ordinal, Behavioural).bounded(1.0, 7.0),
            _ => FeatureSchema::new(name, Ordinal, Behavioural).bounded(1.0, 4.0),
        });
    }
    Schema::new(f).expect("static schema is valid")
}

/// Two-class normal mixture collapsed to one normal: (mean, sd).
fn mixture(pos: (f64, f64), neg: (f64, f64)) -> Marginal {
    let w = REFERENCE_PREVALENCE;
    let mean = w * pos.0 + (1.0 - w) * neg.0;
    let second = w * (pos.1.powi(2) + pos.0.powi(2)) + (1.0 - w) * (neg.1.powi(2) + neg.0.powi(2));
    Marginal::Normal { mean, sd: (second - mean * mean).sqrt() }
}

fn mixture_rate(pos: f64, neg: f64) -> Marginal {
    Marginal::Bernoulli { p: REFERENCE_PREVALENCE * pos + (1.0 - REFERENCE_PREVALENCE) * neg }
}

/// (marginal, ground-truth coefficient) per demo feature.
fn demo_feature(name: &str, kind: FeatureKind) -> (Marginal, f64) {
    match name {
        "Age" => (mixture((65.4, 8.8), (64.9, 9.2)), 0.006),
        "Female" => (mixture_rate(0.527, 0.445), 0.33),
        "BMI" => (mixture((28.8, 4.6), (26.1, 4.0)), 0.16),
        "EverSmokedDaily" => (mixture_rate(0.505, 0.476), 0.12),
        "AlcoholConsumption" => (mixture((4.6, 2.3), (4.2, 2.2)), 0.08),
        "Sport" => (mixture((2.6, 1.3), (2.4, 1.3)), 0.12),
        "HighBloodPressure" => (mixture_rate(0.426, 0.308), 0.51),
        "HighCholesterol" => (mixture_rate(0.267, 0.208), 0.33),
        "Orientation" => (mixture((3.8, 0.5), (3.9, 0.4)), -0.45),
        "MathSkills" => (mixture((3.4, 1.1), (3.5, 1.1)), -0.08),
        "QualityOfLife" => (mixture((36.6, 6.1), (37.9, 5.8)), -0.037),
        "SelfPerceivedHealth2" => (mixture_rate(0.765, 0.654), 0.54),
        "Guilt" => (mixture_rate(0.069, 0.074), -0.075),
        "LongTermIllness" => (Marginal::Bernoulli { p: 0.45 }, 0.30),
        "HeartAttack" => (Marginal::Bernoulli { p: 0.10 }, 0.20),
        "Stroke" => (Marginal::Bernoulli { p: 0.04 }, 0.15),
        "ChronicDiseaseCount" => (Marginal::Normal { mean: 1.5, sd: 1.3 }, 0.10),
        "VigorousActivity" => (Marginal::Normal { mean: 2.2, sd: 1.2 }, 0.08),
        "CurrentSmoker" => (Marginal::Bernoulli { p: 0.20 }, 0.0),
        "HealthIndex01" => (Marginal::Normal { mean: 0.0, sd: 1.0 }, 0.15),
        "HealthIndex02" => (Marginal::Normal { mean: 0.0, sd: 1.0 }, -0.10),
        _ => match kind {
            FeatureKind::Binary => (Marginal::Bernoulli { p: 0.15 }, 0.0),
            _ => (Marginal::Normal { mean: 0.0, sd: 1.0 }, 0.0),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_layout() {
        let s = screening_schema();
        assert_eq!(s.len(), 53);
        let count = |g: FeatureGroup| s.features().iter().filter(|f| f.group == g).count();
        assert_eq!(count(FeatureGroup::Demographic), 2);
        assert_eq!(count(FeatureGroup::Physical), 15);
        assert_eq!(count(FeatureGroup::Aggregated), 31);
        assert_eq!(count(FeatureGroup::Behavioural), 5);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SyntheticSpec::screening_demo(500, 11);
        assert_eq!(synthesize(&spec).unwrap(), synthesize(&spec).unwrap());
        let other = SyntheticSpec { seed: 12, ..spec.clone() };
        assert_ne!(synthesize(&spec).unwrap(), synthesize(&other).unwrap());
    }

    #[test]
    fn null_model_prevalence() {
        let mut spec = SyntheticSpec::screening_demo(20_000, 3);
        spec.coefficients.iter_mut().for_each(|b| *b = 0.0);
        spec.intercept = math::logit(REFERENCE_PREVALENCE);
        let t = synthesize(&spec).unwrap();
        let rate = t.n_positive() as f64 / t.n_rows() as f64;
        assert!((rate - 0.083).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn demo_prevalence_near_reference() {
        let t = synthesize(&SyntheticSpec::screening_demo(20_000, 5)).unwrap();
        let rate = t.n_positive() as f64 / t.n_rows() as f64;
        assert!((rate - 0.083).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn bad_specs() {
        let mut spec = SyntheticSpec::screening_demo(10, 0);
        spec.marginals[0] = Marginal::Normal { mean: 60.0, sd: -1.0 };
        assert!(matches!(synthesize(&spec), Err(DatasetError::BadSpec(_))));
        let mut spec = SyntheticSpec::screening_demo(10, 0);
        spec.marginals[1] = Marginal::Bernoulli { p: 1.5 };
        assert!(matches!(synthesize(&spec), Err(DatasetError::BadSpec(_))));
        let mut spec = SyntheticSpec::screening_demo(10, 0);
        spec.coefficients.pop();
        assert!(matches!(synthesize(&spec), Err(DatasetError::BadSpec(_))));
    }

    #[test]
    fn patient_fixture() {
        let t = synthesize(&SyntheticSpec::screening_demo(300, 1)).unwrap();
        let row = use_case_patient(&t);
        let s = t.schema();
        assert_eq!(row[s.index_of("BMI").unwrap()], 28.04);
        assert_eq!(row[s.index_of("QualityOfLife").unwrap()], 47.0);
        assert_eq!(row[s.index_of("HighCholesterol").unwrap()], 0.0);
        assert_eq!(row[s.index_of("Female").unwrap()], 0.0);
        assert_eq!(row[s.index_of("Age").unwrap()], 59.0);
        let j = s.index_of("HealthIndex07").unwrap();
        assert_eq!(row[j], t.column_means()[j]);
    }
}
