//! Draw the synthetic screening cohort and print the per-class statistics.
//!
//! `cargo run --example synthetic_cohort -- [n] [out.csv]`

use calexplain::dataset::{self, FeatureStat, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5000);
    let table = dataset::synthesize(&SyntheticSpec::screening_demo(n, 42))?;
    println!(
        "{} rows, {} features, {} positive ({:.1}%)",
        table.n_rows(),
        table.n_features(),
        table.n_positive(),
        100.0 * table.n_positive() as f64 / table.n_rows() as f64
    );

    let summary = dataset::summarize(&table)?;
    println!("\n{:<24} {:>18} {:>18}", "feature", "deficit", "no deficit");
    for f in table.schema().features().iter().take(15) {
        let cell = |positive| match summary.stat(positive, &f.name) {
            Some(FeatureStat::Continuous { mean, sd }) => format!("{mean:.2} ({sd:.2})"),
            Some(FeatureStat::Prevalence { prevalence, count }) => format!("{count} ({:.1}%)", 100.0 * prevalence),
            None => "-".into(),
        };
        println!("{:<24} {:>18} {:>18}", f.name, cell(true), cell(false));
    }
    println!("... {} more features", table.n_features() - 15);

    let patient = dataset::use_case_patient(&table);
    let bmi = table.schema().index_of("BMI").unwrap();
    println!("\nfixture patient BMI: {}", patient[bmi]);

    if let Some(path) = args.next() {
        dataset::write_csv(&table, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
