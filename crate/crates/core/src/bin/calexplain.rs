use std::path::PathBuf;
use std::process::ExitCode;

use calexplain::pipeline::{self, InstanceSelector, PipelineConfig, PipelineError, RunContext};
use clap::{Parser, Subcommand, ValueEnum};

/// Train, calibrate and explain an L1-penalized logistic screening model.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Pipeline config (TOML); relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate the penalty path and fit the model.
    Train,
    /// Fit the recalibrator and write before/after diagnostics.
    Calibrate,
    /// Explain one instance under both predictors.
    Explain {
        /// `use_case`, `index:<n>` into the explanation holdout, or a row id.
        #[arg(long)]
        instance: Option<String>,
    },
    /// Compare explanations over the explanation holdout.
    Diff,
    /// Consolidate the artifacts into report.json and SVG plots.
    Report,
    /// Write the synthetic demo cohort, its schema and a demo config.
    Synth {
        #[arg(long)]
        n: Option<usize>,
        /// Settings written to calexplain.toml when no --config is given.
        #[arg(long, value_enum, default_value_t = Preset::Default)]
        preset: Preset,
    },
    /// Run train, calibrate, explain, diff and report in sequence.
    Run,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    /// Fitted on balanced classes with heavy shrinkage, so recalibration matters.
    Distorted,
}

fn run(cli: Cli) -> Result<Vec<String>, PipelineError> {
    let needs_config = !matches!(cli.command, Command::Synth { .. });
    if needs_config && cli.config.is_none() {
        return Err(PipelineError::Config("--config is required for this command".into()));
    }
    let fallback = match cli.command {
        Command::Synth { preset: Preset::Distorted, .. } => PipelineConfig::distorted_demo(),
        _ => PipelineConfig::default(),
    };
    let ctx = RunContext::load_or(cli.config.as_deref(), fallback, cli.seed, cli.out.as_deref())?;
    Ok(match cli.command {
        Command::Train => vec![pipeline::cmd_train(&ctx)?],
        Command::Calibrate => vec![pipeline::cmd_calibrate(&ctx)?],
        Command::Explain { instance } => {
            let selector = instance.map(|s| s.parse::<InstanceSelector>()).transpose()?;
            vec![pipeline::cmd_explain(&ctx, selector)?]
        }
        Command::Diff => vec![pipeline::cmd_diff(&ctx)?],
        Command::Report => vec![pipeline::cmd_report(&ctx.out_dir)?],
        Command::Synth { n, .. } => vec![pipeline::cmd_synth(&ctx, n)?],
        Command::Run => pipeline::run_all(&ctx)?,
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
