//! The whole study on the distorted demo cohort: synthesize, train,
//! calibrate, explain, diff and report, all artifacts under one directory.
//!
//! `cargo run --release --example full_pipeline -- [out_dir]`

use std::path::PathBuf;

use calexplain::pipeline::{self, PipelineConfig, RunContext};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "calexplain-demo".into()).into();
    let ctx = RunContext::from_config(PipelineConfig::distorted_demo(), &out, out.clone())?;
    println!("{}", pipeline::cmd_synth(&ctx, None)?);

    // reload from the written config, as the binary would
    let ctx = RunContext::load(Some(&out.join("calexplain.toml")), None, None)?;
    for line in pipeline::run_all(&ctx)? {
        println!("{line}");
    }
    Ok(())
}
