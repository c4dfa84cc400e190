#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use calexplain::pipeline::{self, PipelineConfig, RunContext};
use tempfile::TempDir;

/// A configuration small enough for the whole pipeline to run in a second or two.
pub fn small_config(seed: u64) -> PipelineConfig {
    let mut c = PipelineConfig { seed, ..Default::default() };
    c.synth.n = 3000;
    c.split.explain_holdout = 30;
    c.lasso.folds = 3;
    c.lasso.repeats = 2;
    c.lasso.nlambda = 15;
    c.lasso.lambda_min_ratio = 0.05;
    c.explain.permutations = 20;
    c
}

/// Synthesizes the demo cohort for `config` into a fresh directory and returns
/// a context loaded from the config file written next to it.
pub fn demo(config: PipelineConfig) -> (TempDir, RunContext) {
    let dir = tempfile::tempdir().unwrap();
    let ctx = RunContext::from_config(config, dir.path(), dir.path().to_path_buf()).unwrap();
    pipeline::cmd_synth(&ctx, None).unwrap();
    let ctx = RunContext::load(Some(&dir.path().join("calexplain.toml")), None, None).unwrap();
    (dir, ctx)
}

/// Every file below `root`, relative path and contents, sorted by path.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}
