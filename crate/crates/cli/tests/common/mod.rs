#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use jsonschema::{Resource, Validator};
use lineup_cli::config::RunConfig;
use serde_json::Value;
use tempfile::TempDir;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Synthetic inputs with a short sampler so tests stay quick.
pub fn quick_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::new(data_dir().join("roster.csv"), data_dir().join("boxscores.csv"));
    cfg.output = out.to_path_buf();
    cfg.sampler.seed = 11;
    cfg.sampler.chains = Some(2);
    cfg.sampler.burn_in = Some(500);
    cfg.sampler.iterations = Some(1000);
    cfg.sampler.thin = Some(2);
    cfg
}

pub fn write_quick_config(dir: &Path) -> PathBuf {
    let cfg = quick_config(&dir.join("runs"));
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

/// One fitted run shared by every test in the binary.
pub fn shared_run() -> &'static Path {
    static RUN: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    &RUN.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let outcome = lineup_cli::pipeline::fit(&quick_config(&tmp.path().join("runs"))).unwrap();
        (tmp, outcome.run_dir)
    })
    .1
}

pub fn runs_dir() -> &'static Path {
    shared_run().parent().unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn load(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(schema_dir().join(name)).unwrap()).unwrap()
}

pub fn validator(name: &str) -> Validator {
    let defs = load("defs.json");
    jsonschema::options()
        .with_resource(
            "https://example.com/lineup/schemas/defs.json",
            Resource::from_contents(defs).unwrap(),
        )
        .build(&load(name))
        .unwrap()
}

pub fn assert_valid(schema: &str, instance: &Value) {
    let v = validator(schema);
    let errors: Vec<String> = v.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema}: {errors:#?}\n{instance:#}");
}
