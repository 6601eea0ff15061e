//! Run directories.
//!
//! ```text
//! <output>/run-0001/
//!   meta.json  config.toml  roster.csv
//!   <METRIC>/panel.json draws.csv convergence.csv pit.csv meta.json
//!   optimizations/0001/report.json
//!   optimizations/0001/<METRIC>/predictive.csv solutions.csv
//! ```
//!
//! Runs and optimizations are numbered and never overwritten.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lineup_core::diagnostics::ConvergenceRow;
use lineup_core::persist::read_draws;
use lineup_core::{Metric, Panel, PosteriorSample, Roster, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const META_FILE: &str = "meta.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub id: String,
    pub tool_version: String,
    pub rng: String,
    pub config: RunConfig,
    /// Roster-file index to the index used inside this run (players below the minutes threshold are absent).
    pub roster_index_map: BTreeMap<usize, usize>,
    pub metrics: Vec<Metric>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricMeta {
    pub metric: Metric,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub panel_fingerprint: String,
    pub sample_fingerprint: String,
    pub players: usize,
    pub matches: usize,
    pub observations: usize,
    pub draws: usize,
    pub convergence: Vec<ConvergenceRow>,
    pub convergence_warnings: Vec<String>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(lineup_core::Error::from)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Creates the next free `prefix-NNNN` (or `NNNN` when `prefix` is empty) directory.
pub fn create_numbered(parent: &Path, prefix: &str) -> CliResult<(String, PathBuf)> {
    create_dir(parent)?;
    let name_of = |n: u32| {
        if prefix.is_empty() {
            format!("{n:04}")
        } else {
            format!("{prefix}-{n:04}")
        }
    };
    let mut n = numbered_entries(parent, prefix).last().map_or(1, |(k, _)| k + 1);
    loop {
        let name = name_of(n);
        let path = parent.join(&name);
        match fs::create_dir(&path) {
            Ok(()) => return Ok((name, path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
            Err(e) => return Err(CliError::io(&path, e)),
        }
    }
}

/// Existing numbered entries, ascending.
pub fn numbered_entries(parent: &Path, prefix: &str) -> Vec<(u32, PathBuf)> {
    let Ok(read) = fs::read_dir(parent) else {
        return Vec::new();
    };
    let mut out: Vec<(u32, PathBuf)> = read
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            let digits = if prefix.is_empty() {
                name.as_str()
            } else {
                name.strip_prefix(prefix)?.strip_prefix('-')?
            };
            digits.parse().ok().map(|n| (n, e.path()))
        })
        .collect();
    out.sort();
    out
}

/// Run directories under `runs_dir` that have finished writing their metadata.
pub fn list_runs(runs_dir: &Path) -> Vec<(String, PathBuf)> {
    numbered_entries(runs_dir, "run")
        .into_iter()
        .filter(|(_, p)| p.join(META_FILE).is_file())
        .map(|(_, p)| (p.file_name().unwrap().to_string_lossy().into_owned(), p))
        .collect()
}

/// Everything a fitted metric needs downstream.
#[derive(Clone, Debug)]
pub struct FittedMetric {
    pub meta: MetricMeta,
    pub panel: Panel,
    pub sample: PosteriorSample,
}

#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub meta: RunMeta,
    pub roster: Roster,
    pub fitted: BTreeMap<Metric, FittedMetric>,
}

impl LoadedRun {
    pub fn metric(&self, metric: Metric) -> CliResult<&FittedMetric> {
        self.fitted
            .get(&metric)
            .ok_or_else(|| CliError::Usage(format!("run {} has no fit for metric {metric}", self.meta.id)))
    }
}

pub fn load_metric(run_dir: &Path, metric: Metric) -> CliResult<FittedMetric> {
    let dir = run_dir.join(metric.as_str());
    let meta: MetricMeta = read_json(&dir.join(META_FILE))?;
    let panel: Panel = read_json(&dir.join("panel.json"))?;
    let actual = panel.fingerprint();
    if actual != meta.panel_fingerprint {
        return Err(lineup_core::Error::StaleSample {
            expected: meta.panel_fingerprint.clone(),
            actual,
        }
        .into());
    }
    let path = dir.join("draws.csv");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let sample = read_draws(&text, meta.players, meta.matches, &meta.panel_fingerprint)?;
    if sample.fingerprint() != meta.sample_fingerprint {
        return Err(CliError::Usage(format!(
            "{} does not match the fingerprint recorded in its meta.json; refusing to use a modified sample",
            path.display()
        )));
    }
    Ok(FittedMetric { meta, panel, sample })
}

pub fn load_run(run_dir: &Path) -> CliResult<LoadedRun> {
    if !run_dir.join(META_FILE).is_file() {
        return Err(CliError::Usage(format!("{} is not a run directory (no meta.json)", run_dir.display())));
    }
    let meta: RunMeta = read_json(&run_dir.join(META_FILE))?;
    let path = run_dir.join("roster.csv");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let roster = lineup_core::parse_roster(&text)?;
    let fitted = meta
        .metrics
        .iter()
        .map(|&m| Ok((m, load_metric(run_dir, m)?)))
        .collect::<CliResult<_>>()?;
    Ok(LoadedRun {
        dir: run_dir.to_path_buf(),
        meta,
        roster,
        fitted,
    })
}
