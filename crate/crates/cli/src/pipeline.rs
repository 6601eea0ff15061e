//! Fit and optimize, from input files to run artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lineup_core::diagnostics::{convergence_table, convergence_warnings, cross_validated_pit, PitTable};
use lineup_core::mcmc::RNG_ALGORITHM;
use lineup_core::optimize::class_sum;
use lineup_core::panel::build_panel;
use lineup_core::persist::{write_convergence, write_draws, write_pit, write_predictive, write_roster, write_solutions};
use lineup_core::{
    enumerate_valid_lineups, parse_boxscores, parse_roster, predict_match, run_sampler, solve_posterior, Engine,
    Lineup, LineupPosterior, MatchScenario, Metric, Panel, PosteriorSample, PredictiveSample, Roster, RuleSet,
    SelectionConstraints, Solution,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::run::{create_dir, create_numbered, load_run, write_file, write_json, MetricMeta, RunMeta, META_FILE};

/// A player given either by run index or by exact name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlayerRef {
    Index(usize),
    Name(String),
}

impl FromStr for PlayerRef {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Ok(s.parse().map(PlayerRef::Index).unwrap_or_else(|_| PlayerRef::Name(s.to_string())))
    }
}

impl PlayerRef {
    pub fn resolve(&self, roster: &Roster) -> CliResult<usize> {
        match self {
            PlayerRef::Index(i) => roster
                .get(*i)
                .map(|e| e.index)
                .ok_or(CliError::Core(lineup_core::Error::UnknownPlayer(*i))),
            PlayerRef::Name(n) => roster
                .index_of(n)
                .ok_or_else(|| CliError::Usage(format!("no player named `{n}` in this run"))),
        }
    }
}

fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn bytes_of(f: impl FnOnce(&mut Vec<u8>) -> lineup_core::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub warnings: Vec<String>,
}

/// Builds panels, runs the sampler per metric and writes a new run directory.
pub fn fit(config: &RunConfig) -> CliResult<FitOutcome> {
    config.validate()?;
    let roster_text = read_input(&config.roster)?;
    let roster = parse_roster(&roster_text).map_err(|e| with_path(&config.roster, e))?;
    let box_text = read_input(&config.boxscores)?;
    let rows = parse_boxscores(&box_text).map_err(|e| with_path(&config.boxscores, e))?;
    let sampler = config.sampler_config();

    let mut fitted = Vec::new();
    let mut mapping = BTreeMap::new();
    for &metric in &config.metrics {
        let (panel, map) = build_panel::<f64>(&rows, &roster, metric, config.min_season_minutes)?;
        let sample = run_sampler(&panel, &sampler)?;
        mapping = map;
        fitted.push((metric, panel, sample));
    }

    let (run_id, run_dir) = create_numbered(&config.output, "run")?;
    let run_roster = fitted[0].1.roster().clone();
    write_file(&run_dir.join("roster.csv"), &bytes_of(|b| write_roster(b, &run_roster))?)?;
    write_file(&run_dir.join("config.toml"), config.to_toml().as_bytes())?;

    let mut warnings = Vec::new();
    for (metric, panel, sample) in &fitted {
        let dir = run_dir.join(metric.as_str());
        create_dir(&dir)?;
        let convergence = convergence_table(sample);
        let flagged: Vec<String> = convergence_warnings(&convergence)
            .into_iter()
            .map(|r| {
                format!(
                    "{metric} {}: R-hat {} ESS {}",
                    r.parameter,
                    r.rhat.map_or("NA".into(), |v| format!("{v:.3}")),
                    r.ess.map_or("NA".into(), |v| format!("{v:.0}"))
                )
            })
            .collect();
        warnings.extend(flagged.iter().cloned());
        let pit = cross_validated_pit(sample, panel)?;
        write_json(&dir.join("panel.json"), panel)?;
        write_file(&dir.join("draws.csv"), &bytes_of(|b| write_draws(b, sample))?)?;
        write_file(&dir.join("convergence.csv"), &bytes_of(|b| write_convergence(b, &convergence))?)?;
        write_file(&dir.join("pit.csv"), &bytes_of(|b| write_pit(b, &pit))?)?;
        write_json(
            &dir.join(META_FILE),
            &MetricMeta {
                metric: *metric,
                seed: sampler.seed,
                sampler: sampler.clone(),
                panel_fingerprint: panel.fingerprint(),
                sample_fingerprint: sample.fingerprint(),
                players: panel.player_count(),
                matches: panel.match_count(),
                observations: panel.observations().len(),
                draws: sample.len(),
                convergence,
                convergence_warnings: flagged,
            },
        )?;
    }
    // Written last: a run without meta.json is incomplete and ignored.
    write_json(
        &run_dir.join(META_FILE),
        &RunMeta {
            id: run_id.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_ALGORITHM.to_string(),
            config: config.clone(),
            roster_index_map: mapping,
            metrics: config.metrics.clone(),
        },
    )?;
    Ok(FitOutcome { run_id, run_dir, warnings })
}

/// Attaches the file name to row-level input errors.
fn with_path(path: &Path, e: lineup_core::Error) -> CliError {
    match e {
        lineup_core::Error::Row { row, message } => CliError::Core(lineup_core::Error::Row {
            row,
            message: format!("{}: {message}", path.display()),
        }),
        other => CliError::config(path, other),
    }
}

/// Predictive simulation and per-draw optimisation for one fitted metric.
pub struct Analysis {
    pub predictive: PredictiveSample,
    pub solutions: Vec<Solution>,
    pub posterior: LineupPosterior,
}

pub fn analyze(
    panel: &Panel,
    sample: &PosteriorSample,
    scenario: MatchScenario,
    rules: &RuleSet,
    constraints: &SelectionConstraints,
    engine: Engine,
    seed: u64,
) -> CliResult<Analysis> {
    let predictive = predict_match(sample, panel, scenario, seed)?;
    let posterior = solve_predictive(&predictive, panel.roster(), rules, constraints, engine)?;
    Ok(Analysis {
        solutions: posterior.solutions().to_vec(),
        predictive,
        posterior,
    })
}

pub fn solve_predictive(
    predictive: &PredictiveSample,
    roster: &Roster,
    rules: &RuleSet,
    constraints: &SelectionConstraints,
    engine: Engine,
) -> CliResult<LineupPosterior> {
    let solutions = solve_posterior(predictive, roster, rules, constraints, engine)?;
    Ok(LineupPosterior::new(
        solutions,
        predictive.metric(),
        predictive.scenario(),
        rules.team_size,
        roster.len(),
    )?)
}

/// A joint (`given` empty) or conditional probability request.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub targets: BTreeSet<usize>,
    #[serde(default)]
    pub given: BTreeSet<usize>,
}

impl QuerySpec {
    /// Parses `"1,6"` (joint) or `"1,6|2"` (conditional); names are allowed.
    pub fn parse(text: &str, roster: &Roster) -> CliResult<Self> {
        let (t, g) = text.split_once('|').unwrap_or((text, ""));
        let set = |s: &str| -> CliResult<BTreeSet<usize>> {
            s.split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| p.parse::<PlayerRef>().unwrap().resolve(roster))
                .collect()
        };
        let targets = set(t)?;
        if targets.is_empty() {
            return Err(CliError::Usage(format!("query `{text}` has no target players")));
        }
        Ok(QuerySpec { targets, given: set(g)? })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineupRow {
    pub rank: usize,
    pub members: Vec<usize>,
    pub names: Vec<String>,
    pub class_sum: f64,
    pub female_count: usize,
    pub probability: f64,
    pub std_error: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerRow {
    pub player: usize,
    pub name: String,
    pub probability: f64,
    pub std_error: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub targets: Vec<usize>,
    pub given: Vec<usize>,
    pub probability: Option<f64>,
    pub std_error: Option<f64>,
    pub count: usize,
    pub base: usize,
    /// Set when the conditioning set never occurs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub draws: usize,
    pub distinct_lineups: usize,
    pub top_lineups: Vec<LineupRow>,
    pub inclusion: Vec<PlayerRow>,
    /// Probability of each remaining player completing the pinned set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion: Option<Vec<PlayerRow>>,
    pub queries: Vec<QueryResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run_id: String,
    pub optimization: String,
    pub scenario: MatchScenario,
    pub rules: RuleSet,
    pub constraints: SelectionConstraints,
    pub engine: Engine,
    pub seed: u64,
    pub feasible_lineups: usize,
    pub metrics: BTreeMap<Metric, MetricReport>,
}

fn name(roster: &Roster, i: usize) -> String {
    roster.get(i).map(|e| e.name.clone()).unwrap_or_default()
}

pub fn lineup_rows(post: &LineupPosterior, roster: &Roster, top_k: Option<usize>) -> Vec<LineupRow> {
    post.lineup_probabilities()
        .into_iter()
        .take(top_k.unwrap_or(usize::MAX))
        .enumerate()
        .map(|(k, p)| lineup_row(k + 1, &p.lineup, roster, p.estimate))
        .collect()
}

fn lineup_row(rank: usize, l: &Lineup, roster: &Roster, e: lineup_core::Estimate) -> LineupRow {
    LineupRow {
        rank,
        members: l.members().to_vec(),
        names: l.members().iter().map(|&i| name(roster, i)).collect(),
        class_sum: class_sum(l, roster).value(),
        female_count: l.female_count(roster),
        probability: e.probability,
        std_error: e.std_error,
        count: e.count,
    }
}

pub fn player_row(player: usize, roster: &Roster, e: lineup_core::Estimate) -> PlayerRow {
    PlayerRow {
        player,
        name: name(roster, player),
        probability: e.probability,
        std_error: e.std_error,
        count: e.count,
    }
}

pub fn run_query(post: &LineupPosterior, q: &QuerySpec) -> QueryResult {
    let targets = q.targets.iter().copied().collect();
    let given = q.given.iter().copied().collect();
    match post.conditional_probability(&q.targets, &q.given) {
        Ok(e) => QueryResult {
            targets,
            given,
            probability: Some(e.probability),
            std_error: Some(e.std_error),
            count: e.count,
            base: e.base,
            error: None,
        },
        Err(err) => QueryResult {
            targets,
            given,
            probability: None,
            std_error: None,
            count: 0,
            base: 0,
            error: Some(err.to_string()),
        },
    }
}

pub fn metric_report(
    post: &LineupPosterior,
    roster: &Roster,
    constraints: &SelectionConstraints,
    top_k: usize,
    queries: &[QuerySpec],
) -> CliResult<MetricReport> {
    let completion = if constraints.pinned.is_empty() {
        None
    } else {
        Some(
            post.completion_table(&constraints.pinned)?
                .into_iter()
                .filter(|p| !constraints.banned.contains(&p.player))
                .map(|p| player_row(p.player, roster, p.estimate))
                .collect(),
        )
    };
    Ok(MetricReport {
        draws: post.draws(),
        distinct_lineups: post.lineup_probabilities().len(),
        top_lineups: lineup_rows(post, roster, Some(top_k)),
        inclusion: post
            .inclusion_table()
            .into_iter()
            .map(|p| player_row(p.player, roster, p.estimate))
            .collect(),
        completion,
        queries: queries.iter().map(|q| run_query(post, q)).collect(),
    })
}

/// Overrides applied by `optimize` on top of the run's stored config.
#[derive(Clone, Debug, Default)]
pub struct OptimizeRequest {
    pub metrics: Vec<Metric>,
    pub banned: Vec<PlayerRef>,
    pub pinned: Vec<PlayerRef>,
    pub home: Option<bool>,
    pub match_index: Option<usize>,
    pub per_player_match_effect: bool,
    pub rules: Option<lineup_core::RuleMode>,
    pub engine: Option<Engine>,
    pub seed: Option<u64>,
    pub top_k: Option<usize>,
    pub queries: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub dir: PathBuf,
    pub report: Report,
}

pub fn optimize(run_dir: &Path, req: &OptimizeRequest) -> CliResult<OptimizeOutcome> {
    let run = load_run(run_dir)?;
    let cfg = &run.meta.config;
    let roster = &run.roster;

    let mut rules = cfg.rules.to_rules()?;
    if let Some(mode) = req.rules {
        rules.mode = mode;
    }
    let mut scenario = cfg.scenario;
    if let Some(h) = req.home {
        scenario.home = h;
    }
    if req.match_index.is_some() {
        scenario.match_index = req.match_index;
    }
    if req.per_player_match_effect {
        scenario.shared_match_effect = false;
    }
    let engine = req.engine.unwrap_or(cfg.optimize.engine);
    let seed = req.seed.unwrap_or(cfg.optimize.seed);
    let top_k = req.top_k.unwrap_or(cfg.optimize.top_k);
    let constraints = SelectionConstraints {
        pinned: req.pinned.iter().map(|p| p.resolve(roster)).collect::<CliResult<_>>()?,
        banned: req.banned.iter().map(|p| p.resolve(roster)).collect::<CliResult<_>>()?,
    };
    constraints.validate(roster, &rules)?;
    let queries = req
        .queries
        .iter()
        .map(|q| QuerySpec::parse(q, roster))
        .collect::<CliResult<Vec<_>>>()?;
    let metrics = if req.metrics.is_empty() {
        run.meta.metrics.clone()
    } else {
        req.metrics.clone()
    };
    let feasible = enumerate_valid_lineups(roster, &rules, &constraints)?.len();
    if feasible == 0 {
        return Err(lineup_core::Error::Infeasible {
            draws: run.metric(metrics[0])?.sample.len(),
        }
        .into());
    }

    let mut analyses = Vec::new();
    for &metric in &metrics {
        let fitted = run.metric(metric)?;
        let a = analyze(&fitted.panel, &fitted.sample, scenario, &rules, &constraints, engine, seed)?;
        analyses.push((metric, a));
    }

    let (opt_id, dir) = create_numbered(&run_dir.join("optimizations"), "")?;
    let mut blocks = BTreeMap::new();
    for (metric, a) in &analyses {
        let mdir = dir.join(metric.as_str());
        create_dir(&mdir)?;
        write_file(&mdir.join("predictive.csv"), &bytes_of(|b| write_predictive(b, &a.predictive, roster))?)?;
        write_file(&mdir.join("solutions.csv"), &bytes_of(|b| write_solutions(b, &a.solutions, roster))?)?;
        blocks.insert(*metric, metric_report(&a.posterior, roster, &constraints, top_k, &queries)?);
    }
    let resolved = analyses
        .first()
        .map(|(_, a)| a.predictive.scenario())
        .unwrap_or(scenario);
    let report = Report {
        run_id: run.meta.id.clone(),
        optimization: opt_id,
        scenario: resolved,
        rules,
        constraints,
        engine,
        seed,
        feasible_lineups: feasible,
        metrics: blocks,
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(OptimizeOutcome { dir, report })
}

/// Latest (or the numbered) report of a run.
pub fn load_report(run_dir: &Path, optimization: Option<u32>) -> CliResult<Report> {
    let entries = crate::run::numbered_entries(&run_dir.join("optimizations"), "");
    let dir = match optimization {
        Some(n) => entries.into_iter().find(|(k, _)| *k == n).map(|(_, p)| p),
        None => entries.into_iter().last().map(|(_, p)| p),
    }
    .ok_or_else(|| CliError::Usage(format!("no optimization report in {}; run `lineup optimize` first", run_dir.display())))?;
    crate::run::read_json(&dir.join("report.json"))
}

pub fn pit_table(run_dir: &Path, metric: Metric, draws: usize) -> CliResult<PitTable> {
    let path = run_dir.join(metric.as_str()).join("pit.csv");
    let text = read_input(&path)?;
    Ok(lineup_core::persist::read_pit(&text, draws)?)
}

/// Plain-text summary of a report.
pub fn render_report(report: &Report) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "run {} optimization {}: {} rules, {} feasible line-ups, scenario home={} match={} shared_effect={}",
        report.run_id,
        report.optimization,
        match report.rules.mode {
            lineup_core::RuleMode::Iwbf => "IWBF",
            lineup_core::RuleMode::Rbbl => "RBBL",
        },
        report.feasible_lineups,
        report.scenario.home,
        report.scenario.match_index.map_or("next".into(), |j| j.to_string()),
        report.scenario.shared_match_effect,
    );
    if !report.constraints.is_empty() {
        let _ = writeln!(
            out,
            "pinned {:?} banned {:?}",
            report.constraints.pinned, report.constraints.banned
        );
    }
    for (metric, block) in &report.metrics {
        let _ = writeln!(out, "\n[{metric}] {} draws, {} distinct optimal line-ups", block.draws, block.distinct_lineups);
        for row in &block.top_lineups {
            let _ = writeln!(
                out,
                "  {:>2}. {:<40} p={:.3} (se {:.3}) class {:>4} women {}",
                row.rank,
                row.names.join(", "),
                row.probability,
                row.std_error,
                row.class_sum,
                row.female_count
            );
        }
        let _ = writeln!(out, "  inclusion:");
        for p in &block.inclusion {
            let _ = writeln!(out, "    {:>2} {:<20} {:.3} (se {:.3})", p.player, p.name, p.probability, p.std_error);
        }
        if let Some(rows) = &block.completion {
            let _ = writeln!(out, "  completion given pinned players:");
            for p in rows {
                let _ = writeln!(out, "    {:>2} {:<20} {:.3} (se {:.3})", p.player, p.name, p.probability, p.std_error);
            }
        }
        for q in &block.queries {
            match q.probability {
                Some(p) => {
                    let _ = writeln!(out, "  P({:?} | {:?}) = {p:.3} (se {:.3})", q.targets, q.given, q.std_error.unwrap_or(0.0));
                }
                None => {
                    let _ = writeln!(out, "  P({:?} | {:?}) undefined: {}", q.targets, q.given, q.error.clone().unwrap_or_default());
                }
            }
        }
    }
    out
}
