//! Run configuration: one TOML document, overridable from the command line.

use std::path::{Path, PathBuf};

use lineup_core::mcmc::GibbsScheme;
use lineup_core::panel::DEFAULT_MIN_SEASON_MINUTES;
use lineup_core::{Engine, MatchScenario, Metric, Points, PriorSpec, RuleMode, RuleSet, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<GibbsScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_effect_sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RulesSection {
    pub mode: RuleMode,
    pub iwbf_cap: f64,
    pub rbbl_caps: Vec<f64>,
    pub team_size: usize,
}

impl Default for RulesSection {
    fn default() -> Self {
        RulesSection {
            mode: RuleMode::Rbbl,
            iwbf_cap: 14.0,
            rbbl_caps: vec![14.5, 16.0, 17.5],
            team_size: 5,
        }
    }
}

impl RulesSection {
    pub fn to_rules(&self) -> lineup_core::Result<RuleSet> {
        let rules = RuleSet {
            mode: self.mode,
            iwbf_cap: Points::floor_decimal(self.iwbf_cap)?,
            rbbl_caps: self
                .rbbl_caps
                .iter()
                .map(|&c| Points::floor_decimal(c))
                .collect::<lineup_core::Result<_>>()?,
            team_size: self.team_size,
        };
        rules.validate()?;
        Ok(rules)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub seed: u64,
    pub top_k: usize,
    pub engine: Engine,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        OptimizeSection {
            seed: 1,
            top_k: 10,
            engine: Engine::BranchAndBound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub roster: PathBuf,
    pub boxscores: PathBuf,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_min_minutes")]
    pub min_season_minutes: f64,
    #[serde(default)]
    pub profile: Profile,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub scenario: MatchScenario,
    #[serde(default)]
    pub rules: RulesSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
}

fn all_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

fn default_min_minutes() -> f64 {
    DEFAULT_MIN_SEASON_MINUTES
}

impl RunConfig {
    pub fn new(roster: PathBuf, boxscores: PathBuf) -> Self {
        RunConfig {
            roster,
            boxscores,
            metrics: all_metrics(),
            output: default_output(),
            min_season_minutes: DEFAULT_MIN_SEASON_MINUTES,
            profile: Profile::Desk,
            sampler: SamplerSection::default(),
            scenario: MatchScenario::default(),
            rules: RulesSection::default(),
            optimize: OptimizeSection::default(),
        }
    }

    /// Parses a config file; relative paths inside it are taken relative to the file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::config(path, e.message()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.roster, &mut cfg.boxscores, &mut cfg.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.metrics.is_empty() {
            return Err(CliError::Usage("at least one metric is required".into()));
        }
        if !(self.min_season_minutes >= 0.0) {
            return Err(CliError::Usage("min_season_minutes must be non-negative".into()));
        }
        self.rules.to_rules()?;
        self.sampler_config().validate()?;
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let s = &self.sampler;
        let base = match self.profile {
            Profile::Desk => SamplerConfig::desk(s.seed),
            Profile::Paper => SamplerConfig::paper(s.seed),
        };
        let defaults = PriorSpec::default();
        SamplerConfig {
            chains: s.chains.unwrap_or(base.chains),
            burn_in: s.burn_in.unwrap_or(base.burn_in),
            iterations: s.iterations.unwrap_or(base.iterations),
            thin: s.thin.unwrap_or(base.thin),
            scheme: s.scheme.unwrap_or(base.scheme),
            prior: PriorSpec {
                fixed_effect_sd: s.fixed_effect_sd.unwrap_or(defaults.fixed_effect_sd),
                scale_upper: s.scale_upper.unwrap_or(defaults.scale_upper),
            },
            ..base
        }
    }
}
