//! Posterior predictive simulation of a future match by composition: for each
//! posterior draw, simulate a fresh match effect and then every player's value.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boxscore::Metric;
use crate::error::{Error, Result};
use crate::mcmc::{std_normal, stream_rng, PosteriorSample};
use crate::model::predictor_with_match_effect;
use crate::panel::Panel;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchScenario {
    pub home: bool,
    /// Match index used in the trend term; `None` means the next match, `M + 1`.
    pub match_index: Option<usize>,
    /// One match effect shared by all players (a single match) rather than one per player.
    pub shared_match_effect: bool,
}

impl Default for MatchScenario {
    fn default() -> Self {
        MatchScenario {
            home: false,
            match_index: None,
            shared_match_effect: true,
        }
    }
}

impl MatchScenario {
    /// Fills in the default match index for a panel with `match_count` matches.
    pub fn resolved(self, match_count: usize) -> Result<Self> {
        let j = self.match_index.unwrap_or(match_count + 1);
        if j == 0 {
            return Err(Error::Validation("scenario match index must be at least 1".into()));
        }
        Ok(MatchScenario {
            match_index: Some(j),
            ..self
        })
    }
}

/// `S x N` matrix of simulated per-minute values, row `s` from posterior draw `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveSample<T: Real> {
    values: Vec<T>,
    players: usize,
    metric: Metric,
    scenario: MatchScenario,
    source_fingerprint: String,
}

impl<T: Real> PredictiveSample<T> {
    pub fn from_rows(
        rows: Vec<Vec<T>>,
        metric: Metric,
        scenario: MatchScenario,
        source_fingerprint: String,
    ) -> Result<Self> {
        let players = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || players == 0 {
            return Err(Error::Validation("predictive sample is empty".into()));
        }
        if rows.iter().any(|r| r.len() != players) {
            return Err(Error::Validation("predictive rows have unequal lengths".into()));
        }
        Ok(PredictiveSample {
            values: rows.into_iter().flatten().collect(),
            players,
            metric,
            scenario,
            source_fingerprint,
        })
    }

    pub fn draws(&self) -> usize {
        self.values.len() / self.players
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn scenario(&self) -> MatchScenario {
        self.scenario
    }

    pub fn source_fingerprint(&self) -> &str {
        &self.source_fingerprint
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.values[s * self.players..(s + 1) * self.players]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> {
        self.values.chunks_exact(self.players)
    }

    /// Values of 1-based player `player` across draws.
    pub fn column(&self, player: usize) -> Vec<T> {
        self.rows().map(|r| r[player - 1]).collect()
    }
}

/// Simulates one future match per posterior draw.
pub fn predict_match<T: Real>(
    sample: &PosteriorSample<T>,
    panel: &Panel<T>,
    scenario: MatchScenario,
    seed: u64,
) -> Result<PredictiveSample<T>> {
    let actual = panel.fingerprint();
    if sample.panel_fingerprint() != actual {
        return Err(Error::StaleSample {
            expected: sample.panel_fingerprint().to_string(),
            actual,
        });
    }
    let scenario = scenario.resolved(panel.match_count())?;
    let j = scenario.match_index.expect("resolved");
    let roster = panel.roster();
    let mut rng = stream_rng(seed, 0);
    let mut rows = Vec::with_capacity(sample.len());
    for d in sample.draws() {
        let shared = d.match_sd * std_normal(&mut rng);
        let mut row = Vec::with_capacity(roster.len());
        for i in roster.indices() {
            let effect = if scenario.shared_match_effect {
                shared
            } else {
                d.match_sd * std_normal(&mut rng)
            };
            let mu = predictor_with_match_effect(d, roster, i, j, scenario.home, effect)?;
            row.push(mu + d.residual_sd * std_normal(&mut rng));
        }
        rows.push(row);
    }
    let mut hasher = Sha256::new();
    hasher.update(sample.fingerprint());
    hasher.update(format!("{scenario:?}|{seed}"));
    PredictiveSample::from_rows(rows, panel.metric(), scenario, hex::encode(hasher.finalize()))
}
