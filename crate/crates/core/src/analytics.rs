//! Posterior probabilities over the per-draw optimal line-ups, as plain
//! Monte-Carlo frequencies with binomial standard errors.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::boxscore::Metric;
use crate::error::{Error, Result};
use crate::optimize::{Lineup, Solution};
use crate::predictive::MatchScenario;

/// A frequency `count / base` with its Monte-Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub probability: f64,
    pub std_error: f64,
    pub count: usize,
    pub base: usize,
}

impl Estimate {
    pub fn from_counts(count: usize, base: usize) -> Self {
        let p = count as f64 / base as f64;
        Estimate {
            probability: p,
            std_error: (p * (1.0 - p) / base as f64).sqrt(),
            count,
            base,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineupProbability {
    pub lineup: Lineup,
    #[serde(flatten)]
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerProbability {
    pub player: usize,
    #[serde(flatten)]
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineupPosterior {
    solutions: Vec<Solution>,
    metric: Metric,
    scenario: MatchScenario,
    team_size: usize,
    player_count: usize,
}

impl LineupPosterior {
    pub fn new(
        solutions: Vec<Solution>,
        metric: Metric,
        scenario: MatchScenario,
        team_size: usize,
        player_count: usize,
    ) -> Result<Self> {
        if solutions.is_empty() {
            return Err(Error::Validation("line-up posterior needs at least one solution".into()));
        }
        if let Some(s) = solutions.iter().find(|s| s.lineup.len() != team_size) {
            return Err(Error::Validation(format!(
                "solution for draw {} has {} members, expected {team_size}",
                s.draw,
                s.lineup.len()
            )));
        }
        if let Some(&i) = solutions
            .iter()
            .flat_map(|s| s.lineup.members())
            .find(|&&i| i > player_count)
        {
            return Err(Error::UnknownPlayer(i));
        }
        Ok(LineupPosterior {
            solutions,
            metric,
            scenario,
            team_size,
            player_count,
        })
    }

    pub fn solutions(&self) -> &[Solution] {
        &self.solutions
    }

    pub fn draws(&self) -> usize {
        self.solutions.len()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn scenario(&self) -> MatchScenario {
        self.scenario
    }

    pub fn team_size(&self) -> usize {
        self.team_size
    }

    pub fn player_count(&self) -> usize {
        self.player_count
    }

    fn count_containing(&self, players: &BTreeSet<usize>) -> usize {
        self.solutions
            .iter()
            .filter(|s| s.lineup.contains_all(players))
            .count()
    }

    /// Distinct optimal line-ups, most frequent first, ties in lexicographic order.
    pub fn lineup_probabilities(&self) -> Vec<LineupProbability> {
        let mut counts: BTreeMap<&Lineup, usize> = BTreeMap::new();
        for s in &self.solutions {
            *counts.entry(&s.lineup).or_default() += 1;
        }
        let mut out: Vec<LineupProbability> = counts
            .into_iter()
            .map(|(l, c)| LineupProbability {
                lineup: l.clone(),
                estimate: Estimate::from_counts(c, self.draws()),
            })
            .collect();
        // Stable sort keeps the lexicographic order among equal counts.
        out.sort_by(|a, b| b.estimate.count.cmp(&a.estimate.count));
        out
    }

    pub fn inclusion_probability(&self, player: usize) -> Estimate {
        self.joint_probability(&BTreeSet::from([player]))
    }

    pub fn inclusion_table(&self) -> Vec<PlayerProbability> {
        (1..=self.player_count)
            .map(|player| PlayerProbability {
                player,
                estimate: self.inclusion_probability(player),
            })
            .collect()
    }

    /// Fraction of draws whose optimal line-up contains every player in `players`.
    pub fn joint_probability(&self, players: &BTreeSet<usize>) -> Estimate {
        let count = if players.len() > self.team_size {
            0
        } else {
            self.count_containing(players)
        };
        Estimate::from_counts(count, self.draws())
    }

    /// `P(targets | given)`; the standard error uses the draws containing `given` as base.
    pub fn conditional_probability(&self, targets: &BTreeSet<usize>, given: &BTreeSet<usize>) -> Result<Estimate> {
        let base = self.joint_probability(given).count;
        if base == 0 {
            return Err(Error::UndefinedConditional(given.iter().copied().collect()));
        }
        let both: BTreeSet<usize> = targets.union(given).copied().collect();
        Ok(Estimate::from_counts(self.joint_probability(&both).count, base))
    }

    /// For each player outside `given`, the probability of being in the line-up
    /// given that all of `given` are; highest first, ties by index.
    pub fn completion_table(&self, given: &BTreeSet<usize>) -> Result<Vec<PlayerProbability>> {
        let mut out = (1..=self.player_count)
            .filter(|i| !given.contains(i))
            .map(|player| {
                Ok(PlayerProbability {
                    player,
                    estimate: self.conditional_probability(&BTreeSet::from([player]), given)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.sort_by(|a, b| b.estimate.count.cmp(&a.estimate.count).then(a.player.cmp(&b.player)));
        Ok(out)
    }

    /// Keeps only draws whose line-up avoids every absent player. This is the
    /// renormalisation variant; re-solving with the players banned is exact.
    pub fn without_players(&self, absent: &BTreeSet<usize>) -> Result<LineupPosterior> {
        let kept: Vec<Solution> = self
            .solutions
            .iter()
            .filter(|s| absent.iter().all(|&a| !s.lineup.contains(a)))
            .cloned()
            .collect();
        if kept.is_empty() {
            return Err(Error::UndefinedConditional(absent.iter().copied().collect()));
        }
        Ok(LineupPosterior { solutions: kept, ..self.clone() })
    }
}
