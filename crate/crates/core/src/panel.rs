//! Longitudinal panel of per-minute performance values.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boxscore::{BoxScoreRow, Metric};
use crate::error::{Error, Result};
use crate::roster::{Roster, RosterEntry};
use crate::scalar::Real;

/// Default season-minutes threshold: players must exceed it to be modelled.
pub const DEFAULT_MIN_SEASON_MINUTES: f64 = 40.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Observation<T: Real> {
    pub player: usize,
    pub match_index: usize,
    pub value: T,
    pub home: bool,
}

/// Possibly unbalanced panel `y_ij` of one metric per minute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", try_from = "PanelRepr<T>", into = "PanelRepr<T>")]
pub struct Panel<T: Real> {
    roster: Roster,
    observations: Vec<Observation<T>>,
    metric: Metric,
    match_count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct PanelRepr<T: Real> {
    metric: Metric,
    match_count: usize,
    roster: Roster,
    observations: Vec<Observation<T>>,
}

impl<T: Real> TryFrom<PanelRepr<T>> for Panel<T> {
    type Error = Error;
    fn try_from(r: PanelRepr<T>) -> Result<Self> {
        Panel::new(r.roster, r.observations, r.metric, r.match_count)
    }
}

impl<T: Real> From<Panel<T>> for PanelRepr<T> {
    fn from(p: Panel<T>) -> Self {
        PanelRepr {
            metric: p.metric,
            match_count: p.match_count,
            roster: p.roster,
            observations: p.observations,
        }
    }
}

impl<T: Real> Panel<T> {
    pub fn new(roster: Roster, observations: Vec<Observation<T>>, metric: Metric, match_count: usize) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyPanel);
        }
        let mut keys = BTreeSet::new();
        let mut home_of = BTreeMap::new();
        for obs in &observations {
            if roster.get(obs.player).is_none() {
                return Err(Error::Bounds(format!("observation player {} not in roster", obs.player)));
            }
            if obs.match_index == 0 || obs.match_index > match_count {
                return Err(Error::Bounds(format!(
                    "observation match {} not in 1..={match_count}",
                    obs.match_index
                )));
            }
            if !obs.value.is_finite() {
                return Err(Error::Domain(format!(
                    "non-finite value for player {}, match {}",
                    obs.player, obs.match_index
                )));
            }
            if !keys.insert((obs.player, obs.match_index)) {
                return Err(Error::DuplicateKey {
                    player: obs.player,
                    match_index: obs.match_index,
                });
            }
            if *home_of.entry(obs.match_index).or_insert(obs.home) != obs.home {
                return Err(Error::Validation(format!("inconsistent home flag for match {}", obs.match_index)));
            }
        }
        Ok(Panel {
            roster,
            observations,
            metric,
            match_count,
        })
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn observations(&self) -> &[Observation<T>] {
        &self.observations
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Number of players `N`.
    pub fn player_count(&self) -> usize {
        self.roster.len()
    }

    /// Number of matches `M` (largest match index).
    pub fn match_count(&self) -> usize {
        self.match_count
    }

    /// SHA-256 over a canonical, order-independent rendering of the panel.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("metric={};M={};", self.metric, self.match_count));
        for RosterEntry {
            index,
            name,
            classification,
            is_female,
        } in self.roster.entries()
        {
            hasher.update(format!("r{index}|{name}|{}|{is_female};", classification.half_points()));
        }
        let mut obs: Vec<_> = self.observations.iter().collect();
        obs.sort_by_key(|o| (o.player, o.match_index));
        for o in obs {
            hasher.update(format!("o{}|{}|{}|{};", o.player, o.match_index, o.value, o.home));
        }
        hex::encode(hasher.finalize())
    }
}

/// Old roster index to new (contiguous) index for the players kept by [`build_panel`].
pub type IndexMapping = BTreeMap<usize, usize>;

/// Builds the per-minute panel for one metric.
///
/// Rows with zero minutes carry no observation. Players whose season minutes
/// do not exceed `min_season_minutes` are removed and the survivors are
/// re-indexed contiguously in their original order. `M` is the largest match
/// index over all input rows.
pub fn build_panel<T: Real>(
    rows: &[BoxScoreRow],
    roster: &Roster,
    metric: Metric,
    min_season_minutes: f64,
) -> Result<(Panel<T>, IndexMapping)> {
    let mut season_minutes: BTreeMap<usize, f64> = BTreeMap::new();
    for row in rows {
        if roster.get(row.player).is_none() {
            return Err(Error::UnknownPlayer(row.player));
        }
        *season_minutes.entry(row.player).or_default() += row.minutes;
    }

    let mut mapping = IndexMapping::new();
    let mut kept = Vec::new();
    for entry in roster.entries() {
        let total = season_minutes.get(&entry.index).copied().unwrap_or(0.0);
        if total > min_season_minutes {
            let new_index = kept.len() + 1;
            mapping.insert(entry.index, new_index);
            kept.push(RosterEntry {
                index: new_index,
                ..entry.clone()
            });
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyPanel);
    }

    let match_count = rows.iter().map(|r| r.match_index).max().unwrap_or(0);
    let mut observations: Vec<Observation<T>> = rows
        .iter()
        .filter(|r| r.minutes > 0.0)
        .filter_map(|r| {
            mapping.get(&r.player).map(|&player| Observation {
                player,
                match_index: r.match_index,
                value: metric.evaluate::<T>(r) / T::lit(r.minutes),
                home: r.home,
            })
        })
        .collect();
    observations.sort_by_key(|o| (o.player, o.match_index));

    let panel = Panel::new(Roster::new(kept)?, observations, metric, match_count)?;
    Ok((panel, mapping))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roster::RosterEntry;

    fn roster(n: usize) -> Roster {
        Roster::new(
            (1..=n)
                .map(|i| RosterEntry::new(i, format!("P{i}"), 2.0, i % 2 == 0).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn row(player: usize, match_index: usize, minutes: f64, points: u32) -> BoxScoreRow {
        BoxScoreRow {
            player,
            match_index,
            minutes,
            points,
            ..Default::default()
        }
    }

    #[test]
    fn per_minute_division() {
        let (panel, _) = build_panel::<f64>(&[row(1, 1, 20.0, 10)], &roster(1), Metric::Eff, 0.0).unwrap();
        assert_eq!(panel.observations().len(), 1);
        assert_eq!(panel.observations()[0].value, 0.5);
    }

    #[test]
    fn low_minute_players_are_dropped_and_reindexed() {
        let rows = vec![row(1, 1, 15.0, 3), row(1, 2, 15.0, 3), row(2, 1, 30.0, 5), row(2, 2, 20.0, 5)];
        let (panel, mapping) = build_panel::<f64>(&rows, &roster(2), Metric::Eff, 40.0).unwrap();
        assert_eq!(panel.player_count(), 1);
        assert_eq!(panel.roster().entry(1).unwrap().name, "P2");
        assert_eq!(mapping.get(&2), Some(&1));
        assert!(!mapping.contains_key(&1));
        assert!(panel.observations().iter().all(|o| o.player == 1));
    }

    #[test]
    fn threshold_is_strict() {
        let rows = vec![row(1, 1, 40.0, 3), row(2, 1, 40.5, 3)];
        let (panel, _) = build_panel::<f64>(&rows, &roster(2), Metric::Eff, 40.0).unwrap();
        assert_eq!(panel.player_count(), 1);
    }

    #[test]
    fn zero_minute_rows_are_missing_observations() {
        let rows = vec![row(1, 1, 0.0, 0), row(1, 2, 50.0, 10), row(1, 3, 0.0, 0)];
        let (panel, _) = build_panel::<f64>(&rows, &roster(1), Metric::Eff, 40.0).unwrap();
        assert_eq!(panel.player_count(), 1);
        assert_eq!(panel.observations().len(), 1);
        assert_eq!(panel.match_count(), 3);
        assert!(panel.observations().iter().all(|o| o.value.is_finite()));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            build_panel::<f64>(&[row(3, 1, 10.0, 1)], &roster(2), Metric::Eff, 0.0),
            Err(Error::UnknownPlayer(3))
        ));
        assert!(matches!(
            build_panel::<f64>(&[row(1, 1, 10.0, 1)], &roster(2), Metric::Eff, 40.0),
            Err(Error::EmptyPanel)
        ));
        assert!(matches!(
            build_panel::<f64>(&[row(1, 1, 0.0, 0), row(1, 2, 0.0, 0)], &roster(1), Metric::Eff, -1.0),
            Err(Error::EmptyPanel)
        ));
    }

    #[test]
    fn output_size_counts_positive_minute_rows_of_kept_players() {
        let rows = vec![
            row(1, 1, 30.0, 1),
            row(1, 2, 0.0, 0),
            row(1, 3, 25.0, 2),
            row(2, 1, 5.0, 1),
            row(3, 2, 45.0, 8),
        ];
        let (panel, mapping) = build_panel::<f64>(&rows, &roster(3), Metric::Pir, 40.0).unwrap();
        let expected = rows
            .iter()
            .filter(|r| r.minutes > 0.0 && mapping.contains_key(&r.player))
            .count();
        assert_eq!(panel.observations().len(), expected);
        assert_eq!(expected, 3);
    }

    #[test]
    fn fingerprint_ignores_order_but_not_values() {
        let rows = vec![row(1, 1, 30.0, 1), row(1, 2, 30.0, 4)];
        let (panel, _) = build_panel::<f64>(&rows, &roster(1), Metric::Eff, 0.0).unwrap();
        let mut obs = panel.observations().to_vec();
        obs.reverse();
        let shuffled = Panel::new(panel.roster().clone(), obs.clone(), Metric::Eff, 2).unwrap();
        assert_eq!(panel.fingerprint(), shuffled.fingerprint());
        obs[0].value = 0.0;
        let changed = Panel::new(panel.roster().clone(), obs, Metric::Eff, 2).unwrap();
        assert_ne!(panel.fingerprint(), changed.fingerprint());
    }

    #[test]
    fn json_round_trip_revalidates() {
        let rows = vec![row(1, 1, 30.0, 1), row(1, 2, 30.0, 4)];
        let (panel, _) = build_panel::<f64>(&rows, &roster(1), Metric::WinScore, 0.0).unwrap();
        let text = serde_json::to_string(&panel).unwrap();
        let back: Panel<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, panel);
        let broken = text.replace("\"match_count\":2", "\"match_count\":1");
        assert!(serde_json::from_str::<Panel<f64>>(&broken).is_err());
    }
}
