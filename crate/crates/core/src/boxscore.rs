//! Box-score ingestion and the three per-match efficiency metrics.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoxScoreRow {
    pub player: usize,
    pub match_index: usize,
    pub minutes: f64,
    pub points: u32,
    pub rebounds: u32,
    pub assists: u32,
    pub steals: u32,
    pub blocks: u32,
    pub missed_field_goals: u32,
    pub missed_free_throws: u32,
    pub turnovers: u32,
    pub fouls_drawn: u32,
    pub shots_rejected: u32,
    pub personal_fouls: u32,
    pub field_goals_attempted: u32,
    pub free_throws_attempted: u32,
    pub home: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "EFF")]
    Eff,
    #[serde(rename = "PIR")]
    Pir,
    #[serde(rename = "WIN_SCORE")]
    WinScore,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Eff, Metric::Pir, Metric::WinScore];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Eff => "EFF",
            Metric::Pir => "PIR",
            Metric::WinScore => "WIN_SCORE",
        }
    }

    pub fn evaluate<T: Real>(self, row: &BoxScoreRow) -> T {
        match self {
            Metric::Eff => compute_eff(row),
            Metric::Pir => compute_pir(row),
            Metric::WinScore => compute_win_score(row),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "EFF" => Ok(Metric::Eff),
            "PIR" => Ok(Metric::Pir),
            "WIN_SCORE" | "WINSCORE" => Ok(Metric::WinScore),
            _ => Err(Error::Validation(format!("unknown metric `{s}` (expected EFF, PIR or WIN_SCORE)"))),
        }
    }
}

#[inline]
fn c<T: Real>(n: u32) -> T {
    T::lit(n as f64)
}

/// Individual player efficiency: positive events minus misses and turnovers.
pub fn compute_eff<T: Real>(row: &BoxScoreRow) -> T {
    let positive = row.points + row.rebounds + row.assists + row.steals + row.blocks;
    let negative = row.missed_field_goals + row.missed_free_throws + row.turnovers;
    c::<T>(positive) - c::<T>(negative)
}

/// Performance index rating: EFF plus fouls drawn, minus rejected shots and fouls committed.
pub fn compute_pir<T: Real>(row: &BoxScoreRow) -> T {
    let positive = row.points + row.rebounds + row.assists + row.steals + row.blocks + row.fouls_drawn;
    let negative = row.missed_field_goals
        + row.missed_free_throws
        + row.turnovers
        + row.shots_rejected
        + row.personal_fouls;
    c::<T>(positive) - c::<T>(negative)
}

/// Win Score: charges attempts instead of misses, half weight on assists, blocks,
/// free throws attempted and personal fouls.
pub fn compute_win_score<T: Real>(row: &BoxScoreRow) -> T {
    let half = T::lit(0.5);
    let positive = c::<T>(row.points) + c::<T>(row.rebounds) + half * c::<T>(row.assists) + c::<T>(row.steals)
        + half * c::<T>(row.blocks);
    let negative = c::<T>(row.field_goals_attempted)
        + half * c::<T>(row.free_throws_attempted)
        + c::<T>(row.turnovers)
        + half * c::<T>(row.personal_fouls);
    positive - negative
}

pub const BOXSCORE_COLUMNS: [&str; 17] = [
    "player",
    "match",
    "minutes",
    "points",
    "rebounds",
    "assists",
    "steals",
    "blocks",
    "missed_fg",
    "missed_ft",
    "turnovers",
    "fouls_drawn",
    "shots_rejected",
    "personal_fouls",
    "fga",
    "fta",
    "home",
];

/// Parses the comma-delimited box-score table. Column order is free; every
/// column in [`BOXSCORE_COLUMNS`] must be present. Rows are numbered from 1
/// (the first data line).
pub fn parse_boxscores(text: &str) -> Result<Vec<BoxScoreRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut position = BTreeMap::new();
    for col in BOXSCORE_COLUMNS {
        let idx = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn(col.to_string()))?;
        position.insert(col, idx);
    }

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    let mut match_home: BTreeMap<usize, bool> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let row_no = line + 1;
        let record = record?;
        let field = |col: &str| record.get(position[col]).unwrap_or("");
        let bad = |message: String| Error::Row { row: row_no, message };

        let count = |col: &str| -> Result<u32> {
            let raw = field(col);
            match raw.parse::<i64>() {
                Ok(v) if v < 0 => Err(bad(format!("`{col}` is negative ({raw})"))),
                Ok(v) => u32::try_from(v).map_err(|_| bad(format!("`{col}` too large ({raw})"))),
                Err(_) => Err(bad(format!("`{col}` is not a non-negative integer (`{raw}`)"))),
            }
        };
        let index = |col: &str| -> Result<usize> {
            let v = count(col)?;
            if v == 0 {
                return Err(bad(format!("`{col}` must be at least 1")));
            }
            Ok(v as usize)
        };

        let minutes_raw = field("minutes");
        let minutes: f64 = minutes_raw
            .parse()
            .map_err(|_| bad(format!("`minutes` is not a number (`{minutes_raw}`)")))?;
        if !minutes.is_finite() || minutes < 0.0 {
            return Err(bad(format!("`minutes` must be a non-negative number, got {minutes_raw}")));
        }
        let home = match field("home") {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("`home` must be 0 or 1, got `{other}`"))),
        };

        let row = BoxScoreRow {
            player: index("player")?,
            match_index: index("match")?,
            minutes,
            points: count("points")?,
            rebounds: count("rebounds")?,
            assists: count("assists")?,
            steals: count("steals")?,
            blocks: count("blocks")?,
            missed_field_goals: count("missed_fg")?,
            missed_free_throws: count("missed_ft")?,
            turnovers: count("turnovers")?,
            fouls_drawn: count("fouls_drawn")?,
            shots_rejected: count("shots_rejected")?,
            personal_fouls: count("personal_fouls")?,
            field_goals_attempted: count("fga")?,
            free_throws_attempted: count("fta")?,
            home,
        };
        if row.missed_field_goals > row.field_goals_attempted {
            return Err(bad("missed_fg exceeds fga".into()));
        }
        if row.missed_free_throws > row.free_throws_attempted {
            return Err(bad("missed_ft exceeds fta".into()));
        }
        if !seen.insert((row.player, row.match_index)) {
            return Err(Error::DuplicateKey {
                player: row.player,
                match_index: row.match_index,
            });
        }
        if let Some(&flag) = match_home.get(&row.match_index) {
            if flag != row.home {
                return Err(bad(format!("inconsistent home flag for match {}", row.match_index)));
            }
        } else {
            match_home.insert(row.match_index, row.home);
        }
        rows.push(row);
    }
    Ok(rows)
}
