//! Team roster: functional classification points and sex per player.

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classification points stored as an exact count of half points.
///
/// Every valid classification (1.0, 1.5, ..., 4.5) and every league cap is a
/// multiple of 0.5, so sums and cap comparisons are exact integer arithmetic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct Points(u32);

impl Points {
    pub const ZERO: Points = Points(0);

    pub const fn from_half_points(half: u32) -> Self {
        Points(half)
    }

    pub const fn half_points(self) -> u32 {
        self.0
    }

    /// Exact conversion; rejects values that are not non-negative multiples of 0.5.
    pub fn from_decimal(value: f64) -> Result<Self> {
        let doubled = value * 2.0;
        if !value.is_finite() || value < 0.0 || doubled.fract() != 0.0 || doubled > u32::MAX as f64 {
            return Err(Error::Validation(format!(
                "{value} is not a non-negative multiple of 0.5"
            )));
        }
        Ok(Points(doubled as u32))
    }

    /// Largest half-point value not exceeding `value`. For caps this is
    /// equivalent to the original since every class sum is a half-point multiple.
    pub fn floor_decimal(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Validation(format!("cap {value} must be finite and non-negative")));
        }
        Ok(Points((value * 2.0).floor() as u32))
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl Add for Points {
    type Output = Points;
    fn add(self, rhs: Points) -> Points {
        Points(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Points {
    fn sum<I: Iterator<Item = Points>>(iter: I) -> Points {
        iter.fold(Points::ZERO, Add::add)
    }
}

impl From<Points> for f64 {
    fn from(p: Points) -> f64 {
        p.value()
    }
}

impl TryFrom<f64> for Points {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Points::from_decimal(v)
    }
}

impl fmt::Display for Points {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}.5", self.0 / 2)
        }
    }
}

const MIN_CLASS: Points = Points(2);
const MAX_CLASS: Points = Points(9);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    /// 1-based roster index.
    pub index: usize,
    pub name: String,
    pub classification: Points,
    pub is_female: bool,
}

impl RosterEntry {
    pub fn new(index: usize, name: impl Into<String>, classification: f64, is_female: bool) -> Result<Self> {
        let classification = Points::from_decimal(classification)?;
        let entry = RosterEntry {
            index,
            name: name.into(),
            classification,
            is_female,
        };
        entry.validate()?;
        Ok(entry)
    }

    fn validate(&self) -> Result<()> {
        if self.classification < MIN_CLASS || self.classification > MAX_CLASS {
            return Err(Error::Validation(format!(
                "player {} ({}): classification {} outside 1.0..=4.5",
                self.index, self.name, self.classification
            )));
        }
        Ok(())
    }
}

/// Validated roster: indices are unique and contiguous from 1, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RosterEntry>", into = "Vec<RosterEntry>")]
pub struct Roster {
    entries: Vec<RosterEntry>,
}

impl Roster {
    /// Accepts entries in any order and sorts them by index.
    pub fn new(mut entries: Vec<RosterEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.index);
        for (pos, entry) in entries.iter().enumerate() {
            entry.validate()?;
            if entry.index != pos + 1 {
                return Err(Error::Validation(format!(
                    "roster indices must be unique and contiguous from 1 (expected {}, found {})",
                    pos + 1,
                    entry.index
                )));
            }
        }
        Ok(Roster { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RosterEntry] {
        &self.entries
    }

    /// Entry for a 1-based index.
    pub fn get(&self, index: usize) -> Option<&RosterEntry> {
        index.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    pub fn entry(&self, index: usize) -> Result<&RosterEntry> {
        self.get(index)
            .ok_or_else(|| Error::Bounds(format!("player {index} not in 1..={}", self.len())))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.index)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.index)
    }
}

impl TryFrom<Vec<RosterEntry>> for Roster {
    type Error = Error;
    fn try_from(entries: Vec<RosterEntry>) -> Result<Self> {
        Roster::new(entries)
    }
}

impl From<Roster> for Vec<RosterEntry> {
    fn from(r: Roster) -> Self {
        r.entries
    }
}

#[derive(Deserialize)]
struct RosterRecord {
    index: String,
    name: String,
    classification: String,
    sex: String,
}

const ROSTER_COLUMNS: [&str; 4] = ["index", "name", "classification", "sex"];

/// Parses a roster file with header `index,name,classification,sex`.
pub fn parse_roster(text: &str) -> Result<Roster> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    for col in ROSTER_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    let mut entries = Vec::new();
    for (line, record) in reader.deserialize::<RosterRecord>().enumerate() {
        let row = line + 1;
        let record = record?;
        let bad = |message: String| Error::Row { row, message };
        let index: usize = record
            .index
            .parse()
            .map_err(|_| bad(format!("index `{}` is not a positive integer", record.index)))?;
        let class: f64 = record
            .classification
            .parse()
            .map_err(|_| bad(format!("classification `{}` is not a number", record.classification)))?;
        let is_female = match record.sex.as_str() {
            "F" => true,
            "M" => false,
            other => return Err(bad(format!("sex must be F or M, got `{other}`"))),
        };
        let entry = RosterEntry::new(index, record.name, class, is_female).map_err(|e| bad(e.to_string()))?;
        entries.push(entry);
    }
    Roster::new(entries)
}

/// The nine-player Doneck Dolphins Trier roster of the 2022-23 RBBL season.
pub fn doneck_dolphins_2022() -> Roster {
    let players = [
        ("Annabel Breuer", 1.5, true),
        ("Correy Rossi", 2.0, false),
        ("Dejon Green", 3.5, false),
        ("Dirk Passivan", 4.5, false),
        ("Lucas Jung", 1.0, false),
        ("Natalie Passivan", 4.5, true),
        ("Patrick Dorner", 3.5, false),
        ("Svenja Erni", 3.5, true),
        ("Walter Vlaanderen", 4.5, false),
    ];
    let entries = players
        .iter()
        .enumerate()
        .map(|(i, &(name, class, female))| RosterEntry::new(i + 1, name, class, female).expect("valid roster"))
        .collect();
    Roster::new(entries).expect("valid roster")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_are_exact_half_steps() {
        assert_eq!(Points::from_decimal(4.5).unwrap().half_points(), 9);
        assert!(Points::from_decimal(1.25).is_err());
        assert!(Points::from_decimal(-0.5).is_err());
        assert_eq!(Points::floor_decimal(14.0).unwrap(), Points::from_half_points(28));
        assert_eq!(Points::floor_decimal(14.7).unwrap(), Points::from_half_points(29));
        assert_eq!(Points::from_half_points(35).to_string(), "17.5");
        assert_eq!(Points::from_half_points(32).to_string(), "16");
    }

    #[test]
    fn parses_roster_any_column_order() {
        let text = "sex,index,classification,name\nF,2,4.5,B\nM,1,1,A\n";
        let roster = parse_roster(text).unwrap();
        assert_eq!(roster.len(), 2);
        assert_eq!(roster.entry(1).unwrap().name, "A");
        assert!(roster.entry(2).unwrap().is_female);
        assert!(roster.entry(3).is_err());
    }

    #[test]
    fn rejects_bad_rosters() {
        assert!(matches!(parse_roster("index,name,sex\n1,A,M\n"), Err(Error::MissingColumn(c)) if c == "classification"));
        assert!(parse_roster("index,name,classification,sex\n1,A,5.0,M\n").is_err());
        assert!(parse_roster("index,name,classification,sex\n1,A,3.25,M\n").is_err());
        assert!(parse_roster("index,name,classification,sex\n1,A,3,X\n").is_err());
        assert!(parse_roster("index,name,classification,sex\n1,A,3,M\n3,B,3,M\n").is_err());
        assert!(parse_roster("index,name,classification,sex\n1,A,3,M\n1,B,3,M\n").is_err());
    }

    #[test]
    fn table_roster_matches_published_classes() {
        let r = doneck_dolphins_2022();
        assert_eq!(r.len(), 9);
        let women: Vec<_> = r.entries().iter().filter(|e| e.is_female).map(|e| e.index).collect();
        assert_eq!(women, vec![1, 6, 8]);
        assert_eq!(r.index_of("Dirk Passivan"), Some(4));
        assert_eq!(r.entry(5).unwrap().classification.value(), 1.0);
    }
}
