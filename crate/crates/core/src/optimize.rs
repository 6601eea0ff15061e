//! Per-draw line-up selection: pick `team_size` players maximising summed
//! predicted value subject to the league's classification cap.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictive::PredictiveSample;
use crate::roster::{Points, Roster};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RuleMode {
    /// Single cap regardless of sex.
    Iwbf,
    /// Cap rises with the number of women on court.
    Rbbl,
}

impl std::str::FromStr for RuleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IWBF" => Ok(RuleMode::Iwbf),
            "RBBL" => Ok(RuleMode::Rbbl),
            _ => Err(Error::Validation(format!("unknown rule mode `{s}` (expected IWBF or RBBL)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub mode: RuleMode,
    pub iwbf_cap: Points,
    /// Cap by number of women on court; the last entry applies to all larger counts.
    pub rbbl_caps: Vec<Points>,
    pub team_size: usize,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::rbbl()
    }
}

impl RuleSet {
    pub fn rbbl() -> Self {
        RuleSet {
            mode: RuleMode::Rbbl,
            iwbf_cap: Points::from_half_points(28),
            rbbl_caps: vec![
                Points::from_half_points(29),
                Points::from_half_points(32),
                Points::from_half_points(35),
            ],
            team_size: 5,
        }
    }

    /// RBBL read as a flat 1.5-point bonus per woman on court (14.5, 16, 17.5, 19, ...).
    pub fn rbbl_per_woman_bonus() -> Self {
        RuleSet {
            rbbl_caps: (0..=5).map(|k| Points::from_half_points(29 + 3 * k)).collect(),
            ..Self::rbbl()
        }
    }

    pub fn iwbf() -> Self {
        RuleSet {
            mode: RuleMode::Iwbf,
            ..Self::rbbl()
        }
    }

    pub fn with_mode(mode: RuleMode) -> Self {
        match mode {
            RuleMode::Iwbf => Self::iwbf(),
            RuleMode::Rbbl => Self::rbbl(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.team_size == 0 {
            return Err(Error::Validation("team_size must be at least 1".into()));
        }
        if self.rbbl_caps.is_empty() {
            return Err(Error::Validation("rbbl_caps must not be empty".into()));
        }
        if self.iwbf_cap == Points::ZERO || self.rbbl_caps.contains(&Points::ZERO) {
            return Err(Error::Validation("caps must be strictly positive".into()));
        }
        Ok(())
    }

    pub fn capacity_for(&self, female_count: usize) -> Points {
        match self.mode {
            RuleMode::Iwbf => self.iwbf_cap,
            RuleMode::Rbbl => {
                let k = female_count.min(self.rbbl_caps.len() - 1);
                self.rbbl_caps[k]
            }
        }
    }
}

/// Sorted 1-based player indices. Ordering is lexicographic on the members.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lineup {
    members: Vec<usize>,
}

impl Lineup {
    pub fn new(members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("line-up {members:?} repeats a player")));
        }
        if members.first() == Some(&0) {
            return Err(Error::Validation("player indices are 1-based".into()));
        }
        Ok(Lineup { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, player: usize) -> bool {
        self.members.binary_search(&player).is_ok()
    }

    pub fn contains_all<'a>(&self, players: impl IntoIterator<Item = &'a usize>) -> bool {
        players.into_iter().all(|&p| self.contains(p))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn female_count(&self, roster: &Roster) -> usize {
        self.members
            .iter()
            .filter(|&&i| roster.get(i).is_some_and(|e| e.is_female))
            .count()
    }

    /// True when the line-up has the right size, valid indices and respects its cap.
    pub fn is_valid(&self, roster: &Roster, rules: &RuleSet) -> bool {
        self.len() == rules.team_size
            && self.members.iter().all(|&i| roster.get(i).is_some())
            && class_sum(self, roster) <= rules.capacity_for(self.female_count(roster))
    }

    /// Objective summed in member order, so every engine produces identical bits.
    pub fn objective<T: Real>(&self, values: &[T]) -> T {
        self.members.iter().fold(T::zero(), |acc, &i| acc + values[i - 1])
    }
}

impl fmt::Display for Lineup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.members.iter().join("-"))
    }
}

impl std::str::FromStr for Lineup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let members = s
            .split(['-', ' ', ','])
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Validation(format!("bad player index `{t}` in line-up `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Lineup::new(members)
    }
}

pub fn class_sum(lineup: &Lineup, roster: &Roster) -> Points {
    lineup
        .members
        .iter()
        .filter_map(|&i| roster.get(i))
        .map(|e| e.classification)
        .sum()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConstraints {
    #[serde(default)]
    pub pinned: BTreeSet<usize>,
    #[serde(default)]
    pub banned: BTreeSet<usize>,
}

impl SelectionConstraints {
    pub fn is_empty(&self) -> bool {
        self.pinned.is_empty() && self.banned.is_empty()
    }

    pub fn validate(&self, roster: &Roster, rules: &RuleSet) -> Result<()> {
        for &i in self.pinned.iter().chain(&self.banned) {
            if roster.get(i).is_none() {
                return Err(Error::UnknownPlayer(i));
            }
        }
        if let Some(i) = self.pinned.intersection(&self.banned).next() {
            return Err(Error::Validation(format!("player {i} is both pinned and banned")));
        }
        if self.pinned.len() > rules.team_size {
            return Err(Error::Validation(format!(
                "{} pinned players exceed the team size {}",
                self.pinned.len(),
                rules.team_size
            )));
        }
        Ok(())
    }
}

/// All feasible line-ups in lexicographic order.
pub fn enumerate_valid_lineups(
    roster: &Roster,
    rules: &RuleSet,
    constraints: &SelectionConstraints,
) -> Result<Vec<Lineup>> {
    rules.validate()?;
    constraints.validate(roster, rules)?;
    if roster.len() < rules.team_size {
        return Err(Error::Validation(format!(
            "roster has {} players, fewer than the team size {}",
            roster.len(),
            rules.team_size
        )));
    }
    let free: Vec<usize> = roster
        .indices()
        .filter(|i| !constraints.banned.contains(i) && !constraints.pinned.contains(i))
        .collect();
    let need = rules.team_size - constraints.pinned.len();
    Ok(free
        .into_iter()
        .combinations(need)
        .map(|c| Lineup::new(c.into_iter().chain(constraints.pinned.iter().copied())).expect("distinct"))
        .filter(|l| l.is_valid(roster, rules))
        .sorted()
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Reference oracle: scan every feasible line-up.
    Exhaustive,
    #[default]
    BranchAndBound,
}

impl std::str::FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Engine::Exhaustive),
            "branch_and_bound" | "bnb" => Ok(Engine::BranchAndBound),
            _ => Err(Error::Validation(format!("unknown engine `{s}`"))),
        }
    }
}

fn better<T: Real>(value: T, lineup: &Lineup, best: &Option<(T, Lineup)>) -> bool {
    match best {
        None => true,
        Some((v, l)) => value > *v || (value == *v && lineup < l),
    }
}

fn check_values<T: Real>(values: &[T], roster: &Roster) -> Result<()> {
    if values.len() != roster.len() {
        return Err(Error::Validation(format!(
            "{} values for a roster of {} players",
            values.len(),
            roster.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("value for player {} is not finite", i + 1)));
    }
    Ok(())
}

/// Best line-up for one value vector; ties go to the lexicographically smallest.
pub fn solve_single<T: Real>(
    values: &[T],
    roster: &Roster,
    rules: &RuleSet,
    constraints: &SelectionConstraints,
    engine: Engine,
) -> Result<Lineup> {
    rules.validate()?;
    constraints.validate(roster, rules)?;
    check_values(values, roster)?;
    let best = match engine {
        Engine::Exhaustive => {
            let mut best: Option<(T, Lineup)> = None;
            for l in enumerate_valid_lineups(roster, rules, constraints)? {
                let v = l.objective(values);
                if better(v, &l, &best) {
                    best = Some((v, l));
                }
            }
            best
        }
        Engine::BranchAndBound => BranchAndBound::new(values, roster, rules, constraints).run(),
    };
    best.map(|(_, l)| l).ok_or(Error::Infeasible { draws: 1 })
}

struct Candidate<T> {
    index: usize,
    value: T,
    class: Points,
    female: bool,
}

/// Depth-first search stratified by the exact number of women, so each
/// stratum has a fixed cap. Candidates are scanned in descending value order.
struct BranchAndBound<'a, T: Real> {
    values: &'a [T],
    rules: &'a RuleSet,
    pinned: Vec<usize>,
    pinned_women: usize,
    pinned_class: Points,
    pinned_value: T,
    candidates: Vec<Candidate<T>>,
    min_class_suffix: Vec<Points>,
    slack: T,
    best: Option<(T, Lineup)>,
}

impl<'a, T: Real> BranchAndBound<'a, T> {
    fn new(values: &'a [T], roster: &Roster, rules: &'a RuleSet, constraints: &SelectionConstraints) -> Self {
        let mut candidates: Vec<Candidate<T>> = roster
            .entries()
            .iter()
            .filter(|e| !constraints.banned.contains(&e.index) && !constraints.pinned.contains(&e.index))
            .map(|e| Candidate {
                index: e.index,
                value: values[e.index - 1],
                class: e.classification,
                female: e.is_female,
            })
            .collect();
        candidates.sort_by(|a, b| b.value.partial_cmp(&a.value).expect("finite").then(a.index.cmp(&b.index)));
        let mut min_class_suffix = vec![Points::from_half_points(u32::MAX / 4); candidates.len() + 1];
        for k in (0..candidates.len()).rev() {
            min_class_suffix[k] = min_class_suffix[k + 1].min(candidates[k].class);
        }
        let pinned: Vec<usize> = constraints.pinned.iter().copied().collect();
        let pinned_women = pinned.iter().filter(|&&i| roster.get(i).is_some_and(|e| e.is_female)).count();
        let pinned_class = pinned.iter().filter_map(|&i| roster.get(i)).map(|e| e.classification).sum();
        let pinned_value = pinned.iter().fold(T::zero(), |acc, &i| acc + values[i - 1]);
        let scale = values.iter().fold(T::one(), |m, v| m.max(v.abs()));
        BranchAndBound {
            values,
            rules,
            pinned,
            pinned_women,
            pinned_class,
            pinned_value,
            candidates,
            min_class_suffix,
            slack: scale * T::lit(rules.team_size as f64) * T::lit(1e-12),
            best: None,
        }
    }

    fn run(mut self) -> Option<(T, Lineup)> {
        let slots = self.rules.team_size - self.pinned.len();
        let free_women = self.candidates.iter().filter(|c| c.female).count();
        let free_men = self.candidates.len() - free_women;
        for extra_women in 0..=slots.min(free_women) {
            let men = slots - extra_women;
            if men > free_men {
                continue;
            }
            let cap = self.rules.capacity_for(self.pinned_women + extra_women);
            if self.pinned_class > cap {
                continue;
            }
            let mut chosen = Vec::with_capacity(slots);
            self.descend(0, extra_women, men, cap, self.pinned_class, self.pinned_value, &mut chosen);
        }
        self.best
    }

    /// Upper bound: partial value plus the best remaining values that fit the open slots by sex.
    fn bound(&self, from: usize, mut women: usize, mut men: usize, partial: T) -> T {
        let mut b = partial;
        for c in &self.candidates[from..] {
            if women == 0 && men == 0 {
                break;
            }
            if c.female && women > 0 {
                women -= 1;
                b = b + c.value;
            } else if !c.female && men > 0 {
                men -= 1;
                b = b + c.value;
            }
        }
        b
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(&mut self, from: usize, women: usize, men: usize, cap: Points, class: Points, partial: T, chosen: &mut Vec<usize>) {
        if women == 0 && men == 0 {
            let lineup = Lineup::new(chosen.iter().chain(&self.pinned).copied()).expect("distinct");
            let v = lineup.objective(self.values);
            if better(v, &lineup, &self.best) {
                self.best = Some((v, lineup));
            }
            return;
        }
        if from >= self.candidates.len() {
            return;
        }
        let open = (women + men) as u32;
        if class.half_points() + open * self.min_class_suffix[from].half_points() > cap.half_points() {
            return;
        }
        if let Some((best, _)) = &self.best {
            if self.bound(from, women, men, partial) + self.slack < *best {
                return;
            }
        }
        for k in from..self.candidates.len() {
            let c = &self.candidates[k];
            let (w, m) = match (c.female, women, men) {
                (true, w, m) if w > 0 => (w - 1, m),
                (false, w, m) if m > 0 => (w, m - 1),
                _ => continue,
            };
            let next_class = class + c.class;
            if next_class > cap {
                continue;
            }
            let (index, value) = (c.index, c.value);
            chosen.push(index);
            self.descend(k + 1, w, m, cap, next_class, partial + value, chosen);
            chosen.pop();
        }
    }
}

/// Optimal line-up of one posterior predictive draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub draw: usize,
    pub lineup: Lineup,
    pub objective: f64,
}

/// Solves every row of the predictive matrix; output order follows the draws.
pub fn solve_posterior<T: Real>(
    pred: &PredictiveSample<T>,
    roster: &Roster,
    rules: &RuleSet,
    constraints: &SelectionConstraints,
    engine: Engine,
) -> Result<Vec<Solution>> {
    if pred.players() != roster.len() {
        return Err(Error::Validation(format!(
            "predictive sample has {} columns for a roster of {} players",
            pred.players(),
            roster.len()
        )));
    }
    rules.validate()?;
    constraints.validate(roster, rules)?;
    if enumerate_valid_lineups(roster, rules, constraints)?.is_empty() {
        return Err(Error::Infeasible { draws: pred.draws() });
    }
    (0..pred.draws())
        .into_par_iter()
        .map(|s| {
            let row = pred.row(s);
            let lineup = solve_single(row, roster, rules, constraints, engine)?;
            Ok(Solution {
                draw: s,
                objective: lineup.objective(row).to_f64_lossy(),
                lineup,
            })
        })
        .collect()
}
