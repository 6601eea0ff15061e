//! Gaussian mixed model with player intercepts and slopes and a match effect:
//!
//! ```text
//! y_ij ~ N(mu_ij, sigma^2)
//! mu_ij = beta0 + b0_i + b0m_j + beta_w*female_i + beta_c*class_i + beta_h*home_j + (beta1 + b1_i)*j
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::roster::Roster;
use crate::scalar::{normal_logpdf, Real};

/// Number of fixed effects (intercept, female, classification, home, trend).
pub const FIXED_EFFECTS: usize = 5;
/// Number of scale parameters (residual, player intercept, match, player slope).
pub const SCALES: usize = 4;

/// One joint draw of parameters and random effects, stored flat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ParameterDraw<T: Real> {
    pub intercept: T,
    pub female_effect: T,
    pub class_effect: T,
    pub home_effect: T,
    pub trend: T,
    pub residual_sd: T,
    pub player_intercept_sd: T,
    pub match_sd: T,
    pub player_slope_sd: T,
    /// Per-player intercept deviations, indexed by roster index − 1.
    pub player_intercepts: Vec<T>,
    /// Per-player slope deviations.
    pub player_slopes: Vec<T>,
    /// Per-match effects, indexed by match index − 1.
    pub match_effects: Vec<T>,
}

impl<T: Real> ParameterDraw<T> {
    /// All effects zero, all scales one.
    pub fn zeros(players: usize, matches: usize) -> Self {
        ParameterDraw {
            intercept: T::zero(),
            female_effect: T::zero(),
            class_effect: T::zero(),
            home_effect: T::zero(),
            trend: T::zero(),
            residual_sd: T::one(),
            player_intercept_sd: T::one(),
            match_sd: T::one(),
            player_slope_sd: T::one(),
            player_intercepts: vec![T::zero(); players],
            player_slopes: vec![T::zero(); players],
            match_effects: vec![T::zero(); matches],
        }
    }

    pub fn player_count(&self) -> usize {
        self.player_intercepts.len()
    }

    pub fn match_count(&self) -> usize {
        self.match_effects.len()
    }

    pub fn fixed_effects(&self) -> [T; FIXED_EFFECTS] {
        [self.intercept, self.female_effect, self.class_effect, self.home_effect, self.trend]
    }

    pub fn set_fixed_effects(&mut self, v: [T; FIXED_EFFECTS]) {
        [self.intercept, self.female_effect, self.class_effect, self.home_effect, self.trend] = v;
    }

    pub fn scales(&self) -> [T; SCALES] {
        [self.residual_sd, self.player_intercept_sd, self.match_sd, self.player_slope_sd]
    }

    /// Column names in flat order, matching [`ParameterDraw::to_flat`].
    pub fn column_names(players: usize, matches: usize) -> Vec<String> {
        let mut names: Vec<String> = [
            "beta0", "beta_w", "beta_c", "beta_h", "beta1", "sigma", "sigma0", "sigma0m", "sigma1",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        names.extend((1..=players).map(|i| format!("b0[{i}]")));
        names.extend((1..=players).map(|i| format!("b1[{i}]")));
        names.extend((1..=matches).map(|j| format!("b0m[{j}]")));
        names
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(9 + 2 * self.player_count() + self.match_count());
        v.extend(self.fixed_effects());
        v.extend(self.scales());
        v.extend(&self.player_intercepts);
        v.extend(&self.player_slopes);
        v.extend(&self.match_effects);
        v
    }

    pub fn from_flat(values: &[T], players: usize, matches: usize) -> Result<Self> {
        let expected = 9 + 2 * players + matches;
        if values.len() != expected {
            return Err(Error::Validation(format!(
                "draw has {} values, expected {expected} for N={players}, M={matches}",
                values.len()
            )));
        }
        let (head, rest) = values.split_at(9);
        let (b0, rest) = rest.split_at(players);
        let (b1, b0m) = rest.split_at(players);
        Ok(ParameterDraw {
            intercept: head[0],
            female_effect: head[1],
            class_effect: head[2],
            home_effect: head[3],
            trend: head[4],
            residual_sd: head[5],
            player_intercept_sd: head[6],
            match_sd: head[7],
            player_slope_sd: head[8],
            player_intercepts: b0.to_vec(),
            player_slopes: b1.to_vec(),
            match_effects: b0m.to_vec(),
        })
    }

    fn check_dims<U: Real>(&self, panel: &Panel<U>) -> Result<()> {
        if self.player_count() != panel.player_count()
            || self.player_slopes.len() != panel.player_count()
            || self.match_count() != panel.match_count()
        {
            return Err(Error::Validation(format!(
                "draw dimensions (N={}, M={}) do not match panel (N={}, M={})",
                self.player_count(),
                self.match_count(),
                panel.player_count(),
                panel.match_count()
            )));
        }
        Ok(())
    }
}

/// Independent priors: `N(0, fixed_effect_sd²)` on each fixed effect and
/// `U(0, scale_upper)` on each standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PriorSpec<T: Real> {
    pub fixed_effect_sd: T,
    pub scale_upper: T,
}

impl<T: Real> Default for PriorSpec<T> {
    fn default() -> Self {
        PriorSpec {
            fixed_effect_sd: T::lit(10.0),
            scale_upper: T::lit(10.0),
        }
    }
}

impl<T: Real> PriorSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_effect_sd > T::zero() && self.scale_upper > T::zero()) {
            return Err(Error::Validation("prior scales must be strictly positive".into()));
        }
        Ok(())
    }
}

/// Mean for player `player` at match `match_index` with an explicit match effect.
pub fn predictor_with_match_effect<T: Real>(
    draw: &ParameterDraw<T>,
    roster: &Roster,
    player: usize,
    match_index: usize,
    home: bool,
    match_effect: T,
) -> Result<T> {
    let entry = roster.entry(player)?;
    let i = player - 1;
    if i >= draw.player_count() {
        return Err(Error::Bounds(format!("player {player} beyond draw dimension {}", draw.player_count())));
    }
    if match_index == 0 {
        return Err(Error::Bounds("match index must be at least 1".into()));
    }
    let j = T::lit(match_index as f64);
    let female = if entry.is_female { T::one() } else { T::zero() };
    let home = if home { T::one() } else { T::zero() };
    let class = T::lit(entry.classification.value());
    Ok(draw.intercept
        + draw.player_intercepts[i]
        + match_effect
        + draw.female_effect * female
        + draw.class_effect * class
        + draw.home_effect * home
        + (draw.trend + draw.player_slopes[i]) * j)
}

/// `mu_ij` using the draw's own effect for match `match_index` (must be ≤ M).
pub fn linear_predictor<T: Real>(
    draw: &ParameterDraw<T>,
    panel: &Panel<T>,
    player: usize,
    match_index: usize,
    home: bool,
) -> Result<T> {
    let effect = match_index
        .checked_sub(1)
        .and_then(|j| draw.match_effects.get(j))
        .copied()
        .ok_or_else(|| Error::Bounds(format!("match {match_index} not in 1..={}", draw.match_count())))?;
    predictor_with_match_effect(draw, panel.roster(), player, match_index, home, effect)
}

/// Gaussian log-likelihood of every panel observation.
pub fn log_likelihood<T: Real>(draw: &ParameterDraw<T>, panel: &Panel<T>) -> Result<T> {
    draw.check_dims(panel)?;
    if !(draw.residual_sd > T::zero()) {
        return Err(Error::Domain(format!("residual sd must be positive, got {}", draw.residual_sd)));
    }
    let mut total = T::zero();
    for obs in panel.observations() {
        let mu = linear_predictor(draw, panel, obs.player, obs.match_index, obs.home)?;
        total = total + normal_logpdf(obs.value, mu, draw.residual_sd);
    }
    Ok(total)
}

/// Log prior of the fixed effects and scales plus the random-effects density.
/// Returns `-inf` when any scale leaves `(0, scale_upper)`.
pub fn log_prior<T: Real>(draw: &ParameterDraw<T>, prior: &PriorSpec<T>) -> T {
    let scales = draw.scales();
    if scales.iter().any(|&s| !(s > T::zero() && s < prior.scale_upper)) {
        return T::neg_infinity();
    }
    let zero = T::zero();
    let mut total: T = draw
        .fixed_effects()
        .iter()
        .map(|&b| normal_logpdf(b, zero, prior.fixed_effect_sd))
        .sum();
    total = total - T::lit(SCALES as f64) * prior.scale_upper.ln();
    total = total
        + draw
            .player_intercepts
            .iter()
            .map(|&b| normal_logpdf(b, zero, draw.player_intercept_sd))
            .sum()
        + draw
            .player_slopes
            .iter()
            .map(|&b| normal_logpdf(b, zero, draw.player_slope_sd))
            .sum()
        + draw.match_effects.iter().map(|&b| normal_logpdf(b, zero, draw.match_sd)).sum();
    total
}
