//! Synthetic panels drawn from the model itself, for calibration checks.

use rand::Rng;

use crate::boxscore::Metric;
use crate::diagnostics::{cross_validated_pit, KsResult};
use crate::error::Result;
use crate::mcmc::{run_sampler, std_normal, stream_rng, SamplerConfig};
use crate::model::{linear_predictor, ParameterDraw};
use crate::panel::{Observation, Panel};
use crate::roster::Roster;
use crate::scalar::Real;

/// Known generating values for fixed effects and scales.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratingValues<T> {
    pub fixed_effects: [T; 5],
    /// `[residual, player intercept, match, player slope]` standard deviations.
    pub scales: [T; 4],
}

impl GeneratingValues<f64> {
    /// Per-minute magnitudes in the range seen for wheelchair-basketball box scores.
    pub fn typical() -> Self {
        GeneratingValues {
            fixed_effects: [0.15, -0.05, 0.08, 0.04, 0.002],
            scales: [0.2, 0.1, 0.06, 0.004],
        }
    }
}

/// Draws player and match random effects around the generating values.
pub fn draw_truth<T: Real, R: Rng + ?Sized>(
    values: &GeneratingValues<T>,
    players: usize,
    matches: usize,
    rng: &mut R,
) -> ParameterDraw<T> {
    let mut d = ParameterDraw::zeros(players, matches);
    d.set_fixed_effects(values.fixed_effects);
    [d.residual_sd, d.player_intercept_sd, d.match_sd, d.player_slope_sd] = values.scales;
    for b in d.player_intercepts.iter_mut() {
        *b = values.scales[1] * std_normal(rng);
    }
    for b in d.player_slopes.iter_mut() {
        *b = values.scales[3] * std_normal(rng);
    }
    for b in d.match_effects.iter_mut() {
        *b = values.scales[2] * std_normal(rng);
    }
    d
}

/// Every player observed in every match; home matches alternate, starting away.
pub fn simulate_panel<T: Real, R: Rng + ?Sized>(
    roster: &Roster,
    truth: &ParameterDraw<T>,
    metric: Metric,
    rng: &mut R,
) -> Result<Panel<T>> {
    let matches = truth.match_count();
    let skeleton: Vec<Observation<T>> = roster
        .indices()
        .flat_map(|i| {
            (1..=matches).map(move |j| Observation {
                player: i,
                match_index: j,
                value: T::zero(),
                home: j % 2 == 0,
            })
        })
        .collect();
    let empty = Panel::new(roster.clone(), skeleton.clone(), metric, matches)?;
    let observations = skeleton
        .into_iter()
        .map(|o| {
            let mu = linear_predictor(truth, &empty, o.player, o.match_index, o.home)?;
            Ok(Observation {
                value: mu + truth.residual_sd * std_normal(rng),
                ..o
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Panel::new(roster.clone(), observations, metric, matches)
}

/// Equal-tailed interval from empirical quantiles (linear interpolation).
pub fn credible_interval(values: &[f64], level: f64) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    let tail = (1.0 - level) / 2.0;
    (q(tail), q(1.0 - tail))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub replications: usize,
    /// Replications whose interval covered each true fixed effect.
    pub covered: [usize; 5],
}

impl CoverageReport {
    pub fn pooled_rate(&self) -> f64 {
        self.covered.iter().sum::<usize>() as f64 / (5 * self.replications) as f64
    }
}

fn replicate_panel(
    roster: &Roster,
    values: &GeneratingValues<f64>,
    matches: usize,
    seed: u64,
    rep: usize,
) -> Result<Panel<f64>> {
    let mut rng = stream_rng(seed, 1_000 + rep as u64);
    let truth = draw_truth(values, roster.len(), matches, &mut rng);
    simulate_panel(roster, &truth, Metric::WinScore, &mut rng)
}

/// Fits `replications` synthetic panels and counts how often each `level`
/// credible interval contains the generating fixed effect.
pub fn fixed_effect_coverage(
    roster: &Roster,
    values: &GeneratingValues<f64>,
    matches: usize,
    config: &SamplerConfig<f64>,
    replications: usize,
    level: f64,
    seed: u64,
) -> Result<CoverageReport> {
    let mut covered = [0; 5];
    for rep in 0..replications {
        let panel = replicate_panel(roster, values, matches, seed, rep)?;
        let cfg = SamplerConfig {
            seed: seed.wrapping_add(rep as u64),
            ..config.clone()
        };
        let sample = run_sampler(&panel, &cfg)?;
        for (k, hits) in covered.iter_mut().enumerate() {
            let trace: Vec<f64> = sample.draws().iter().map(|d| d.fixed_effects()[k]).collect();
            let (lo, hi) = credible_interval(&trace, level);
            if lo <= values.fixed_effects[k] && values.fixed_effects[k] <= hi {
                *hits += 1;
            }
        }
    }
    Ok(CoverageReport { replications, covered })
}

/// One KS test of pooled cross-validated PIT values per synthetic replication.
pub fn pit_replications(
    roster: &Roster,
    values: &GeneratingValues<f64>,
    matches: usize,
    config: &SamplerConfig<f64>,
    replications: usize,
    seed: u64,
) -> Result<Vec<KsResult>> {
    (0..replications)
        .map(|rep| {
            let panel = replicate_panel(roster, values, matches, seed, rep)?;
            let cfg = SamplerConfig {
                seed: seed.wrapping_add(rep as u64),
                ..config.clone()
            };
            let sample = run_sampler(&panel, &cfg)?;
            cross_validated_pit(&sample, &panel)?.uniformity()
        })
        .collect()
}
