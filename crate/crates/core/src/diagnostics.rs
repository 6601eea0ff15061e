//! Model checking and chain health.
//!
//! Leave-one-out PIT values are estimated from the full-data posterior by
//! self-normalised importance sampling with weights `1 / f(y_ij | draw)`.
//! Convergence uses split R-hat and rank-normalised (bulk) effective sample size.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::PosteriorSample;
use crate::model::linear_predictor;
use crate::panel::Panel;
use crate::scalar::{normal_cdf, normal_logpdf, normal_quantile, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PitEntry {
    pub player: usize,
    pub match_index: usize,
    /// `None` when the importance weights were degenerate.
    pub pit: Option<f64>,
    /// Importance-sampling effective sample size `(Σw)² / Σw²`.
    pub ess: f64,
    /// Degenerate weights or `ess < S/100`.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PitTable {
    pub draws: usize,
    pub entries: Vec<PitEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchPitSummary {
    pub match_index: usize,
    pub count: usize,
    pub mean_pit: f64,
    pub fraction_above_half: f64,
}

impl PitTable {
    /// PIT values of unflagged entries, in table order.
    pub fn pooled_values(&self) -> Vec<f64> {
        self.entries.iter().filter(|e| !e.flagged).filter_map(|e| e.pit).collect()
    }

    pub fn flagged(&self) -> impl Iterator<Item = &PitEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }

    /// KS test of the pooled unflagged values against U(0,1).
    pub fn uniformity(&self) -> Result<KsResult> {
        ks_uniform(&self.pooled_values())
    }

    /// Per-match averages, used to spot matches the model systematically over- or under-predicts.
    pub fn match_summaries(&self) -> Vec<MatchPitSummary> {
        let mut by_match: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for e in &self.entries {
            if let Some(p) = e.pit {
                by_match.entry(e.match_index).or_default().push(p);
            }
        }
        by_match
            .into_iter()
            .map(|(match_index, v)| MatchPitSummary {
                match_index,
                count: v.len(),
                mean_pit: v.iter().sum::<f64>() / v.len() as f64,
                fraction_above_half: v.iter().filter(|&&p| p > 0.5).count() as f64 / v.len() as f64,
            })
            .collect()
    }
}

/// Self-normalised mixture CDF `Σ w_s Φ((y − μ_s)/σ_s) / Σ w_s` with weights
/// given on the log scale. Returns `None` if the weights are degenerate.
pub fn weighted_predictive_cdf<T: Real>(log_weights: &[T], means: &[T], sds: &[T], y: T) -> Option<T> {
    let max = log_weights.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return None;
    }
    let (mut num, mut den) = (T::zero(), T::zero());
    for ((&lw, &mu), &sd) in log_weights.iter().zip(means).zip(sds) {
        let w = (lw - max).exp();
        num = num + w * normal_cdf((y - mu) / sd);
        den = den + w;
    }
    let p = num / den;
    (den > T::zero() && p.is_finite()).then(|| p.max(T::zero()).min(T::one()))
}

/// Importance-weight ESS from log weights.
pub fn importance_ess<T: Real>(log_weights: &[T]) -> T {
    let max = log_weights.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return T::zero();
    }
    let (mut s1, mut s2) = (T::zero(), T::zero());
    for &lw in log_weights {
        let w = (lw - max).exp();
        s1 = s1 + w;
        s2 = s2 + w * w;
    }
    s1 * s1 / s2
}

/// Cross-validated PIT for every panel observation.
pub fn cross_validated_pit<T: Real>(sample: &PosteriorSample<T>, panel: &Panel<T>) -> Result<PitTable> {
    let actual = panel.fingerprint();
    if sample.panel_fingerprint() != actual {
        return Err(Error::StaleSample {
            expected: sample.panel_fingerprint().to_string(),
            actual,
        });
    }
    let s = sample.len();
    let entries = panel
        .observations()
        .par_iter()
        .map(|obs| {
            let mut means = Vec::with_capacity(s);
            let mut sds = Vec::with_capacity(s);
            let mut log_w = Vec::with_capacity(s);
            for d in sample.draws() {
                let mu = linear_predictor(d, panel, obs.player, obs.match_index, obs.home)?;
                log_w.push(-normal_logpdf(obs.value, mu, d.residual_sd));
                means.push(mu);
                sds.push(d.residual_sd);
            }
            let pit = weighted_predictive_cdf(&log_w, &means, &sds, obs.value).map(Real::to_f64_lossy);
            let ess = importance_ess(&log_w).to_f64_lossy();
            Ok(PitEntry {
                player: obs.player,
                match_index: obs.match_index,
                pit,
                ess,
                flagged: pit.is_none() || !(ess >= s as f64 / 100.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PitTable { draws: s, entries })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhatResult {
    pub value: f64,
    /// All traces constant; R-hat is then defined as 1 when they agree.
    pub zero_variance: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

fn split_halves(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..n].to_vec()])
        .collect()
}

fn check_traces<T: Real>(chains: &[Vec<T>]) -> Result<Vec<Vec<f64>>> {
    if chains.len() < 2 {
        return Err(Error::Validation("split R-hat needs at least 2 chains".into()));
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 4 {
        return Err(Error::Validation("split R-hat needs at least 4 draws per chain".into()));
    }
    Ok(chains
        .iter()
        .map(|c| c[..n].iter().map(|v| v.to_f64_lossy()).collect())
        .collect())
}

/// Split-chain potential scale reduction factor. Chains are truncated to the
/// shortest; odd lengths drop the middle draw.
pub fn split_rhat<T: Real>(chains: &[Vec<T>]) -> Result<RhatResult> {
    let chains = check_traces(chains)?;
    let halves = split_halves(&chains);
    let n = halves[0].len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let within = mean(&halves.iter().map(|h| sample_var(h)).collect::<Vec<_>>());
    let between = n * sample_var(&means);
    if within == 0.0 {
        let value = if between == 0.0 { 1.0 } else { f64::INFINITY };
        return Ok(RhatResult {
            value,
            zero_variance: true,
        });
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    Ok(RhatResult {
        value: (var_plus / within).sqrt(),
        zero_variance: false,
    })
}

/// Multi-chain ESS with Geyer's initial monotone sequence estimator.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let total = (m * n) as f64;
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov = |t: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| (0..n - t).map(|k| (c[k] - mu) * (c[k + t] - mu)).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let acov0 = acov(0);
    let mean_var = acov0 * n as f64 / (n as f64 - 1.0);
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += sample_var(&means);
    }
    if !(var_plus > 0.0) {
        return total;
    }
    let rho = |t: usize| 1.0 - (mean_var - acov(t)) / var_plus;

    let mut rho_hat = vec![0.0; n];
    rho_hat[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_hat[1] = odd;
    let mut s = 1;
    while s + 4 < n && even + odd > 0.0 {
        even = rho(s + 1);
        odd = rho(s + 2);
        if even + odd >= 0.0 {
            rho_hat[s + 1] = even;
            rho_hat[s + 2] = odd;
        }
        s += 2;
    }
    let max_s = s;
    if rho_hat[max_s] < 0.0 {
        rho_hat[max_s] = 0.0;
    }
    let mut k = 1;
    while k + 3 <= max_s {
        if rho_hat[k + 1] + rho_hat[k + 2] > rho_hat[k - 1] + rho_hat[k] {
            rho_hat[k + 1] = (rho_hat[k - 1] + rho_hat[k]) / 2.0;
            rho_hat[k + 2] = rho_hat[k + 1];
        }
        k += 2;
    }
    let mut tau = -1.0 + 2.0 * rho_hat[..max_s].iter().sum::<f64>() + rho_hat[max_s];
    tau = tau.max(1.0 / total.log10());
    total / tau
}

/// Bulk ESS: rank-normalise the pooled draws, split each chain, then apply
/// [`effective_sample_size`].
pub fn bulk_ess<T: Real>(chains: &[Vec<T>]) -> Result<f64> {
    let chains = check_traces(chains)?;
    let n = chains[0].len();
    let mut pooled: Vec<(f64, usize)> = chains.iter().flatten().copied().zip(0..).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = pooled.len();
    let mut z = vec![0.0; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let v = normal_quantile((rank - 0.375) / (total as f64 + 0.25));
        for item in &pooled[i..=j] {
            z[item.1] = v;
        }
        i = j + 1;
    }
    let normalised: Vec<Vec<f64>> = z.chunks(n).map(|c| c.to_vec()).collect();
    Ok(effective_sample_size(&split_halves(&normalised)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub parameter: String,
    /// `None` with fewer than two chains.
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
    pub zero_variance: bool,
}

/// Split R-hat and bulk ESS for every scalar column of the sample.
pub fn convergence_table<T: Real>(sample: &PosteriorSample<T>) -> Vec<ConvergenceRow> {
    sample
        .traces()
        .into_par_iter()
        .map(|(parameter, chains)| {
            let rhat = split_rhat(&chains).ok();
            ConvergenceRow {
                parameter,
                rhat: rhat.map(|r| r.value),
                ess: bulk_ess(&chains).ok(),
                zero_variance: rhat.is_some_and(|r| r.zero_variance),
            }
        })
        .collect()
}

/// Thresholds beyond which a fit is reported as unconverged.
pub const RHAT_WARN: f64 = 1.05;
pub const ESS_WARN: f64 = 100.0;

/// Rows breaching the R-hat or ESS thresholds (zero-variance rows excluded).
pub fn convergence_warnings(rows: &[ConvergenceRow]) -> Vec<&ConvergenceRow> {
    rows.iter()
        .filter(|r| !r.zero_variance)
        .filter(|r| r.rhat.is_some_and(|v| !(v <= RHAT_WARN)) || r.ess.is_some_and(|v| !(v >= ESS_WARN)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov distribution tail `P(K > lambda)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 * sum.abs().max(1e-300) {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against U(0,1); p-value from the
/// asymptotic distribution with Stephens' small-sample correction.
pub fn ks_uniform(values: &[f64]) -> Result<KsResult> {
    if values.is_empty() {
        return Err(Error::Validation("KS test needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("KS value {v} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let p_value = kolmogorov_tail((sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic);
    Ok(KsResult { statistic, p_value })
}

/// Two-sample KS statistic `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxscore::Metric;
    use crate::model::ParameterDraw;
    use crate::panel::Observation;
    use crate::roster::{Roster, RosterEntry};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_chains(seed: u64, chains: usize, n: usize, offsets: &[f64]) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..chains)
            .map(|c| (0..n).map(|_| offsets[c] + rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    }

    #[test]
    fn rhat_on_iid_chains() {
        let chains = gaussian_chains(1, 4, 1000, &[0.0; 4]);
        let r = split_rhat(&chains).unwrap();
        assert!((0.99..=1.02).contains(&r.value), "{}", r.value);
        assert!(!r.zero_variance);
    }

    #[test]
    fn rhat_detects_separated_chains() {
        let chains = gaussian_chains(2, 2, 1000, &[0.0, 10.0]);
        assert!(split_rhat(&chains).unwrap().value > 2.0);
    }

    #[test]
    fn rhat_constant_chains() {
        let chains = vec![vec![3.0; 10], vec![3.0; 10]];
        let r = split_rhat(&chains).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.zero_variance);
        assert!(split_rhat(&[vec![1.0; 10]]).is_err());
        assert!(split_rhat(&[vec![1.0; 3], vec![1.0; 3]]).is_err());
    }

    #[test]
    fn ess_of_independent_and_correlated_draws() {
        let chains = gaussian_chains(3, 4, 1000, &[0.0; 4]);
        let ess = bulk_ess(&chains).unwrap();
        assert!(ess > 3000.0 && ess < 5000.0, "{ess}");

        // AR(1) with phi = 0.9: ESS/N ≈ (1 − phi)/(1 + phi) ≈ 0.053.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ar: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..5000)
                    .map(|_| {
                        x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                        x
                    })
                    .collect()
            })
            .collect();
        let ess = bulk_ess(&ar).unwrap();
        let expected = 20000.0 * 0.1 / 1.9;
        assert!((ess - expected).abs() < 0.3 * expected, "{ess} vs {expected}");
    }

    #[test]
    fn ks_examples() {
        let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        assert!(ks_uniform(&grid).unwrap().statistic <= 0.1 + 1e-12);
        let point = ks_uniform(&[0.99; 10]).unwrap();
        assert_relative_eq!(point.statistic, 0.99, epsilon = 1e-12);
        assert!(point.p_value < 1e-6);
        assert!(ks_uniform(&[]).is_err());
        assert!(matches!(ks_uniform(&[0.5, 1.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn ks_uniform_draws_pass_at_one_percent() {
        let mut passes = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let v: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
            if ks_uniform(&v).unwrap().p_value > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 95, "{passes}/100");
    }

    #[test]
    fn kolmogorov_tail_reference_points() {
        // Standard table: P(K > 1.358) ≈ 0.05, P(K > 1.628) ≈ 0.01.
        assert!((kolmogorov_tail(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_tail(1.628) - 0.01).abs() < 1e-3);
    }

    fn one_obs_panel(y: f64) -> Panel<f64> {
        let roster = Roster::new(vec![RosterEntry::new(1, "A", 2.0, false).unwrap()]).unwrap();
        Panel::new(
            roster,
            vec![Observation {
                player: 1,
                match_index: 1,
                value: y,
                home: false,
            }],
            Metric::Eff,
            1,
        )
        .unwrap()
    }

    #[test]
    fn single_draw_median_case() {
        let panel = one_obs_panel(0.7);
        let mut d = ParameterDraw::zeros(1, 1);
        d.intercept = 0.7;
        let sample = PosteriorSample::new(vec![d], vec![0], vec![1], panel.fingerprint()).unwrap();
        let table = cross_validated_pit(&sample, &panel).unwrap();
        assert_eq!(table.entries[0].pit, Some(0.5));
        assert_eq!(table.entries[0].ess, 1.0);
        assert!(!table.entries[0].flagged);
    }

    #[test]
    fn far_observation_gives_pit_near_one() {
        let panel = one_obs_panel(30.0);
        let draws: Vec<_> = (0..5)
            .map(|k| {
                let mut d = ParameterDraw::zeros(1, 1);
                d.intercept = k as f64 * 0.1;
                d
            })
            .collect();
        let sample = PosteriorSample::new(draws, vec![0; 5], (1..=5).collect(), panel.fingerprint()).unwrap();
        let table = cross_validated_pit(&sample, &panel).unwrap();
        assert!(table.entries[0].pit.unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn stale_sample_refused() {
        let panel = one_obs_panel(0.0);
        let sample = PosteriorSample::new(vec![ParameterDraw::zeros(1, 1)], vec![0], vec![1], "other".into()).unwrap();
        assert!(matches!(cross_validated_pit(&sample, &panel), Err(Error::StaleSample { .. })));
    }

    #[test]
    fn degenerate_weights_are_flagged() {
        assert_eq!(weighted_predictive_cdf::<f64>(&[f64::NAN, f64::NEG_INFINITY], &[0.0, 0.0], &[1.0, 1.0], 0.0), None);
        assert_eq!(importance_ess::<f64>(&[f64::NEG_INFINITY]), 0.0);
    }

    #[test]
    fn match_summary_averages() {
        let table = PitTable {
            draws: 10,
            entries: vec![
                PitEntry { player: 1, match_index: 3, pit: Some(0.9), ess: 5.0, flagged: false },
                PitEntry { player: 2, match_index: 3, pit: Some(0.7), ess: 5.0, flagged: false },
                PitEntry { player: 1, match_index: 9, pit: Some(0.2), ess: 0.01, flagged: true },
            ],
        };
        let s = table.match_summaries();
        assert_eq!(s.len(), 2);
        assert_relative_eq!(s[0].mean_pit, 0.8, epsilon = 1e-12);
        assert_eq!(s[0].fraction_above_half, 1.0);
        assert_eq!(table.pooled_values(), vec![0.9, 0.7]);
        assert_eq!(table.flagged().count(), 1);
    }

    proptest! {
        #[test]
        fn frozen_weight_cdf_is_monotone(
            lw in prop::collection::vec(-5.0f64..5.0, 1..20),
            seed in 0u64..500,
            y0 in -3.0f64..3.0,
            dy in 0.0f64..2.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let means: Vec<f64> = lw.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let sds: Vec<f64> = lw.iter().map(|_| rng.random_range(0.1..2.0)).collect();
            let a = weighted_predictive_cdf(&lw, &means, &sds, y0).unwrap();
            let b = weighted_predictive_cdf(&lw, &means, &sds, y0 + dy).unwrap();
            prop_assert!(b >= a);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn weights_positive_for_positive_sd(y in -5.0f64..5.0, mu in -5.0f64..5.0, sd in 0.05f64..3.0) {
            let lw = -normal_logpdf(y, mu, sd);
            prop_assert!(lw.exp() > 0.0);
        }
    }
}
