//! Posterior sampling for the mixed model.
//!
//! Each sweep draws every location parameter (fixed effects and all random
//! effects) from its exact Gaussian full conditional, then updates the four
//! standard deviations by slice sampling their conditionals
//! `s^(-n) exp(-SS / 2s^2)` on `(0, scale_upper)`. Chains are independent,
//! seeded from one ChaCha20 key with one stream per chain.

pub(crate) mod gaussian;
pub mod slice;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ParameterDraw, PriorSpec, FIXED_EFFECTS};
use crate::panel::Panel;
use crate::scalar::Real;
use gaussian::{cholesky, solve_lower, solve_lower_transpose, Design};
use slice::{scale_log_density, slice_bounded};

/// Identifier recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9), seed_from_u64(seed), stream = chain index";

/// Generator for substream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
pub(crate) fn std_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// How the location parameters are updated within a sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GibbsScheme {
    /// One joint draw of all location parameters.
    #[default]
    Blocked,
    /// Coordinate-wise draws in parameter order.
    SingleSite,
}

/// Parameters held fixed during sampling (used for reduced models).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Restrictions<T: Real> {
    pub fixed_effects: [Option<T>; FIXED_EFFECTS],
    pub residual_sd: Option<T>,
    /// Clamp every random effect at zero; the three random-effect scales are
    /// then left at their initial values.
    pub without_random_effects: bool,
}

impl<T: Real> Default for Restrictions<T> {
    fn default() -> Self {
        Restrictions {
            fixed_effects: [None; FIXED_EFFECTS],
            residual_sd: None,
            without_random_effects: false,
        }
    }
}

impl<T: Real> Restrictions<T> {
    pub fn is_none(&self) -> bool {
        *self == Restrictions::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SamplerConfig<T: Real> {
    pub chains: usize,
    pub burn_in: u64,
    pub iterations: u64,
    pub thin: u64,
    pub seed: u64,
    pub prior: PriorSpec<T>,
    #[serde(default)]
    pub scheme: GibbsScheme,
    #[serde(default, skip_serializing_if = "Restrictions::is_none")]
    pub restrictions: Restrictions<T>,
}

impl<T: Real> SamplerConfig<T> {
    /// CI-scale settings: 3 chains, 5000 burn-in, 5000 iterations thinned by 5.
    pub fn desk(seed: u64) -> Self {
        SamplerConfig {
            chains: 3,
            burn_in: 5_000,
            iterations: 5_000,
            thin: 5,
            seed,
            prior: PriorSpec::default(),
            scheme: GibbsScheme::Blocked,
            restrictions: Restrictions::default(),
        }
    }

    /// Full-length settings: 3 chains, 300 000 burn-in, 100 000 iterations thinned by 100.
    pub fn paper(seed: u64) -> Self {
        SamplerConfig {
            burn_in: 300_000,
            iterations: 100_000,
            thin: 100,
            ..Self::desk(seed)
        }
    }

    pub fn draws_per_chain(&self) -> usize {
        (self.iterations / self.thin.max(1)) as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if self.chains == 0 {
            return Err(Error::Validation("at least one chain is required".into()));
        }
        if self.thin == 0 {
            return Err(Error::Validation("thin must be at least 1".into()));
        }
        if self.iterations == 0 || self.iterations % self.thin != 0 {
            return Err(Error::Validation(format!(
                "iterations ({}) must be a positive multiple of thin ({})",
                self.iterations, self.thin
            )));
        }
        if let Some(s) = self.restrictions.residual_sd {
            if !(s > T::zero()) {
                return Err(Error::Validation("restricted residual sd must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Thinned post-burn-in draws from all chains, chain-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSample<T: Real> {
    draws: Vec<ParameterDraw<T>>,
    chains: Vec<usize>,
    iterations: Vec<u64>,
    panel_fingerprint: String,
    players: usize,
    matches: usize,
}

impl<T: Real> PosteriorSample<T> {
    pub fn new(
        draws: Vec<ParameterDraw<T>>,
        chains: Vec<usize>,
        iterations: Vec<u64>,
        panel_fingerprint: String,
    ) -> Result<Self> {
        let first = draws.first().ok_or_else(|| Error::Validation("posterior sample is empty".into()))?;
        let (players, matches) = (first.player_count(), first.match_count());
        if chains.len() != draws.len() || iterations.len() != draws.len() {
            return Err(Error::Validation("chain/iteration tags do not match draw count".into()));
        }
        for d in &draws {
            if d.player_count() != players || d.player_slopes.len() != players || d.match_count() != matches {
                return Err(Error::Validation("draws have inconsistent dimensions".into()));
            }
            if d.scales().iter().any(|&s| !(s > T::zero())) {
                return Err(Error::Validation("draw with a non-positive scale".into()));
            }
        }
        Ok(PosteriorSample {
            draws,
            chains,
            iterations,
            panel_fingerprint,
            players,
            matches,
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draws(&self) -> &[ParameterDraw<T>] {
        &self.draws
    }

    pub fn chain_ids(&self) -> &[usize] {
        &self.chains
    }

    pub fn iterations(&self) -> &[u64] {
        &self.iterations
    }

    pub fn panel_fingerprint(&self) -> &str {
        &self.panel_fingerprint
    }

    pub fn player_count(&self) -> usize {
        self.players
    }

    pub fn match_count(&self) -> usize {
        self.matches
    }

    pub fn chain_count(&self) -> usize {
        self.chains.iter().max().map_or(0, |c| c + 1)
    }

    /// Per-chain traces of every flat column (see [`ParameterDraw::column_names`]).
    pub fn traces(&self) -> Vec<(String, Vec<Vec<T>>)> {
        let names = ParameterDraw::<T>::column_names(self.players, self.matches);
        let chains = self.chain_count();
        let mut out: Vec<(String, Vec<Vec<T>>)> = names.into_iter().map(|n| (n, vec![Vec::new(); chains])).collect();
        for (d, &c) in self.draws.iter().zip(&self.chains) {
            for (k, v) in d.to_flat().into_iter().enumerate() {
                out[k].1[c].push(v);
            }
        }
        out
    }

    /// Content hash of the draws and the panel they were fitted to.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.panel_fingerprint.as_bytes());
        for ((d, c), t) in self.draws.iter().zip(&self.chains).zip(&self.iterations) {
            hasher.update(format!("{c}:{t}:"));
            for v in d.to_flat() {
                hasher.update(format!("{v},"));
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Overdispersed starting point: fixed effects from `N(0,1)`, scales uniform on
/// `(0.1, scale_upper/2)`, random effects from their priors.
pub fn initial_state<T: Real, R: Rng + ?Sized>(panel: &Panel<T>, prior: &PriorSpec<T>, rng: &mut R) -> ParameterDraw<T> {
    let mut d = ParameterDraw::zeros(panel.player_count(), panel.match_count());
    d.set_fixed_effects(std::array::from_fn(|_| std_normal(rng)));
    let lo = T::lit(0.1);
    let hi = prior.scale_upper / T::lit(2.0);
    let mut scale = || lo + T::lit(rng.random::<f64>()) * (hi - lo);
    d.residual_sd = scale();
    d.player_intercept_sd = scale();
    d.match_sd = scale();
    d.player_slope_sd = scale();
    for b in d.player_intercepts.iter_mut() {
        *b = d.player_intercept_sd * std_normal(rng);
    }
    for b in d.player_slopes.iter_mut() {
        *b = d.player_slope_sd * std_normal(rng);
    }
    for b in d.match_effects.iter_mut() {
        *b = d.match_sd * std_normal(rng);
    }
    d
}

/// Runs all chains and returns the merged, thinned sample.
pub fn run_sampler<T: Real>(panel: &Panel<T>, config: &SamplerConfig<T>) -> Result<PosteriorSample<T>> {
    config.validate()?;
    if panel.observations().is_empty() {
        return Err(Error::EmptyPanel);
    }
    let design = Design::new(panel);
    let per_chain: Vec<Vec<(u64, ParameterDraw<T>)>> = (0..config.chains)
        .into_par_iter()
        .map(|chain| ChainRunner::new(&design, panel, config, chain).run())
        .collect::<Result<_>>()?;

    let mut draws = Vec::with_capacity(config.chains * config.draws_per_chain());
    let mut chains = Vec::with_capacity(draws.capacity());
    let mut iterations = Vec::with_capacity(draws.capacity());
    for (chain, kept) in per_chain.into_iter().enumerate() {
        for (t, d) in kept {
            draws.push(d);
            chains.push(chain);
            iterations.push(t);
        }
    }
    PosteriorSample::new(draws, chains, iterations, panel.fingerprint())
}

struct ChainRunner<'a, T: Real> {
    design: &'a Design<T>,
    config: &'a SamplerConfig<T>,
    rng: ChaCha20Rng,
    draw: ParameterDraw<T>,
    x: Vec<T>,
    free: Vec<usize>,
    clamped: Vec<usize>,
    q: Vec<T>,
    h: Vec<T>,
}

impl<'a, T: Real> ChainRunner<'a, T> {
    fn new(design: &'a Design<T>, panel: &Panel<T>, config: &'a SamplerConfig<T>, chain: usize) -> Self {
        let mut rng = stream_rng(config.seed, chain as u64);
        let mut draw = initial_state(panel, &config.prior, &mut rng);
        let r = &config.restrictions;
        let mut fixed = draw.fixed_effects();
        for (v, clamp) in fixed.iter_mut().zip(&r.fixed_effects) {
            if let Some(c) = clamp {
                *v = *c;
            }
        }
        draw.set_fixed_effects(fixed);
        if let Some(s) = r.residual_sd {
            draw.residual_sd = s;
        }
        if r.without_random_effects {
            draw.player_intercepts.fill(T::zero());
            draw.player_slopes.fill(T::zero());
            draw.match_effects.fill(T::zero());
        }
        let (free, clamped): (Vec<usize>, Vec<usize>) = (0..design.dim).partition(|&k| {
            if k < FIXED_EFFECTS {
                r.fixed_effects[k].is_none()
            } else {
                !r.without_random_effects
            }
        });
        let x = design.locations(&draw);
        let f = free.len();
        ChainRunner {
            design,
            config,
            rng,
            draw,
            x,
            free,
            clamped,
            q: vec![T::zero(); f * f],
            h: vec![T::zero(); f],
        }
    }

    fn prior_precision(&self, k: usize) -> T {
        let n = self.design.players;
        let sd = if k < FIXED_EFFECTS {
            self.config.prior.fixed_effect_sd
        } else if k < FIXED_EFFECTS + n {
            self.draw.player_intercept_sd
        } else if k < FIXED_EFFECTS + 2 * n {
            self.draw.player_slope_sd
        } else {
            self.draw.match_sd
        };
        T::one() / (sd * sd)
    }

    /// Precision matrix and linear term of the free block given current scales.
    fn assemble(&mut self) {
        let dim = self.design.dim;
        let f = self.free.len();
        let inv_var = T::one() / (self.draw.residual_sd * self.draw.residual_sd);
        for a in 0..f {
            let ka = self.free[a];
            let row = &self.design.xtx[ka * dim..(ka + 1) * dim];
            for b in 0..f {
                self.q[a * f + b] = row[self.free[b]] * inv_var;
            }
            self.q[a * f + a] = self.q[a * f + a] + self.prior_precision(ka);
            let mut h = self.design.xty[ka];
            for &c in &self.clamped {
                h = h - row[c] * self.x[c];
            }
            self.h[a] = h * inv_var;
        }
    }

    fn update_locations(&mut self) -> Result<()> {
        if self.free.is_empty() {
            return Ok(());
        }
        self.assemble();
        let f = self.free.len();
        match self.config.scheme {
            GibbsScheme::Blocked => {
                if !cholesky(&mut self.q, f) {
                    return Err(Error::NonFinite {
                        parameter: "location block (precision not positive definite)".into(),
                    });
                }
                let mut mean = self.h.clone();
                solve_lower(&self.q, f, &mut mean);
                solve_lower_transpose(&self.q, f, &mut mean);
                let mut noise: Vec<T> = (0..f).map(|_| std_normal(&mut self.rng)).collect();
                solve_lower_transpose(&self.q, f, &mut noise);
                for a in 0..f {
                    self.x[self.free[a]] = mean[a] + noise[a];
                }
            }
            GibbsScheme::SingleSite => {
                for a in 0..f {
                    let mut s = self.h[a];
                    for b in 0..f {
                        if b != a {
                            s = s - self.q[a * f + b] * self.x[self.free[b]];
                        }
                    }
                    let prec = self.q[a * f + a];
                    let z: T = std_normal(&mut self.rng);
                    self.x[self.free[a]] = s / prec + z / prec.sqrt();
                }
            }
        }
        if let Some(&k) = self.free.iter().find(|&&k| !self.x[k].is_finite()) {
            return Err(Error::NonFinite {
                parameter: self.design.coordinate_name(k),
            });
        }
        self.design.write_locations(&self.x, &mut self.draw);
        Ok(())
    }

    fn slice_scale(&mut self, current: T, count: usize, ss: T, name: &str) -> Result<T> {
        let upper = self.config.prior.scale_upper;
        let next = slice_bounded(current, T::zero(), upper, scale_log_density(count, ss), &mut self.rng);
        if !next.is_finite() || !(next > T::zero()) || !(next < upper) {
            return Err(Error::NonFinite { parameter: name.into() });
        }
        Ok(next)
    }

    fn update_scales(&mut self) -> Result<()> {
        let sumsq = |v: &[T]| v.iter().map(|&b| b * b).sum::<T>();
        if self.config.restrictions.residual_sd.is_none() {
            let rss = self.design.residual_sum_of_squares(&self.x);
            let n = self.design.rows.len();
            self.draw.residual_sd = self.slice_scale(self.draw.residual_sd, n, rss, "sigma")?;
        }
        if !self.config.restrictions.without_random_effects {
            let (np, nm) = (self.design.players, self.design.matches);
            let ss = sumsq(&self.draw.player_intercepts);
            self.draw.player_intercept_sd = self.slice_scale(self.draw.player_intercept_sd, np, ss, "sigma0")?;
            let ss = sumsq(&self.draw.match_effects);
            self.draw.match_sd = self.slice_scale(self.draw.match_sd, nm, ss, "sigma0m")?;
            let ss = sumsq(&self.draw.player_slopes);
            self.draw.player_slope_sd = self.slice_scale(self.draw.player_slope_sd, np, ss, "sigma1")?;
        }
        Ok(())
    }

    fn run(mut self) -> Result<Vec<(u64, ParameterDraw<T>)>> {
        let cfg = self.config;
        let mut kept = Vec::with_capacity(cfg.draws_per_chain());
        for t in 1..=cfg.burn_in + cfg.iterations {
            self.update_locations()?;
            self.update_scales()?;
            if t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
                kept.push((t, self.draw.clone()));
            }
        }
        Ok(kept)
    }
}
