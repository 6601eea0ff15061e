//! Bayesian line-up selection for wheelchair basketball.
//!
//! Box scores become per-minute performance panels, a linear mixed model is
//! fitted by Gibbs sampling, a future match is simulated from the posterior
//! predictive, and each simulated match is turned into an optimal line-up
//! under the league's classification cap. The resulting line-ups give
//! posterior probabilities for line-ups, players and player combinations.
//!
//! Numerical code is generic over [`scalar::Real`]; the aliases below fix it to `f64`.

pub mod analytics;
pub mod boxscore;
pub mod diagnostics;
pub mod error;
pub mod mcmc;
pub mod model;
pub mod optimize;
pub mod panel;
pub mod persist;
pub mod predictive;
pub mod roster;
pub mod scalar;
pub mod simulate;

pub use analytics::{Estimate, LineupPosterior};
pub use boxscore::{parse_boxscores, BoxScoreRow, Metric};
pub use error::{Error, Result};
pub use mcmc::{run_sampler, GibbsScheme, Restrictions};
pub use optimize::{
    class_sum, enumerate_valid_lineups, solve_posterior, solve_single, Engine, Lineup, RuleMode, RuleSet,
    SelectionConstraints, Solution,
};
pub use predictive::{predict_match, MatchScenario};
pub use roster::{doneck_dolphins_2022, parse_roster, Points, Roster, RosterEntry};
pub use scalar::Real;

pub type ParameterDraw = model::ParameterDraw<f64>;
pub type PriorSpec = model::PriorSpec<f64>;
pub type Panel = panel::Panel<f64>;
pub type Observation = panel::Observation<f64>;
pub type SamplerConfig = mcmc::SamplerConfig<f64>;
pub type PosteriorSample = mcmc::PosteriorSample<f64>;
pub type PredictiveSample = predictive::PredictiveSample<f64>;
