//! Learning posted prices in repeated bilateral trade.
//!
//! - [`trade`]: prices, valuations, gain from trade, feedback models.
//! - [`dist`]: piecewise-uniform valuation laws with exact expected-gain
//!   oracles.
//! - [`instances`]: the hard instances behind the regret lower bounds.
//! - [`learners`]: Follow the Best Price (full feedback), Scouting Bandits
//!   (realistic feedback), and baselines.
//! - [`bandits`]: UCB1 and action elimination.
//! - [`adversary`]: the nested-interval adversary for full feedback.
//! - [`harness`]: episodes, regret, sweeps and rate fits.

pub mod adversary;
pub mod bandits;
pub mod dist;
pub mod error;
pub mod harness;
pub mod instances;
pub mod learners;
pub mod trade;

pub use adversary::{run_adversarial_episode, AdversaryReport, ExactPrice};
pub use bandits::{BanditAlgorithm, BanditChoice};
pub use dist::{MixtureDistribution, PiecewiseConstant1D};
pub use error::{Error, Result};
pub use harness::{hindsight_best, pseudo_regret, run_episode, sweep, RegretReport, Trajectory};
pub use instances::InstanceSpec;
pub use learners::{Learner, LearnerSpec};
pub use trade::{
    gain_from_trade, Feedback, FeedbackKind, Price, PricePoint, RealisticFeedback, ValuationPair,
};
