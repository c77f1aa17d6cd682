//! Posted-price learners.
//!
//! A learner posts one price per round and then sees feedback of the single
//! kind it declares. All randomness comes from the uniform stream the caller
//! passes to [`Learner::act`], so a learner is a deterministic function of
//! that stream and its feedback history.

mod baseline;
mod doubling;
mod fbp;
pub mod objective;
mod sb;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use baseline::{FixedPrice, UniformPrice};
pub use doubling::Doubling;
pub use fbp::FollowBestPrice;
pub use sb::{sb_configure, Phase, SbState, ScoutingBandits};

use crate::bandits::BanditChoice;
use crate::error::{Error, Result};
use crate::trade::{Feedback, FeedbackKind, Price, PricePoint, RealisticFeedback, ValuationPair};

pub trait Learner<V: PricePoint = Price>: Send {
    fn name(&self) -> &'static str;

    fn required_feedback(&self) -> FeedbackKind;

    /// True when the next price is a function of the feedback history alone.
    fn is_deterministic(&self) -> bool;

    /// Start a fresh episode. Horizon-dependent learners reject `None`.
    fn reset(&mut self, horizon: Option<usize>) -> Result<()>;

    /// Price for `round` (1-based).
    fn act(&mut self, round: usize, uniforms: &mut dyn RngCore) -> V;

    /// Feedback for the price posted at `round`.
    fn observe(&mut self, round: usize, posted: &V, feedback: &Feedback<V>) -> Result<()>;
}

impl<V: PricePoint, L: Learner<V> + ?Sized> Learner<V> for Box<L> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn required_feedback(&self) -> FeedbackKind {
        (**self).required_feedback()
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
    fn reset(&mut self, horizon: Option<usize>) -> Result<()> {
        (**self).reset(horizon)
    }
    fn act(&mut self, round: usize, uniforms: &mut dyn RngCore) -> V {
        (**self).act(round, uniforms)
    }
    fn observe(&mut self, round: usize, posted: &V, feedback: &Feedback<V>) -> Result<()> {
        (**self).observe(round, posted, feedback)
    }
}

pub(crate) fn expect_full<'a, V>(
    feedback: &'a Feedback<V>,
    context: &str,
) -> Result<&'a ValuationPair<V>> {
    match feedback {
        Feedback::Full(f) => Ok(&f.valuations),
        Feedback::Realistic(_) => Err(Error::Contract {
            required: FeedbackKind::Full,
            context: format!("{context} received realistic feedback"),
        }),
    }
}

pub(crate) fn expect_realistic<V>(feedback: &Feedback<V>, context: &str) -> Result<RealisticFeedback> {
    match feedback {
        Feedback::Realistic(f) => Ok(*f),
        Feedback::Full(_) => Err(Error::Contract {
            required: FeedbackKind::Realistic,
            context: format!("{context} received full feedback"),
        }),
    }
}

fn default_bandit() -> BanditChoice {
    BanditChoice::Ucb1
}

/// A learner and its parameters, as addressed from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    /// Follow the Best Price (full feedback).
    Fbp {
        #[serde(default)]
        initial_price: f64,
    },
    /// Scouting Bandits (realistic feedback).
    Sb {
        /// Density bound `M`; defaults to the instance's marginal bound.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density_bound: Option<f64>,
        /// Precision; defaults to `T^(-1/3)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        #[serde(default = "default_bandit")]
        bandit: BanditChoice,
        #[serde(default)]
        doubling: bool,
    },
    Fixed {
        price: f64,
    },
    Uniform,
}

impl LearnerSpec {
    pub fn label(&self) -> &'static str {
        match self {
            LearnerSpec::Fbp { .. } => "fbp",
            LearnerSpec::Sb { .. } => "sb",
            LearnerSpec::Fixed { .. } => "fixed",
            LearnerSpec::Uniform => "uniform",
        }
    }

    pub fn required_feedback(&self) -> FeedbackKind {
        match self {
            LearnerSpec::Sb { .. } => FeedbackKind::Realistic,
            _ => FeedbackKind::Full,
        }
    }

    /// Density bound an SB learner will use, falling back to `fallback_m`
    /// (typically the instance's marginal bound) and then to 1.
    pub fn resolved_density_bound(&self, fallback_m: Option<f64>) -> Option<f64> {
        match self {
            LearnerSpec::Sb { density_bound, .. } => {
                Some(density_bound.or(fallback_m).unwrap_or(1.0))
            }
            _ => None,
        }
    }

    /// Build a learner over validated prices.
    pub fn build(&self, fallback_m: Option<f64>) -> Result<Box<dyn Learner<Price>>> {
        Ok(match self {
            LearnerSpec::Sb {
                epsilon,
                bandit,
                doubling,
                ..
            } => {
                let m = self.resolved_density_bound(fallback_m).unwrap_or(1.0);
                let (eps, bandit) = (*epsilon, *bandit);
                ScoutingBandits::new(m, eps, bandit)?;
                if *doubling {
                    Box::new(Doubling::new(move || {
                        ScoutingBandits::new(m, eps, bandit).expect("validated above")
                    }))
                } else {
                    Box::new(ScoutingBandits::new(m, eps, bandit)?)
                }
            }
            _ => self.build_generic::<Price>()?,
        })
    }

    /// Build a full-feedback learner over any price representation.
    /// Realistic-feedback learners are rejected with a contract error.
    pub fn build_generic<V: PricePoint>(&self) -> Result<Box<dyn Learner<V>>> {
        Ok(match self {
            LearnerSpec::Fbp { initial_price } => {
                let p = Price::new(*initial_price)?;
                Box::new(FollowBestPrice::with_initial_price(V::from_f64(p.get())))
            }
            LearnerSpec::Fixed { price } => {
                let p = Price::new(*price)?;
                Box::new(FixedPrice::new(V::from_f64(p.get())))
            }
            LearnerSpec::Uniform => Box::new(UniformPrice::<V>::new()),
            LearnerSpec::Sb { .. } => {
                return Err(Error::Contract {
                    required: FeedbackKind::Realistic,
                    context: "this environment only provides full feedback".into(),
                })
            }
        })
    }
}
