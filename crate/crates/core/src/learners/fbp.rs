use rand::RngCore;

use super::objective::HindsightObjective;
use super::{expect_full, Learner};
use crate::error::Result;
use crate::trade::{Feedback, FeedbackKind, Price, PricePoint};

/// Follow the Best Price: post the observed valuation that would have
/// collected the most gain from trade so far, smallest one on ties.
///
/// The hindsight objective is piecewise constant with breakpoints at past
/// valuations, so the candidate set loses nothing against the whole of
/// `[0, 1]`.
#[derive(Clone, Debug)]
pub struct FollowBestPrice<V: PricePoint = Price> {
    initial_price: V,
    objective: HindsightObjective<V>,
}

impl<V: PricePoint> Default for FollowBestPrice<V> {
    fn default() -> Self {
        Self::with_initial_price(V::from_f64(0.0))
    }
}

impl<V: PricePoint> FollowBestPrice<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_initial_price(initial_price: V) -> Self {
        FollowBestPrice {
            initial_price,
            objective: HindsightObjective::new(),
        }
    }

    /// Next price from the current state.
    pub fn best_price(&self) -> V {
        self.objective
            .argmax()
            .map_or_else(|| self.initial_price.clone(), |(k, _)| k.clone())
    }

    /// Rounds observed.
    pub fn observed_rounds(&self) -> usize {
        self.objective.rounds()
    }

    pub fn objective(&self) -> &HindsightObjective<V> {
        &self.objective
    }
}

impl<V: PricePoint> Learner<V> for FollowBestPrice<V> {
    fn name(&self) -> &'static str {
        "fbp"
    }

    fn required_feedback(&self) -> FeedbackKind {
        FeedbackKind::Full
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn reset(&mut self, _horizon: Option<usize>) -> Result<()> {
        self.objective.clear();
        Ok(())
    }

    fn act(&mut self, _round: usize, _uniforms: &mut dyn RngCore) -> V {
        self.best_price()
    }

    fn observe(&mut self, _round: usize, _posted: &V, feedback: &Feedback<V>) -> Result<()> {
        let pair = expect_full(feedback, "fbp")?;
        self.objective.add(pair);
        Ok(())
    }
}
