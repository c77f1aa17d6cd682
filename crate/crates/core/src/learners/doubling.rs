use rand::RngCore;

use super::Learner;
use crate::error::Result;
use crate::trade::{Feedback, FeedbackKind, Price, PricePoint};

/// Restarts a horizon-dependent learner on epochs of length 1, 2, 4, ...,
/// each time telling it the epoch length as its horizon.
pub struct Doubling<L, V: PricePoint = Price> {
    factory: Box<dyn Fn() -> L + Send>,
    inner: L,
    epoch_start: usize,
    epoch_len: usize,
    _marker: std::marker::PhantomData<fn() -> V>,
}

impl<L: Learner<V>, V: PricePoint> Doubling<L, V> {
    pub fn new(factory: impl Fn() -> L + Send + 'static) -> Self {
        let inner = factory();
        Doubling {
            factory: Box::new(factory),
            inner,
            epoch_start: 1,
            epoch_len: 0,
            _marker: std::marker::PhantomData,
        }
    }

    /// Length of the epoch containing the most recent round.
    pub fn epoch_len(&self) -> usize {
        self.epoch_len
    }

    fn local_round(&self, round: usize) -> usize {
        round - self.epoch_start + 1
    }
}

impl<L: Learner<V>, V: PricePoint> Learner<V> for Doubling<L, V> {
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn required_feedback(&self) -> FeedbackKind {
        self.inner.required_feedback()
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }

    fn reset(&mut self, _horizon: Option<usize>) -> Result<()> {
        self.epoch_start = 1;
        self.epoch_len = 1;
        self.inner = (self.factory)();
        self.inner.reset(Some(1))
    }

    fn act(&mut self, round: usize, uniforms: &mut dyn RngCore) -> V {
        if self.epoch_len == 0 {
            // reset() was skipped; start the first epoch now
            self.epoch_len = 1;
            self.epoch_start = round;
            self.inner = (self.factory)();
            self.inner.reset(Some(1)).expect("fresh learner accepts a horizon");
        }
        if self.local_round(round) > self.epoch_len {
            self.epoch_start += self.epoch_len;
            self.epoch_len *= 2;
            self.inner = (self.factory)();
            self.inner
                .reset(Some(self.epoch_len))
                .expect("fresh learner accepts a horizon");
        }
        let local = self.local_round(round);
        self.inner.act(local, uniforms)
    }

    fn observe(&mut self, round: usize, posted: &V, feedback: &Feedback<V>) -> Result<()> {
        let local = self.local_round(round);
        self.inner.observe(local, posted, feedback)
    }
}
