use std::marker::PhantomData;

use rand::{Rng, RngCore};

use super::Learner;
use crate::error::Result;
use crate::trade::{Feedback, FeedbackKind, Price, PricePoint};

/// Always posts the same price.
#[derive(Clone, Debug)]
pub struct FixedPrice<V: PricePoint = Price> {
    price: V,
}

impl<V: PricePoint> FixedPrice<V> {
    pub fn new(price: V) -> Self {
        FixedPrice { price }
    }
}

impl<V: PricePoint> Learner<V> for FixedPrice<V> {
    fn name(&self) -> &'static str {
        "fixed"
    }

    // Any feedback works; declaring full lets it face every environment.
    fn required_feedback(&self) -> FeedbackKind {
        FeedbackKind::Full
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn reset(&mut self, _horizon: Option<usize>) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, _round: usize, _uniforms: &mut dyn RngCore) -> V {
        self.price.clone()
    }

    fn observe(&mut self, _round: usize, _posted: &V, _feedback: &Feedback<V>) -> Result<()> {
        Ok(())
    }
}

/// Posts a fresh uniform draw every round.
#[derive(Clone, Debug)]
pub struct UniformPrice<V: PricePoint = Price> {
    _marker: PhantomData<fn() -> V>,
}

impl<V: PricePoint> Default for UniformPrice<V> {
    fn default() -> Self {
        UniformPrice {
            _marker: PhantomData,
        }
    }
}

impl<V: PricePoint> UniformPrice<V> {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<V: PricePoint> Learner<V> for UniformPrice<V> {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn required_feedback(&self) -> FeedbackKind {
        FeedbackKind::Full
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn reset(&mut self, _horizon: Option<usize>) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, _round: usize, uniforms: &mut dyn RngCore) -> V {
        V::from_f64(uniforms.random::<f64>())
    }

    fn observe(&mut self, _round: usize, _posted: &V, _feedback: &Feedback<V>) -> Result<()> {
        Ok(())
    }
}
