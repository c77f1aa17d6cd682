//! Prices, valuations, gain from trade, and the two feedback models.
//!
//! A round of bilateral trade posts a single price `p` to a seller with
//! private valuation `s` and a buyer with private valuation `b`. Trade
//! happens iff `s <= p <= b` (both inequalities inclusive) and produces a
//! surplus of `b - s`.
//!
//! Every learner and trade primitive is generic over [`PricePoint`], the
//! ordered scalar that prices and valuations live in. The stochastic
//! settings use [`Price`], a validated `f64`. The adversarial construction
//! needs nested intervals narrower than any `f64` spacing and uses an exact
//! ternary representation instead (see [`crate::adversary::ExactPrice`]).

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An exactly ordered point of `[0, 1]`.
///
/// Comparisons must be exact: trade indicators are sharp and ties at
/// `p == s` or `p == b` count as trades. Arithmetic on surpluses goes through
/// [`PricePoint::to_f64`].
pub trait PricePoint: Clone + fmt::Debug + Send + Sync + 'static {
    /// Total order on points. Implementations never return a partial result.
    fn order(&self, other: &Self) -> Ordering;

    /// Nearest double (exact for `Price`).
    fn to_f64(&self) -> f64;

    /// Embed a double in `[0, 1]`.
    fn from_f64(x: f64) -> Self;

    fn le(&self, other: &Self) -> bool {
        self.order(other) != Ordering::Greater
    }
}

/// A posted price, or a valuation, in `[0, 1]`.
#[derive(Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Price(pub(crate) f64);

impl Price {
    pub const ZERO: Price = Price(0.0);
    pub const ONE: Price = Price(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            // normalise -0.0 so bitwise outputs are stable
            Ok(Price(value + 0.0))
        } else {
            Err(Error::param("price", format!("{value} is not in [0, 1]")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Debug for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl TryFrom<f64> for Price {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Price::new(value)
    }
}

impl From<Price> for f64 {
    fn from(p: Price) -> f64 {
        p.0
    }
}

impl PricePoint for Price {
    #[inline]
    fn order(&self, other: &Self) -> Ordering {
        // Never NaN: constructors reject anything outside [0, 1].
        self.0.partial_cmp(&other.0).expect("price is never NaN")
    }

    #[inline]
    fn to_f64(&self) -> f64 {
        self.0
    }

    #[inline]
    fn from_f64(x: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&x), "{x} outside [0, 1]");
        Price(x + 0.0)
    }
}

/// One round's private valuations. No ordering between `s` and `b` is
/// implied; rounds with `b < s` simply never trade.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuationPair<V = Price> {
    pub s: V,
    pub b: V,
}

impl ValuationPair<Price> {
    pub fn new(s: f64, b: f64) -> Result<Self> {
        Ok(ValuationPair {
            s: Price::new(s)?,
            b: Price::new(b)?,
        })
    }
}

impl<V: PricePoint> ValuationPair<V> {
    /// `b - s` regardless of whether any price trades.
    pub fn spread(&self) -> f64 {
        self.b.to_f64() - self.s.to_f64()
    }
}

/// The two accept/reject bits revealed under realistic feedback.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RealisticFeedback {
    /// `s <= p`
    pub seller_accepts: bool,
    /// `p <= b`
    pub buyer_accepts: bool,
}

impl RealisticFeedback {
    pub fn trade(&self) -> bool {
        self.seller_accepts && self.buyer_accepts
    }

    /// Index into a feedback-law 4-vector: `2 * seller + buyer`.
    pub fn outcome_index(&self) -> usize {
        2 * usize::from(self.seller_accepts) + usize::from(self.buyer_accepts)
    }
}

/// Full feedback reveals the whole valuation pair.
#[derive(Clone, Debug, PartialEq)]
pub struct FullFeedback<V = Price> {
    pub valuations: ValuationPair<V>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    Full,
    Realistic,
}

/// What the learner sees at the end of a round.
#[derive(Clone, Debug, PartialEq)]
pub enum Feedback<V = Price> {
    Full(FullFeedback<V>),
    Realistic(RealisticFeedback),
}

impl<V> Feedback<V> {
    pub fn kind(&self) -> FeedbackKind {
        match self {
            Feedback::Full(_) => FeedbackKind::Full,
            Feedback::Realistic(_) => FeedbackKind::Realistic,
        }
    }
}

/// `(b - s) * 1{s <= p <= b}`.
#[inline]
pub fn gain_from_trade<V: PricePoint>(p: &V, v: &ValuationPair<V>) -> f64 {
    if v.s.le(p) && p.le(&v.b) {
        v.spread()
    } else {
        0.0
    }
}

/// `(1{s <= p}, 1{p <= b})`.
#[inline]
pub fn realistic_feedback<V: PricePoint>(p: &V, v: &ValuationPair<V>) -> RealisticFeedback {
    RealisticFeedback {
        seller_accepts: v.s.le(p),
        buyer_accepts: p.le(&v.b),
    }
}

/// Build the feedback of the requested kind for a round.
pub fn feedback_for<V: PricePoint>(kind: FeedbackKind, p: &V, v: &ValuationPair<V>) -> Feedback<V> {
    match kind {
        FeedbackKind::Full => Feedback::Full(FullFeedback {
            valuations: v.clone(),
        }),
        FeedbackKind::Realistic => Feedback::Realistic(realistic_feedback(p, v)),
    }
}

/// Fixed-point accumulator for sums of surpluses.
///
/// Each surplus is rounded once to a multiple of 2^-80 and summed as an
/// integer, so cumulative objectives are independent of summation order and
/// equal sums compare equal. Hindsight argmaxes and FBP tie-breaking rely on
/// this.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SurplusSum(pub(crate) i128);

const SURPLUS_SCALE: f64 = (1u128 << 80) as f64;

impl SurplusSum {
    pub const ZERO: SurplusSum = SurplusSum(0);

    #[inline]
    pub fn of(surplus: f64) -> Self {
        SurplusSum((surplus * SURPLUS_SCALE).round() as i128)
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SURPLUS_SCALE
    }
}

impl std::ops::Add for SurplusSum {
    type Output = SurplusSum;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        SurplusSum(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for SurplusSum {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl std::ops::Sub for SurplusSum {
    type Output = SurplusSum;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        SurplusSum(self.0 - rhs.0)
    }
}

impl std::ops::SubAssign for SurplusSum {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.0 -= rhs.0;
    }
}

impl std::iter::Sum for SurplusSum {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(SurplusSum::ZERO, |a, b| a + b)
    }
}
