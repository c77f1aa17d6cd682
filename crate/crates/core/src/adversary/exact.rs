//! Exact prices for the nested-interval construction.
//!
//! After `t` rounds the construction's interval has width `3 eps / 3^t`,
//! below `f64` resolution after a few dozen rounds. Every endpoint it ever
//! emits has the form
//!
//! ```text
//! base + scale * (a_1 3^-1 + ... + a_{k-1} 3^-(k-1) + last 3^-k)
//! ```
//!
//! with `base = 1/2 - 3 eps / 2`, `scale = 3 eps`, ternary digits
//! `a_j in {0, 2}` decided once per round and shared by all points, and a
//! final digit `last`. Two points of the same ledger compare in `O(1)`;
//! comparisons against ordinary doubles fall back to big rationals only
//! when the two are within `1e-9`.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use parking_lot::RwLock;

use crate::trade::PricePoint;

/// Doubles further apart than this from a ledger point's approximation are
/// ordered without exact arithmetic. The approximation error is ~1e-16.
const EXACT_FALLBACK_GAP: f64 = 1e-9;

#[derive(Debug, Default)]
struct Digits {
    /// `a_0 = 0` (integer position), then one digit per round.
    digits: Vec<u8>,
    /// `nonzero[j]` counts nonzero digits among `a_0..=a_j`.
    nonzero: Vec<u32>,
    /// `prefix[j] = sum_{i <= j} a_i 3^-i` in floating point.
    prefix: Vec<f64>,
}

/// Append-only digit sequence shared by the points of one construction.
#[derive(Debug)]
pub struct CantorLedger {
    base: f64,
    scale: f64,
    inner: RwLock<Digits>,
}

fn pow3_inv(k: usize) -> f64 {
    3f64.powi(-(k.min(i32::MAX as usize) as i32))
}

impl CantorLedger {
    pub fn new(epsilon: f64) -> Arc<Self> {
        Arc::new(CantorLedger {
            base: 0.5 - 1.5 * epsilon,
            scale: 3.0 * epsilon,
            inner: RwLock::new(Digits {
                digits: vec![0],
                nonzero: vec![0],
                prefix: vec![0.0],
            }),
        })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of decided positions, including position 0.
    pub fn len(&self) -> usize {
        self.inner.read().digits.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn digit(&self, j: usize) -> u8 {
        self.inner.read().digits[j]
    }

    /// Decide the next digit (0 or 2).
    pub fn push(&self, digit: u8) {
        assert!(digit == 0 || digit == 2, "ledger digits are 0 or 2");
        let mut d = self.inner.write();
        let j = d.digits.len();
        let nz = d.nonzero[j - 1] + u32::from(digit != 0);
        let pre = d.prefix[j - 1] + f64::from(digit) * pow3_inv(j);
        d.digits.push(digit);
        d.nonzero.push(nz);
        d.prefix.push(pre);
    }

    /// Point with digits `a_0..a_{k-1}` then `last` at position `k`.
    pub fn point(self: &Arc<Self>, k: usize, last: u8) -> CantorPoint {
        assert!(last <= 2, "ternary digit");
        assert!(k <= self.len(), "digits before position {k} are undecided");
        CantorPoint {
            ledger: Arc::clone(self),
            k: k as u32,
            last,
        }
    }

    fn approx(&self, k: usize, last: u8) -> f64 {
        let d = self.inner.read();
        let head = if k == 0 { 0.0 } else { d.prefix[k - 1] };
        self.base + self.scale * (head + f64::from(last) * pow3_inv(k))
    }

    /// `3^k * (sum_{j<k} a_j 3^-j + last 3^-k)`.
    fn numerator(&self, k: usize, last: u8) -> BigInt {
        let d = self.inner.read();
        let three = BigInt::from(3u8);
        let mut n = BigInt::zero();
        for &a in &d.digits[..k] {
            n = n * &three + BigInt::from(a);
        }
        n * three + BigInt::from(last)
    }

    fn compare(&self, (k1, l1): (usize, u8), (k2, l2): (usize, u8)) -> Ordering {
        if k1 == k2 {
            return l1.cmp(&l2);
        }
        if k1 > k2 {
            return self.compare((k2, l2), (k1, l1)).reverse();
        }
        let d = self.inner.read();
        let a = d.digits[k1];
        if l1 != a {
            return l1.cmp(&a);
        }
        // Same digits through position k1; the second point is larger iff
        // anything after it is nonzero.
        let rest = d.nonzero[k2 - 1] - d.nonzero[k1];
        if rest > 0 || l2 > 0 {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }
}

#[derive(Clone)]
pub struct CantorPoint {
    ledger: Arc<CantorLedger>,
    k: u32,
    last: u8,
}

impl CantorPoint {
    pub fn position(&self) -> usize {
        self.k as usize
    }

    pub fn last_digit(&self) -> u8 {
        self.last
    }

    pub fn ledger(&self) -> &Arc<CantorLedger> {
        &self.ledger
    }

    pub fn approx(&self) -> f64 {
        self.ledger.approx(self.k as usize, self.last)
    }

    pub fn exact_value(&self) -> BigRational {
        let l = &self.ledger;
        let k = self.k as usize;
        let x = BigRational::new(l.numerator(k, self.last), BigInt::from(3u8).pow(k as u32));
        rational(l.base) + rational(l.scale) * x
    }
}

impl fmt::Debug for CantorPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.17}[k={},last={}]", self.approx(), self.k, self.last)
    }
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// A price or valuation in the adversarial construction: an ordinary double
/// (learner prices, the extremes 0 and 1) or a ledger point.
#[derive(Clone)]
pub enum ExactPrice {
    Float(f64),
    Cantor(CantorPoint),
}

impl ExactPrice {
    pub fn exact_value(&self) -> BigRational {
        match self {
            ExactPrice::Float(x) => rational(*x),
            ExactPrice::Cantor(c) => c.exact_value(),
        }
    }

    pub fn as_cantor(&self) -> Option<&CantorPoint> {
        match self {
            ExactPrice::Cantor(c) => Some(c),
            ExactPrice::Float(_) => None,
        }
    }
}

impl fmt::Debug for ExactPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactPrice::Float(x) => write!(f, "{x}"),
            ExactPrice::Cantor(c) => c.fmt(f),
        }
    }
}

fn float_vs_cantor(x: f64, c: &CantorPoint) -> Ordering {
    let approx = c.approx();
    if (x - approx).abs() > EXACT_FALLBACK_GAP {
        return x.partial_cmp(&approx).expect("not NaN");
    }
    rational(x).cmp(&c.exact_value())
}

impl PricePoint for ExactPrice {
    fn order(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExactPrice::Float(a), ExactPrice::Float(b)) => a.partial_cmp(b).expect("not NaN"),
            (ExactPrice::Float(a), ExactPrice::Cantor(c)) => float_vs_cantor(*a, c),
            (ExactPrice::Cantor(c), ExactPrice::Float(b)) => float_vs_cantor(*b, c).reverse(),
            (ExactPrice::Cantor(a), ExactPrice::Cantor(b)) => {
                if Arc::ptr_eq(&a.ledger, &b.ledger) {
                    a.ledger
                        .compare((a.k as usize, a.last), (b.k as usize, b.last))
                } else {
                    a.exact_value().cmp(&b.exact_value())
                }
            }
        }
    }

    fn to_f64(&self) -> f64 {
        match self {
            ExactPrice::Float(x) => *x,
            ExactPrice::Cantor(c) => c.approx(),
        }
    }

    fn from_f64(x: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&x), "{x} outside [0, 1]");
        ExactPrice::Float(x + 0.0)
    }
}

/// `3^-k` as an exact rational.
pub fn inv_pow3(k: usize) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(3u8).pow(k as u32))
}
