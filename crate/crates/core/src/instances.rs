//! Named valuation laws: the hard instances behind each regret regime.
//!
//! Breakpoints are built as exact rationals (`k / 48`, `k / 8`, ...) and
//! rounded once, so repeated constructions are bit-identical.

use serde::{Deserialize, Serialize};

use crate::dist::{product_distribution, Atom, MixtureDistribution, PiecewiseConstant1D, UniformRectangle};
use crate::error::{Error, Result};

/// Bump width of the two-thirds instance.
pub const TWO_THIRD_THETA: f64 = 1.0 / 48.0;

/// A named instance with its parameters, as addressed from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Uniform,
    SqrtLower {
        epsilon: f64,
    },
    TwoThird {
        epsilon: f64,
    },
    BdLinear {
        lambda: f64,
    },
    Needle {
        x: f64,
    },
    Custom {
        #[serde(default)]
        rectangles: Vec<UniformRectangle>,
        #[serde(default)]
        atoms: Vec<Atom>,
    },
}

impl InstanceSpec {
    pub fn build(&self) -> Result<MixtureDistribution> {
        match self {
            InstanceSpec::Uniform => Ok(MixtureDistribution::uniform()),
            InstanceSpec::SqrtLower { epsilon } => sqrt_lower_instance(*epsilon),
            InstanceSpec::TwoThird { epsilon } => two_third_instance(*epsilon),
            InstanceSpec::BdLinear { lambda } => bd_linear_instance(*lambda),
            InstanceSpec::Needle { x } => needle_instance(*x),
            InstanceSpec::Custom { rectangles, atoms } => {
                MixtureDistribution::new(rectangles.clone(), atoms.clone())
            }
        }
    }

    /// Short human-readable label, e.g. `two_third(0.3)`.
    pub fn label(&self) -> String {
        match self {
            InstanceSpec::Uniform => "uniform".into(),
            InstanceSpec::SqrtLower { epsilon } => format!("sqrt_lower({epsilon})"),
            InstanceSpec::TwoThird { epsilon } => format!("two_third({epsilon})"),
            InstanceSpec::BdLinear { lambda } => format!("bd_linear({lambda})"),
            InstanceSpec::Needle { x } => format!("needle({x})"),
            InstanceSpec::Custom { rectangles, atoms } => {
                format!("custom({} rectangles, {} atoms)", rectangles.len(), atoms.len())
            }
        }
    }
}

fn check_signed_epsilon(epsilon: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::param("epsilon", format!("{epsilon} is not in [-1, 1]")))
    }
}

/// Seller marginal `2(1+e) on [0,1/4] + 2(1-e) on [1/2,3/4]`.
pub fn sqrt_lower_seller(epsilon: f64) -> Result<PiecewiseConstant1D> {
    check_signed_epsilon(epsilon)?;
    PiecewiseConstant1D::new(
        vec![0.0, 0.25, 0.5, 0.75, 1.0],
        vec![2.0 * (1.0 + epsilon), 0.0, 2.0 * (1.0 - epsilon), 0.0],
    )
}

/// Buyer marginal `2 on [1/4,1/2] u [3/4,1]`.
pub fn sqrt_lower_buyer() -> PiecewiseConstant1D {
    PiecewiseConstant1D::new(vec![0.0, 0.25, 0.5, 0.75, 1.0], vec![0.0, 2.0, 0.0, 2.0])
        .expect("static density")
}

/// The full-feedback lower-bound instance: the sign of `epsilon` decides
/// whether the optimal price sits in `[0, 1/2]` or `(1/2, 1]`.
pub fn sqrt_lower_instance(epsilon: f64) -> Result<MixtureDistribution> {
    product_distribution(&sqrt_lower_seller(epsilon)?, &sqrt_lower_buyer())
}

fn forty_eighths(ks: &[u32]) -> Vec<f64> {
    ks.iter().map(|&k| f64::from(k) / 48.0).collect()
}

/// Seller marginal of the two-thirds instance: bumps of width 1/48 at
/// 0, 1/6, 1/4, 2/3 with masses (1+e)/4, (1-e)/4, 1/4, 1/4.
pub fn two_third_seller(epsilon: f64) -> Result<PiecewiseConstant1D> {
    check_signed_epsilon(epsilon)?;
    let h = 1.0 / (4.0 * TWO_THIRD_THETA);
    PiecewiseConstant1D::new(
        forty_eighths(&[0, 1, 8, 9, 12, 13, 32, 33, 48]),
        vec![
            (1.0 + epsilon) * h,
            0.0,
            (1.0 - epsilon) * h,
            0.0,
            h,
            0.0,
            h,
            0.0,
        ],
    )
}

/// Buyer marginal: bumps of width 1/48 ending at 1/3, 3/4, 5/6, 1, mass 1/4
/// each.
pub fn two_third_buyer() -> PiecewiseConstant1D {
    let h = 1.0 / (4.0 * TWO_THIRD_THETA);
    PiecewiseConstant1D::new(
        forty_eighths(&[0, 15, 16, 35, 36, 39, 40, 47, 48]),
        vec![0.0, h, 0.0, h, 0.0, h, 0.0, h],
    )
    .expect("static density")
}

/// The realistic-feedback `T^{2/3}` lower-bound instance (16 cells).
pub fn two_third_instance(epsilon: f64) -> Result<MixtureDistribution> {
    product_distribution(&two_third_seller(epsilon)?, &two_third_buyer())
}

/// Squares carrying the density `f`; `g(s, b) = f(1 - b, 1 - s)`.
const F_SQUARES: [(u32, u32); 3] = [(0, 3), (2, 7), (4, 5)];

fn eighth_square(s: u32, b: u32, weight: f64) -> UniformRectangle {
    let e = |k: u32| f64::from(k) / 8.0;
    UniformRectangle::new(e(s), e(s + 1), e(b), e(b + 1), weight).expect("static square")
}

/// `(1 - lambda) f + lambda g` where `f` and `g` induce the same feedback law
/// at every price but have different optimal prices (3/8 vs 5/8).
pub fn bd_linear_instance(lambda: f64) -> Result<MixtureDistribution> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param("lambda", format!("{lambda} is not in [0, 1]")));
    }
    let mut rects = Vec::with_capacity(6);
    for &(s, b) in &F_SQUARES {
        rects.push(eighth_square(s, b, (1.0 - lambda) / 3.0));
    }
    for &(s, b) in &F_SQUARES {
        // (s, b) -> (1 - b, 1 - s) maps cell [s/8, (s+1)/8] x [b/8, (b+1)/8]
        // onto cell (7 - b, 7 - s).
        rects.push(eighth_square(7 - b, 7 - s, lambda / 3.0));
    }
    MixtureDistribution::new(rects, Vec::new())
}

/// The `lambda = 0` law of [`bd_linear_instance`] with square `index` moved
/// by `shift` along the seller axis. A control for the feedback-law
/// comparison: any such move makes the two laws distinguishable.
pub fn bd_linear_shifted(index: usize, shift: f64) -> Result<MixtureDistribution> {
    if index >= F_SQUARES.len() {
        return Err(Error::param("index", format!("{index} >= {}", F_SQUARES.len())));
    }
    let rects = F_SQUARES
        .iter()
        .enumerate()
        .map(|(i, &(s, b))| {
            let sq = eighth_square(s, b, 1.0 / 3.0);
            if i == index {
                UniformRectangle::new(sq.s_lo + shift, sq.s_hi + shift, sq.b_lo, sq.b_hi, sq.weight)
            } else {
                Ok(sq)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    MixtureDistribution::new(rects, Vec::new())
}

/// `S = x or 0`, `B = x or 1`, each with probability 1/2, independent.
/// Only the exact price `x` reaches expected gain 1/2.
pub fn needle_instance(x: f64) -> Result<MixtureDistribution> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::param("x", format!("{x} is not in (0, 1)")));
    }
    let atoms = [(0.0, x), (0.0, 1.0), (x, x), (x, 1.0)]
        .iter()
        .map(|&(s, b)| Atom::new(s, b, 0.25))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixtureDistribution::new(Vec::new(), atoms)?.mark_independent())
}
