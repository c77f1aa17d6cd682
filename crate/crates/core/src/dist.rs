//! Joint valuation laws as mixtures of uniform rectangles and point atoms.
//!
//! Within a rectangle the seller and buyer coordinates are independent
//! uniforms, so every per-component quantity (CDFs, partial expectations,
//! expected gain from trade) has a closed form. Summing components gives
//! exact oracles for any mixture without quadrature; on each interval
//! between consecutive breakpoints the expected gain from trade is a
//! quadratic in the price.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trade::{Price, ValuationPair};

const WEIGHT_TOL: f64 = 1e-12;

/// Values within this distance of the maximum count as ties in
/// [`MixtureDistribution::best_fixed_price`].
pub const ARGMAX_TIE_TOL: f64 = 1e-12;

/// Uniform law on `[s_lo, s_hi] x [b_lo, b_hi]` carrying `weight` of the
/// total mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformRectangle {
    pub s_lo: f64,
    pub s_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
    pub weight: f64,
}

impl UniformRectangle {
    pub fn new(s_lo: f64, s_hi: f64, b_lo: f64, b_hi: f64, weight: f64) -> Result<Self> {
        let r = UniformRectangle {
            s_lo,
            s_hi,
            b_lo,
            b_hi,
            weight,
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if ![self.s_lo, self.s_hi, self.b_lo, self.b_hi]
            .iter()
            .all(|&x| in_unit(x))
        {
            return Err(Error::invalid("rectangle", format!("{self:?} leaves [0,1]^2")));
        }
        if !(self.s_lo < self.s_hi && self.b_lo < self.b_hi) {
            return Err(Error::invalid(
                "rectangle",
                format!("{self:?} is degenerate (segments are not supported)"),
            ));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::invalid("rectangle", format!("weight {}", self.weight)));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.s_hi - self.s_lo) * (self.b_hi - self.b_lo)
    }

    pub fn density(&self) -> f64 {
        self.weight / self.area()
    }

    fn law(&self) -> BoxLaw {
        BoxLaw {
            s: Marginal::Uniform(self.s_lo, self.s_hi),
            b: Marginal::Uniform(self.b_lo, self.b_hi),
        }
    }
}

/// A point mass at a valuation pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "AtomLiteral", into = "AtomLiteral")]
pub struct Atom {
    pub point: ValuationPair,
    pub weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomLiteral {
    s: f64,
    b: f64,
    weight: f64,
}

impl From<AtomLiteral> for Atom {
    fn from(a: AtomLiteral) -> Self {
        // Range checks happen in MixtureDistribution::new.
        Atom {
            point: ValuationPair {
                s: Price(a.s),
                b: Price(a.b),
            },
            weight: a.weight,
        }
    }
}

impl From<Atom> for AtomLiteral {
    fn from(a: Atom) -> Self {
        AtomLiteral {
            s: a.point.s.get(),
            b: a.point.b.get(),
            weight: a.weight,
        }
    }
}

impl Atom {
    pub fn new(s: f64, b: f64, weight: f64) -> Result<Self> {
        Ok(Atom {
            point: ValuationPair::new(s, b)?,
            weight,
        })
    }

    fn law(&self) -> BoxLaw {
        BoxLaw {
            s: Marginal::Point(self.point.s.get()),
            b: Marginal::Point(self.point.b.get()),
        }
    }
}

/// One coordinate of a mixture component.
#[derive(Clone, Copy, Debug)]
enum Marginal {
    Uniform(f64, f64),
    Point(f64),
}

impl Marginal {
    /// `P[X <= x]`
    fn cdf(self, x: f64) -> f64 {
        match self {
            Marginal::Uniform(lo, hi) => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::Point(v) => f64::from(u8::from(v <= x)),
        }
    }

    /// `P[X >= x]`
    fn survival(self, x: f64) -> f64 {
        match self {
            Marginal::Uniform(lo, hi) => ((hi - x) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::Point(v) => f64::from(u8::from(v >= x)),
        }
    }

    /// `E[X 1{X <= x}]`
    fn lower_partial_mean(self, x: f64) -> f64 {
        match self {
            Marginal::Uniform(lo, hi) => {
                if x <= lo {
                    0.0
                } else {
                    let top = x.min(hi);
                    (top - lo) * (top + lo) / (2.0 * (hi - lo))
                }
            }
            Marginal::Point(v) => {
                if v <= x {
                    v
                } else {
                    0.0
                }
            }
        }
    }

    /// `E[X 1{X >= x}]`
    fn upper_partial_mean(self, x: f64) -> f64 {
        match self {
            Marginal::Uniform(lo, hi) => {
                if x >= hi {
                    0.0
                } else {
                    let bottom = x.max(lo);
                    (hi - bottom) * (hi + bottom) / (2.0 * (hi - lo))
                }
            }
            Marginal::Point(v) => {
                if v >= x {
                    v
                } else {
                    0.0
                }
            }
        }
    }

    /// `int_0^x P[X <= t] dt`
    fn integrated_cdf(self, x: f64) -> f64 {
        match self {
            Marginal::Uniform(lo, hi) => {
                if x <= lo {
                    0.0
                } else if x < hi {
                    (x - lo) * (x - lo) / (2.0 * (hi - lo))
                } else {
                    (hi - lo) / 2.0 + (x - hi)
                }
            }
            Marginal::Point(v) => (x - v).max(0.0),
        }
    }

    /// `int_x^1 P[X >= t] dt`
    fn integrated_survival(self, x: f64) -> f64 {
        match self {
            Marginal::Uniform(lo, hi) => {
                if x >= hi {
                    0.0
                } else if x > lo {
                    (hi - x) * (hi - x) / (2.0 * (hi - lo))
                } else {
                    (lo - x) + (hi - lo) / 2.0
                }
            }
            Marginal::Point(v) => (v - x).max(0.0),
        }
    }

    /// Density (uniform) or nothing (point mass).
    fn density_at(self, x: f64) -> f64 {
        match self {
            Marginal::Uniform(lo, hi) if lo < x && x < hi => 1.0 / (hi - lo),
            _ => 0.0,
        }
    }

    fn draw(self, u: f64) -> f64 {
        match self {
            Marginal::Uniform(lo, hi) => (lo + u * (hi - lo)).clamp(lo, hi),
            Marginal::Point(v) => v,
        }
    }

    /// Polynomials in `p` for `(P[X <= p], E[X 1{X <= p}])` on an open
    /// interval around `mid` containing none of this marginal's breakpoints.
    fn lower_polys(self, mid: f64) -> (Poly, Poly) {
        match self {
            Marginal::Uniform(lo, hi) => {
                let w = hi - lo;
                if mid <= lo {
                    (Poly::ZERO, Poly::ZERO)
                } else if mid >= hi {
                    (Poly::constant(1.0), Poly::constant((lo + hi) / 2.0))
                } else {
                    (
                        Poly([-lo / w, 1.0 / w, 0.0, 0.0]),
                        Poly([-lo * lo / (2.0 * w), 0.0, 1.0 / (2.0 * w), 0.0]),
                    )
                }
            }
            Marginal::Point(v) => {
                if v < mid {
                    (Poly::constant(1.0), Poly::constant(v))
                } else {
                    (Poly::ZERO, Poly::ZERO)
                }
            }
        }
    }

    /// Polynomials for `(P[X >= p], E[X 1{X >= p}])`, as in `lower_polys`.
    fn upper_polys(self, mid: f64) -> (Poly, Poly) {
        match self {
            Marginal::Uniform(lo, hi) => {
                let w = hi - lo;
                if mid >= hi {
                    (Poly::ZERO, Poly::ZERO)
                } else if mid <= lo {
                    (Poly::constant(1.0), Poly::constant((lo + hi) / 2.0))
                } else {
                    (
                        Poly([hi / w, -1.0 / w, 0.0, 0.0]),
                        Poly([hi * hi / (2.0 * w), 0.0, -1.0 / (2.0 * w), 0.0]),
                    )
                }
            }
            Marginal::Point(v) => {
                if v > mid {
                    (Poly::constant(1.0), Poly::constant(v))
                } else {
                    (Poly::ZERO, Poly::ZERO)
                }
            }
        }
    }
}

/// A product law on a box (rectangle or atom).
#[derive(Clone, Copy, Debug)]
struct BoxLaw {
    s: Marginal,
    b: Marginal,
}

impl BoxLaw {
    /// `E[(B - S) 1{S <= p <= B}] = P[S<=p] E[B 1{B>=p}] - P[B>=p] E[S 1{S<=p}]`
    fn expected_gft(&self, p: f64) -> f64 {
        let v = self.s.cdf(p) * self.b.upper_partial_mean(p)
            - self.b.survival(p) * self.s.lower_partial_mean(p);
        v.max(0.0)
    }

    fn piece_poly(&self, mid: f64) -> Poly {
        let (q_s, m_s) = self.s.lower_polys(mid);
        let (q_b, m_b) = self.b.upper_polys(mid);
        q_s.mul(&m_b).sub(&q_b.mul(&m_s))
    }
}

/// Cubic polynomial, low-order coefficients first.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Poly([f64; 4]);

impl Poly {
    const ZERO: Poly = Poly([0.0; 4]);

    fn constant(c: f64) -> Poly {
        Poly([c, 0.0, 0.0, 0.0])
    }

    /// Product, truncated to degree 3 (inputs here have degree <= 2 and
    /// degree-1 times degree-2 at most).
    fn mul(&self, o: &Poly) -> Poly {
        let mut out = [0.0; 4];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                if i + j < 4 {
                    out[i + j] += a * b;
                }
            }
        }
        Poly(out)
    }

    fn sub(&self, o: &Poly) -> Poly {
        Poly(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }

    fn add_scaled(&mut self, o: &Poly, w: f64) {
        for (a, b) in self.0.iter_mut().zip(o.0) {
            *a += w * b;
        }
    }
}

/// A piecewise-constant density on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseConstant1D {
    breakpoints: Vec<f64>,
    heights: Vec<f64>,
}

impl PiecewiseConstant1D {
    /// `breakpoints` must run strictly increasing from 0 to 1; `heights[i]`
    /// is the density on `[breakpoints[i], breakpoints[i + 1]]`.
    pub fn new(breakpoints: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || heights.len() + 1 != breakpoints.len() {
            return Err(Error::invalid(
                "density",
                format!(
                    "{} breakpoints for {} heights",
                    breakpoints.len(),
                    heights.len()
                ),
            ));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::invalid("density", "breakpoints must start at 0 and end at 1"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("density", "breakpoints must be strictly increasing"));
        }
        if heights.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::invalid("density", "heights must be finite and non-negative"));
        }
        let d = PiecewiseConstant1D {
            breakpoints,
            heights,
        };
        let total: f64 = (0..d.heights.len()).map(|i| d.mass(i)).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid("density", format!("integrates to {total}, not 1")));
        }
        Ok(d)
    }

    pub fn uniform() -> Self {
        PiecewiseConstant1D {
            breakpoints: vec![0.0, 1.0],
            heights: vec![1.0],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn pieces(&self) -> usize {
        self.heights.len()
    }

    /// Mass of piece `i`.
    pub fn mass(&self, i: usize) -> f64 {
        self.heights[i] * (self.breakpoints[i + 1] - self.breakpoints[i])
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().copied().fold(0.0, f64::max)
    }

    /// `P[X <= x]`
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.pieces() {
            let (lo, hi) = (self.breakpoints[i], self.breakpoints[i + 1]);
            if x >= hi {
                acc += self.mass(i);
            } else {
                if x > lo {
                    acc += self.heights[i] * (x - lo);
                }
                break;
            }
        }
        acc.min(1.0)
    }

    /// `int_0^x P[X <= t] dt`, summing the piecewise-quadratic antiderivative.
    pub fn integrated_cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        let mut cdf_lo = 0.0;
        for i in 0..self.pieces() {
            let (lo, hi) = (self.breakpoints[i], self.breakpoints[i + 1]);
            if x <= lo {
                break;
            }
            let top = x.min(hi);
            let dx = top - lo;
            acc += cdf_lo * dx + 0.5 * self.heights[i] * dx * dx;
            cdf_lo += self.mass(i);
        }
        acc
    }

    /// `int_x^1 P[X >= t] dt`. Continuous laws give `P[X >= t] = 1 - F(t)`.
    pub fn integrated_survival(&self, x: f64) -> f64 {
        let total_cdf = self.integrated_cdf(1.0);
        ((1.0 - x) - (total_cdf - self.integrated_cdf(x))).max(0.0)
    }
}

/// A joint law on `[0, 1]^2`: weighted uniform rectangles plus atoms.
#[derive(Clone, Debug)]
pub struct MixtureDistribution {
    rectangles: Vec<UniformRectangle>,
    atoms: Vec<Atom>,
    density_bound: Option<f64>,
    independent: bool,
    /// Cumulative weights over rectangles then atoms.
    cumulative: Vec<f64>,
    /// Sorted distinct prices where the expected-GFT curve changes formula.
    breakpoints: Vec<f64>,
}

impl MixtureDistribution {
    /// Validate and build. Zero-weight components are dropped.
    pub fn new(rectangles: Vec<UniformRectangle>, atoms: Vec<Atom>) -> Result<Self> {
        for r in &rectangles {
            r.validate()?;
        }
        for a in &atoms {
            let (s, b) = (a.point.s.get(), a.point.b.get());
            if !((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&b)) {
                return Err(Error::invalid("atom", format!("({s}, {b}) outside [0,1]^2")));
            }
            if !(a.weight >= 0.0 && a.weight.is_finite()) {
                return Err(Error::invalid("atom", format!("weight {}", a.weight)));
            }
        }
        let rectangles: Vec<_> = rectangles.into_iter().filter(|r| r.weight > 0.0).collect();
        let atoms: Vec<_> = atoms.into_iter().filter(|a| a.weight > 0.0).collect();
        let total: f64 = rectangles.iter().map(|r| r.weight).sum::<f64>()
            + atoms.iter().map(|a| a.weight).sum::<f64>();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid("mixture", format!("total weight {total}, not 1")));
        }

        let mut cumulative = Vec::with_capacity(rectangles.len() + atoms.len());
        let mut acc = 0.0;
        for w in rectangles
            .iter()
            .map(|r| r.weight)
            .chain(atoms.iter().map(|a| a.weight))
        {
            acc += w;
            cumulative.push(acc);
        }

        let mut breakpoints = vec![0.0, 1.0];
        for r in &rectangles {
            breakpoints.extend([r.s_lo, r.s_hi, r.b_lo, r.b_hi]);
        }
        for a in &atoms {
            breakpoints.extend([a.point.s.get(), a.point.b.get()]);
        }
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();

        let mut dist = MixtureDistribution {
            rectangles,
            atoms,
            density_bound: None,
            independent: false,
            cumulative,
            breakpoints,
        };
        if dist.atoms.is_empty() {
            dist.density_bound = Some(dist.max_joint_density());
        }
        Ok(dist)
    }

    /// Single rectangle `[0,1]^2`.
    pub fn uniform() -> Self {
        product_distribution(&PiecewiseConstant1D::uniform(), &PiecewiseConstant1D::uniform())
            .expect("uniform marginals are valid")
    }

    pub(crate) fn mark_independent(mut self) -> Self {
        self.independent = true;
        self
    }

    pub fn rectangles(&self) -> &[UniformRectangle] {
        &self.rectangles
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Bound `M` on the joint density; `None` when the law has atoms.
    pub fn density_bound(&self) -> Option<f64> {
        self.density_bound
    }

    /// True iff the seller and buyer valuations were constructed independent.
    pub fn is_independent(&self) -> bool {
        self.independent
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    fn components(&self) -> impl Iterator<Item = (f64, BoxLaw)> + '_ {
        self.rectangles
            .iter()
            .map(|r| (r.weight, r.law()))
            .chain(self.atoms.iter().map(|a| (a.weight, a.law())))
    }

    fn max_joint_density(&self) -> f64 {
        let mut s_cuts: Vec<f64> = self.rectangles.iter().flat_map(|r| [r.s_lo, r.s_hi]).collect();
        let mut b_cuts: Vec<f64> = self.rectangles.iter().flat_map(|r| [r.b_lo, r.b_hi]).collect();
        for cuts in [&mut s_cuts, &mut b_cuts] {
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
        }
        let mut best: f64 = 0.0;
        for sw in s_cuts.windows(2) {
            let sm = 0.5 * (sw[0] + sw[1]);
            for bw in b_cuts.windows(2) {
                let bm = 0.5 * (bw[0] + bw[1]);
                let d: f64 = self
                    .rectangles
                    .iter()
                    .filter(|r| r.s_lo < sm && sm < r.s_hi && r.b_lo < bm && bm < r.b_hi)
                    .map(|r| r.density())
                    .sum();
                best = best.max(d);
            }
        }
        best
    }

    /// Largest density of the seller or buyer marginal; `None` with atoms.
    ///
    /// This is the `M` that the realistic-feedback learner needs: the
    /// expected gain from trade is `4M`-Lipschitz for independent laws whose
    /// marginals have densities bounded by `M`.
    pub fn marginal_density_bound(&self) -> Option<f64> {
        if !self.atoms.is_empty() {
            return None;
        }
        let marginal_max = |sel: fn(&UniformRectangle) -> (f64, f64)| {
            let mut cuts: Vec<f64> = self
                .rectangles
                .iter()
                .flat_map(|r| {
                    let (lo, hi) = sel(r);
                    [lo, hi]
                })
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            cuts.windows(2)
                .map(|w| {
                    let m = 0.5 * (w[0] + w[1]);
                    self.rectangles
                        .iter()
                        .map(|r| {
                            let (lo, hi) = sel(r);
                            r.weight * Marginal::Uniform(lo, hi).density_at(m)
                        })
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        };
        let s = marginal_max(|r| (r.s_lo, r.s_hi));
        let b = marginal_max(|r| (r.b_lo, r.b_hi));
        Some(s.max(b).max(1.0))
    }

    /// Map three uniforms to a valuation pair: `u1` picks the component by
    /// cumulative weight, `(u2, u3)` place the point inside a rectangle.
    pub fn sample(&self, u1: f64, u2: f64, u3: f64) -> ValuationPair {
        let last = self.cumulative.len() - 1;
        let idx = self.cumulative.partition_point(|&c| c <= u1).min(last);
        let law = if idx < self.rectangles.len() {
            self.rectangles[idx].law()
        } else {
            self.atoms[idx - self.rectangles.len()].law()
        };
        ValuationPair {
            s: Price(law.s.draw(u2)),
            b: Price(law.b.draw(u3)),
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> ValuationPair {
        let (u1, u2, u3) = (rng.random(), rng.random(), rng.random());
        self.sample(u1, u2, u3)
    }

    /// Exact `E[(B - S) 1{S <= p <= B}]`.
    pub fn expected_gft(&self, p: Price) -> f64 {
        self.expected_gft_at(p.get())
    }

    pub(crate) fn expected_gft_at(&self, p: f64) -> f64 {
        self.components().map(|(w, law)| w * law.expected_gft(p)).sum()
    }

    /// Probabilities of the four realistic-feedback outcomes, indexed by
    /// [`crate::trade::RealisticFeedback::outcome_index`]:
    /// `[(0,0), (0,1), (1,0), (1,1)]` as `(1{S <= p}, 1{p <= B})`.
    pub fn feedback_law(&self, p: Price) -> [f64; 4] {
        let p = p.get();
        let mut out = [0.0; 4];
        for (w, law) in self.components() {
            let qs = law.s.cdf(p);
            let qb = law.b.survival(p);
            out[0] += w * (1.0 - qs) * (1.0 - qb);
            out[1] += w * (1.0 - qs) * qb;
            out[2] += w * qs * (1.0 - qb);
            out[3] += w * qs * qb;
        }
        out
    }

    /// `P[S <= x]`
    pub fn seller_cdf(&self, x: f64) -> f64 {
        self.components().map(|(w, l)| w * l.s.cdf(x)).sum()
    }

    /// `P[B >= x]`
    pub fn buyer_survival(&self, x: f64) -> f64 {
        self.components().map(|(w, l)| w * l.b.survival(x)).sum()
    }

    /// `int_0^q P[S <= t] dt`
    pub fn integrated_seller_cdf(&self, q: f64) -> f64 {
        self.components().map(|(w, l)| w * l.s.integrated_cdf(q)).sum()
    }

    /// `int_q^1 P[B >= t] dt`
    pub fn integrated_buyer_survival(&self, q: f64) -> f64 {
        self.components().map(|(w, l)| w * l.b.integrated_survival(q)).sum()
    }

    /// Exact maximiser of the expected gain from trade, smallest price on
    /// ties. Returns `(p*, E[GFT(p*)])`.
    ///
    /// The curve is a quadratic between consecutive breakpoints and upper
    /// semicontinuous at breakpoints (atoms use inclusive indicators), so the
    /// maximum is attained at a breakpoint or at an interior vertex.
    pub fn best_fixed_price(&self) -> (Price, f64) {
        let mut candidates: Vec<f64> = self.breakpoints.clone();
        for w in self.breakpoints.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let mut poly = Poly::ZERO;
            for (weight, law) in self.components() {
                poly.add_scaled(&law.piece_poly(mid), weight);
            }
            let [_, c1, c2, _] = poly.0;
            if c2 < 0.0 {
                let v = -c1 / (2.0 * c2);
                if lo < v && v < hi {
                    candidates.push(v);
                }
            }
        }
        let values: Vec<(f64, f64)> = candidates
            .into_iter()
            .map(|p| (p, self.expected_gft_at(p)))
            .collect();
        let top = values.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
        let (p, v) = values
            .into_iter()
            .filter(|&(_, v)| v >= top - ARGMAX_TIE_TOL)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("at least the endpoints 0 and 1 are candidates");
        (Price(p), v)
    }
}

/// Product law of two piecewise-constant marginals: one rectangle per pair
/// of positive-mass pieces.
pub fn product_distribution(
    f_s: &PiecewiseConstant1D,
    f_b: &PiecewiseConstant1D,
) -> Result<MixtureDistribution> {
    let mut rects = Vec::new();
    for i in 0..f_s.pieces() {
        let ms = f_s.mass(i);
        if ms <= 0.0 {
            continue;
        }
        for j in 0..f_b.pieces() {
            let mb = f_b.mass(j);
            if mb <= 0.0 {
                continue;
            }
            rects.push(UniformRectangle::new(
                f_s.breakpoints[i],
                f_s.breakpoints[i + 1],
                f_b.breakpoints[j],
                f_b.breakpoints[j + 1],
                ms * mb,
            )?);
        }
    }
    Ok(MixtureDistribution::new(rects, Vec::new())?.mark_independent())
}

/// The second decomposition evaluated directly from the marginals:
/// `P[S <= p] int_p^1 P[B >= t] dt + P[B >= p] int_0^p P[S <= t] dt`.
pub fn expected_gft_independent(
    f_s: &PiecewiseConstant1D,
    f_b: &PiecewiseConstant1D,
    p: Price,
) -> f64 {
    let p = p.get();
    f_s.cdf(p) * f_b.integrated_survival(p) + (1.0 - f_b.cdf(p)) * f_s.integrated_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    fn price(x: f64) -> Price {
        Price::new(x).unwrap()
    }

    fn sqrt_marginals(eps: f64) -> (PiecewiseConstant1D, PiecewiseConstant1D) {
        (
            PiecewiseConstant1D::new(
                vec![0.0, 0.25, 0.5, 0.75, 1.0],
                vec![2.0 * (1.0 + eps), 0.0, 2.0 * (1.0 - eps), 0.0],
            )
            .unwrap(),
            PiecewiseConstant1D::new(
                vec![0.0, 0.25, 0.5, 0.75, 1.0],
                vec![0.0, 2.0, 0.0, 2.0],
            )
            .unwrap(),
        )
    }

    #[test]
    fn uniform_product_is_one_box() {
        let d = MixtureDistribution::uniform();
        assert_eq!(d.rectangles().len(), 1);
        let r = d.rectangles()[0];
        assert_eq!((r.s_lo, r.s_hi, r.b_lo, r.b_hi, r.weight), (0.0, 1.0, 0.0, 1.0, 1.0));
        assert!(d.is_independent());
        assert_eq!(d.density_bound(), Some(1.0));
    }

    #[test]
    fn product_of_sqrt_marginals() {
        let eps = 0.3;
        let (fs, fb) = sqrt_marginals(eps);
        let d = product_distribution(&fs, &fb).unwrap();
        assert_eq!(d.rectangles().len(), 4);
        let mut weights: Vec<f64> = d.rectangles().iter().map(|r| r.weight).collect();
        weights.sort_by(f64::total_cmp);
        let expect = [(1.0 - eps) / 4.0, (1.0 - eps) / 4.0, (1.0 + eps) / 4.0, (1.0 + eps) / 4.0];
        for (w, e) in weights.iter().zip(expect) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_height_piece_is_omitted() {
        let fs = PiecewiseConstant1D::new(vec![0.0, 0.5, 0.75, 1.0], vec![1.0, 0.0, 2.0]).unwrap();
        let d = product_distribution(&fs, &PiecewiseConstant1D::uniform()).unwrap();
        assert_eq!(d.rectangles().len(), 2);
        let total: f64 = d.rectangles().iter().map(|r| r.weight).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_normalised_density_is_rejected() {
        assert!(PiecewiseConstant1D::new(vec![0.0, 1.0], vec![0.9]).is_err());
        assert!(PiecewiseConstant1D::new(vec![0.0, 0.5, 0.5, 1.0], vec![1.0, 1.0, 1.0]).is_err());
        assert!(MixtureDistribution::new(
            vec![UniformRectangle::new(0.0, 1.0, 0.0, 1.0, 0.5).unwrap()],
            vec![]
        )
        .is_err());
    }

    #[test]
    fn degenerate_rectangles_are_rejected() {
        assert!(UniformRectangle::new(0.2, 0.2, 0.0, 1.0, 1.0).is_err());
        assert!(UniformRectangle::new(0.0, 1.1, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sampling_examples() {
        let u = MixtureDistribution::uniform();
        assert_eq!(u.sample(0.0, 0.25, 0.75), ValuationPair::new(0.25, 0.75).unwrap());

        let needle = instances::needle_instance(0.5).unwrap();
        assert_eq!(needle.sample(0.30, 0.9, 0.9), ValuationPair::new(0.0, 1.0).unwrap());

        let corner = MixtureDistribution::new(
            vec![UniformRectangle::new(0.25, 0.5, 0.75, 1.0, 1.0).unwrap()],
            vec![],
        )
        .unwrap();
        assert_eq!(corner.sample(0.5, 0.0, 0.0), ValuationPair::new(0.25, 0.75).unwrap());
    }

    #[test]
    fn expected_gft_examples() {
        let u = MixtureDistribution::uniform();
        assert!((u.expected_gft(price(0.5)) - 0.125).abs() < 1e-15);

        let x = 0.3;
        let needle = instances::needle_instance(x).unwrap();
        assert_eq!(needle.expected_gft(price(x)), 0.5);
        assert!((needle.expected_gft(price(0.1)) - (1.0 + x) / 4.0).abs() < 1e-15);
        assert!((needle.expected_gft(price(0.7)) - (2.0 - x) / 4.0).abs() < 1e-15);

        let f = instances::bd_linear_instance(0.0).unwrap();
        assert!((f.expected_gft(price(0.375)) - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.expected_gft(price(0.625)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn independent_route_examples() {
        let u = PiecewiseConstant1D::uniform();
        assert!((expected_gft_independent(&u, &u, price(0.5)) - 0.125).abs() < 1e-15);
        for p in [0.0, 1.0] {
            assert_eq!(expected_gft_independent(&u, &u, price(p)), 0.0);
        }
        let eps = 0.3;
        let (fs, fb) = sqrt_marginals(eps);
        let v = expected_gft_independent(&fs, &fb, price(0.25));
        assert!((v - (1.0 + eps) / 4.0).abs() < 1e-15, "{v}");
        // the pieces of the formula
        assert!((fs.cdf(0.25) - (1.0 + eps) / 2.0).abs() < 1e-15);
        assert!((fb.integrated_survival(0.25) - 0.375).abs() < 1e-15);
        assert!((fs.integrated_cdf(0.25) - (1.0 + eps) / 16.0).abs() < 1e-15);
    }

    #[test]
    fn best_fixed_price_examples() {
        let (p, v) = MixtureDistribution::uniform().best_fixed_price();
        assert!((p.get() - 0.5).abs() < 1e-12 && (v - 0.125).abs() < 1e-15);

        for x in [0.2, 0.5, 0.77] {
            let (p, v) = instances::needle_instance(x).unwrap().best_fixed_price();
            assert_eq!((p.get(), v), (x, 0.5));
        }

        let (p, v) = instances::bd_linear_instance(0.0).unwrap().best_fixed_price();
        assert_eq!(p.get(), 0.375);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn feedback_law_examples() {
        let u = MixtureDistribution::uniform();
        assert_eq!(u.feedback_law(price(0.5)), [0.25; 4]);

        let f = instances::bd_linear_instance(0.0).unwrap();
        let g = instances::bd_linear_instance(1.0).unwrap();
        let lf = f.feedback_law(price(0.375));
        assert!((lf[3] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(lf, g.feedback_law(price(0.375)));
    }

    #[test]
    fn marginal_integrals_match_density_route() {
        let (fs, fb) = sqrt_marginals(-0.4);
        let d = product_distribution(&fs, &fb).unwrap();
        for k in 0..=40 {
            let q = k as f64 / 40.0;
            assert!((d.integrated_seller_cdf(q) - fs.integrated_cdf(q)).abs() < 1e-14);
            assert!((d.integrated_buyer_survival(q) - fb.integrated_survival(q)).abs() < 1e-14);
            assert!((d.seller_cdf(q) - fs.cdf(q)).abs() < 1e-14);
        }
    }

    #[test]
    fn marginal_density_bounds() {
        let d = instances::two_third_instance(0.3).unwrap();
        assert!((d.marginal_density_bound().unwrap() - 12.0 * 1.3).abs() < 1e-9);
        assert_eq!(MixtureDistribution::uniform().marginal_density_bound(), Some(1.0));
        assert_eq!(instances::needle_instance(0.5).unwrap().marginal_density_bound(), None);
    }
}
