//! Numeric foundations: scalars, points, compact boxes and grids.
//!
//! Two scalar kinds are supported. `f64` covers every floating instance and
//! [`ExactScalar`] (elements of ℚ[√2]) covers instances whose definition
//! depends on the rationality of a point, which no floating predicate can
//! decide.

mod exact;
mod grid;

use std::fmt;
use std::ops::{Add, Div, Index, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exact::ExactScalar;
pub use grid::{Grid, GridSpec};

/// Arbitrary precision rational, used wherever membership must be exact.
pub type Rational = BigRational;

/// Largest ambient dimension handled by the toolkit.
pub const MAX_DIM: usize = 3;

/// Slack allowed on the weight sum of a floating convex combination.
pub const WEIGHT_SUM_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    Real,
    Exact,
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarKind::Real => f.write_str("real"),
            ScalarKind::Exact => f.write_str("exact"),
        }
    }
}

/// Scalar field the bifunctions are evaluated over.
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Serialize
    + for<'de> Deserialize<'de>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const KIND: ScalarKind;

    fn zero() -> Self;

    fn one() -> Self;

    fn from_rational(q: &Rational) -> Self;

    /// Lifts a finite float. Exact scalars take the float's exact binary value.
    fn from_f64(v: f64) -> Self;

    /// The rational value, or `None` when the scalar is irrational.
    fn to_rational(&self) -> Option<Rational>;

    fn to_f64(&self) -> f64;

    fn is_finite(&self) -> bool {
        true
    }

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Default slack used by the hypothesis checkers.
    fn default_tolerance() -> f64;

    /// Sample from the closed interval `[lo, hi]`.
    fn sample_between<R: Rng + ?Sized>(lo: &Self, hi: &Self, rng: &mut R) -> Self;

    /// Sample a weight from the open interval `(0, 1)`.
    fn sample_weight<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Structured pairs in `[lo, hi]` that random sampling would almost
    /// surely miss. Pairs are probed with weight one half.
    fn probe_pairs(_lo: &Self, _hi: &Self) -> Vec<(Self, Self)> {
        Vec::new()
    }

    /// Inner product.
    fn dot(a: &[Self], b: &[Self]) -> Self {
        a.iter()
            .zip(b)
            .fold(Self::zero(), |acc, (u, v)| acc + u.clone() * v.clone())
    }
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Real;

    fn zero() -> Self {
        0.0
    }

    fn one() -> Self {
        1.0
    }

    fn from_rational(q: &Rational) -> Self {
        rational_to_f64(q)
    }

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_rational(&self) -> Option<Rational> {
        Rational::from_float(*self)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn default_tolerance() -> f64 {
        1e-9
    }

    fn sample_between<R: Rng + ?Sized>(lo: &Self, hi: &Self, rng: &mut R) -> Self {
        if hi <= lo {
            return *lo;
        }
        let t: f64 = rng.gen();
        (lo + (hi - lo) * t).clamp(*lo, *hi)
    }

    fn sample_weight<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let t: f64 = rng.gen();
            if t > 0.0 {
                return t;
            }
        }
    }

    /// Sign-exact inner product: the products are summed without rounding
    /// and only the total is rounded, so scaling either argument by a
    /// positive factor never flips the sign of the result.
    fn dot(a: &[Self], b: &[Self]) -> Self {
        if a.len() == 1 {
            return a[0] * b[0];
        }
        let exact = a
            .iter()
            .zip(b)
            .map(|(u, v)| exact_f64(*u) * exact_f64(*v))
            .fold(Rational::zero(), |acc, t| acc + t);
        rational_to_f64(&exact)
    }
}

/// Checked `i128` rationals for hot loops. Callers fall back to [`Rational`]
/// whenever a value does not fit.
pub(crate) type SmallRational = num_rational::Ratio<i128>;

pub(crate) fn to_small(q: &Rational) -> Option<SmallRational> {
    Some(SmallRational::new_raw(q.numer().to_i128()?, q.denom().to_i128()?))
}

/// Exact value of a finite float as an `i128` rational, when it fits.
pub(crate) fn f64_to_small(v: f64) -> Option<SmallRational> {
    if v == 0.0 {
        return Some(SmallRational::from_integer(0));
    }
    if !v.is_finite() {
        return None;
    }
    let bits = v.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i128;
    let (mantissa, exp) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), exp - 1075)
    };
    let signed = if v < 0.0 { -mantissa } else { mantissa };
    let shift = mantissa.trailing_zeros() as i32;
    let (m, e) = (signed >> shift, exp + shift);
    if e >= 0 {
        (e <= 126 - 53).then(|| SmallRational::from_integer(m << e))
    } else {
        (-e <= 126).then(|| SmallRational::new_raw(m, 1i128 << -e))
    }
}

pub(crate) fn from_small(q: &SmallRational) -> Rational {
    Rational::new_raw((*q.numer()).into(), (*q.denom()).into())
}

/// Exact rational value of a finite float.
pub fn exact_f64(v: f64) -> Rational {
    Rational::from_float(v).expect("finite float")
}

/// Nearest float to a rational.
pub fn rational_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        if q.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Parses a decimal literal such as `-1.25` or `3e-2` into an exact rational.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer: BigInt = all_digits.parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// A point of R^n, n ≤ 3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<S = f64> {
    coords: Vec<S>,
}

impl<S: Scalar> Point<S> {
    pub fn new(coords: Vec<S>) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::argument(format!(
                "point dimension must be in 1..={MAX_DIM}, got {}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("point coordinate {bad}")));
        }
        Ok(Point { coords })
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<S>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<S> {
        self.coords
    }

    pub fn to_f64(&self) -> Point<f64> {
        Point {
            coords: self.coords.iter().map(Scalar::to_f64).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.coords.iter().map(Scalar::to_f64).collect()
    }

    /// Exact coordinates, `None` if any coordinate is irrational.
    pub fn to_rational(&self) -> Option<Vec<Rational>> {
        self.coords.iter().map(Scalar::to_rational).collect()
    }

    pub(crate) fn offset(&self, axis: usize, delta: &S) -> Self {
        let mut coords = self.coords.clone();
        coords[axis] = coords[axis].clone() + delta.clone();
        Point { coords }
    }

    /// `λ·self + (1−λ)·other`
    pub fn lerp(&self, other: &Self, lambda: &S) -> Self {
        let mu = S::one() - lambda.clone();
        Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| lambda.clone() * a.clone() + mu.clone() * b.clone())
                .collect(),
        }
    }
}

impl<S> Index<usize> for Point<S> {
    type Output = S;

    fn index(&self, i: usize) -> &S {
        &self.coords[i]
    }
}

impl<S: Scalar> fmt::Display for Point<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Euclidean distance between float coordinate slices.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// A nonempty axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactBox<S = f64> {
    lower: Point<S>,
    upper: Point<S>,
}

impl<S: Scalar> CompactBox<S> {
    pub fn new(lower: Point<S>, upper: Point<S>) -> Result<Self> {
        if lower.dim() != upper.dim() {
            return Err(Error::DimensionMismatch {
                expected: lower.dim(),
                found: upper.dim(),
            });
        }
        for i in 0..lower.dim() {
            if lower[i] > upper[i] {
                return Err(Error::instance(format!(
                    "box is empty on axis {}: {} > {}",
                    i + 1,
                    lower[i],
                    upper[i]
                )));
            }
        }
        Ok(CompactBox { lower, upper })
    }

    pub fn from_bounds(lower: Vec<S>, upper: Vec<S>) -> Result<Self> {
        CompactBox::new(Point::new(lower)?, Point::new(upper)?)
    }

    /// The box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: S, hi: S) -> Result<Self> {
        CompactBox::from_bounds(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn lower(&self) -> &Point<S> {
        &self.lower
    }

    pub fn upper(&self) -> &Point<S> {
        &self.upper
    }

    pub fn contains(&self, p: &Point<S>) -> Result<bool> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.dim(),
            });
        }
        Ok((0..self.dim()).all(|i| self.lower[i] <= p[i] && p[i] <= self.upper[i]))
    }

    /// Clamp a point into the box, coordinate by coordinate.
    pub fn clamp(&self, p: &Point<S>) -> Point<S> {
        Point::from_vec_unchecked(
            (0..self.dim())
                .map(|i| {
                    if p[i] < self.lower[i] {
                        self.lower[i].clone()
                    } else if p[i] > self.upper[i] {
                        self.upper[i].clone()
                    } else {
                        p[i].clone()
                    }
                })
                .collect(),
        )
    }

    pub fn diameter(&self) -> f64 {
        distance(&self.lower.to_f64_vec(), &self.upper.to_f64_vec())
    }

    pub fn to_f64(&self) -> CompactBox<f64> {
        CompactBox {
            lower: self.lower.to_f64(),
            upper: self.upper.to_f64(),
        }
    }

    /// Exact bounds; fails when a bound is irrational.
    pub fn to_rational(&self) -> Result<(Vec<Rational>, Vec<Rational>)> {
        match (self.lower.to_rational(), self.upper.to_rational()) {
            (Some(lo), Some(hi)) => Ok((lo, hi)),
            _ => Err(Error::instance("box bounds must be rational")),
        }
    }

    /// Uniform sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<S> {
        Point::from_vec_unchecked(
            (0..self.dim())
                .map(|i| S::sample_between(&self.lower[i], &self.upper[i], rng))
                .collect(),
        )
    }

    /// `per_axis` evenly spaced points on each axis, lexicographic.
    pub fn lattice(&self, per_axis: usize) -> Vec<Point<S>> {
        let per_axis = per_axis.max(2);
        let denom = BigInt::from(per_axis - 1);
        let axes: Vec<Vec<S>> = (0..self.dim())
            .map(|i| {
                let width = self.upper[i].clone() - self.lower[i].clone();
                (0..per_axis)
                    .map(|k| {
                        if k + 1 == per_axis {
                            return self.upper[i].clone();
                        }
                        let t = S::from_rational(&Rational::new(BigInt::from(k), denom.clone()));
                        self.lower[i].clone() + width.clone() * t
                    })
                    .collect()
            })
            .collect();
        cartesian(&axes)
    }
}

fn cartesian<S: Scalar>(axes: &[Vec<S>]) -> Vec<Point<S>> {
    let mut out: Vec<Vec<S>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(Point::from_vec_unchecked).collect()
}

/// Weighted sum of points with nonnegative weights summing to one.
///
/// Floating weights may miss one by at most [`WEIGHT_SUM_SLACK`]; exact
/// weights must sum to one exactly.
pub fn convex_combination<S: Scalar>(points: &[Point<S>], weights: &[S]) -> Result<Point<S>> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::argument(format!(
            "need equally many points and weights, got {} and {}",
            points.len(),
            weights.len()
        )));
    }
    let dim = points[0].dim();
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.dim(),
        });
    }
    if let Some(w) = weights.iter().find(|w| **w < S::zero()) {
        return Err(Error::argument(format!("negative weight {w}")));
    }
    let sum = weights.iter().cloned().fold(S::zero(), |a, b| a + b);
    let ok = match S::KIND {
        ScalarKind::Exact => sum == S::one(),
        ScalarKind::Real => (sum.clone() - S::one()).abs() <= S::from_f64(WEIGHT_SUM_SLACK),
    };
    if !ok {
        return Err(Error::argument(format!("weights sum to {sum}, not 1")));
    }
    if points.iter().all(|p| p == &points[0]) {
        return Ok(points[0].clone());
    }
    let coords = (0..dim)
        .map(|i| {
            points
                .iter()
                .zip(weights)
                .fold(S::zero(), |acc, (p, w)| acc + w.clone() * p[i].clone())
        })
        .collect();
    Ok(Point::from_vec_unchecked(coords))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn contains_examples() {
        let b = CompactBox::from_bounds(vec![0.0], vec![2.0]).unwrap();
        assert!(b.contains(&p(&[1.0])).unwrap());
        assert!(b.contains(&p(&[2.0])).unwrap());
        let sq = CompactBox::cube(2, 0.0, 1.0).unwrap();
        assert!(!sq.contains(&p(&[0.5, 1.5])).unwrap());
        assert!(matches!(sq.contains(&p(&[0.5])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_box_is_rejected() {
        assert!(CompactBox::from_bounds(vec![1.0], vec![0.0]).is_err());
        assert!(Point::new(vec![0.0; 4]).is_err());
        assert!(Point::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn convex_combination_examples() {
        let mid = convex_combination(&[p(&[0.0]), p(&[2.0])], &[0.5, 0.5]).unwrap();
        assert_eq!(mid, p(&[1.0]));
        let x = p(&[0.3]);
        assert_eq!(convex_combination(std::slice::from_ref(&x), &[1.0]).unwrap(), x);
        let sym = convex_combination(&[p(&[0.0]), p(&[1.0]), p(&[2.0])], &[0.25, 0.5, 0.25]).unwrap();
        assert_eq!(sym, p(&[1.0]));
    }

    #[test]
    fn convex_combination_rejects_bad_weights() {
        let pts = [p(&[0.0]), p(&[1.0])];
        assert!(convex_combination(&pts, &[-0.5, 1.5]).is_err());
        assert!(convex_combination(&pts, &[0.5, 0.6]).is_err());
        assert!(convex_combination(&pts, &[1.0]).is_err());
        // within the documented slack
        assert!(convex_combination(&pts, &[0.5, 0.5 + 1e-13]).is_ok());
    }

    #[test]
    fn identical_points_combine_exactly() {
        let x = p(&[0.1, 0.7]);
        let pts = vec![x.clone(); 3];
        let got = convex_combination(&pts, &[0.1, 0.2, 0.7]).unwrap();
        assert_eq!(got, x);
    }

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_decimal("1.5").unwrap(), Rational::new(3.into(), 2.into()));
        assert_eq!(parse_decimal("-0.25").unwrap(), Rational::new((-1).into(), 4.into()));
        assert_eq!(parse_decimal("3e-2").unwrap(), Rational::new(3.into(), 100.into()));
        assert_eq!(parse_decimal("2").unwrap(), Rational::from_integer(2.into()));
        assert!(parse_decimal("1.2.3").is_none());
        assert!(parse_decimal(".").is_none());
    }

    #[test]
    fn rational_to_float_rounds_to_nearest() {
        for (n, d) in [(3, 5), (7, 5), (1, 10), (601, 1000), (2, 3)] {
            let q = Rational::new(n.into(), d.into());
            assert_eq!(rational_to_f64(&q), n as f64 / d as f64);
        }
    }

    #[test]
    fn float_dot_matches_exact_sign() {
        let cases = [
            ([0.1, 0.3], [0.6, -0.2]),
            ([1.0, 3.0], [0.6, -0.2]),
            ([0.7, -0.1], [0.1, 0.7]),
        ];
        for (v, d) in cases {
            let exact = exact_f64(v[0]) * exact_f64(d[0]) + exact_f64(v[1]) * exact_f64(d[1]);
            let got = f64::dot(&v, &d);
            assert_eq!(got.partial_cmp(&0.0).unwrap(), exact.cmp(&Rational::zero()));
        }
        assert_eq!(f64::dot(&[2.0], &[0.5]), 1.0);
    }
}
