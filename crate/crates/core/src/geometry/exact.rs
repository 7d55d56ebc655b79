use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::Rng;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::{rational_to_f64, Rational, Scalar, ScalarKind};

/// An element `a + b·√2` of the quadratic field ℚ[√2].
///
/// Both parts are kept as reduced rationals, so equality is structural and
/// `is_rational` is a plain test on `b`. Ordering is decided from the signs of
/// `a` and `b` and a comparison of `a²` with `2b²`; no floating arithmetic is
/// involved.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ExactScalar {
    a: Rational,
    b: Rational,
}

impl ExactScalar {
    pub fn new(a: Rational, b: Rational) -> Self {
        ExactScalar { a, b }
    }

    pub fn rational(a: Rational) -> Self {
        ExactScalar { a, b: Rational::zero() }
    }

    /// `p/q + (r/s)·√2` from small integers.
    pub fn from_parts(p: i64, q: i64, r: i64, s: i64) -> Self {
        ExactScalar {
            a: Rational::new(BigInt::from(p), BigInt::from(q)),
            b: Rational::new(BigInt::from(r), BigInt::from(s)),
        }
    }

    pub fn sqrt2() -> Self {
        ExactScalar::from_parts(0, 1, 1, 1)
    }

    pub fn rational_part(&self) -> &Rational {
        &self.a
    }

    pub fn sqrt2_part(&self) -> &Rational {
        &self.b
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn conjugate(&self) -> Self {
        ExactScalar {
            a: self.a.clone(),
            b: -self.b.clone(),
        }
    }

    /// `a² − 2b²`, the field norm.
    pub fn norm(&self) -> Rational {
        &self.a * &self.a - Rational::from_integer(2.into()) * &self.b * &self.b
    }

    pub fn signum(&self) -> Ordering {
        let zero = Rational::zero();
        let sa = self.a.cmp(&zero);
        let sb = self.b.cmp(&zero);
        match (sa, sb) {
            (Ordering::Equal, Ordering::Equal) => Ordering::Equal,
            (Ordering::Greater | Ordering::Equal, Ordering::Greater | Ordering::Equal) => Ordering::Greater,
            (Ordering::Less | Ordering::Equal, Ordering::Less | Ordering::Equal) => Ordering::Less,
            // a > 0 > b: positive iff a² > 2b²
            (Ordering::Greater, Ordering::Less) => {
                if self.norm().is_positive() {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
            // a < 0 < b: positive iff 2b² > a²
            (Ordering::Less, Ordering::Greater) => {
                if self.norm().is_negative() {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }
}

impl From<Rational> for ExactScalar {
    fn from(a: Rational) -> Self {
        ExactScalar::rational(a)
    }
}

impl From<i64> for ExactScalar {
    fn from(v: i64) -> Self {
        ExactScalar::from_parts(v, 1, 0, 1)
    }
}

impl Ord for ExactScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.clone() - other.clone()).signum()
    }
}

impl PartialOrd for ExactScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for ExactScalar {
    type Output = ExactScalar;

    fn add(self, rhs: Self) -> Self {
        ExactScalar {
            a: self.a + rhs.a,
            b: self.b + rhs.b,
        }
    }
}

impl Sub for ExactScalar {
    type Output = ExactScalar;

    fn sub(self, rhs: Self) -> Self {
        ExactScalar {
            a: self.a - rhs.a,
            b: self.b - rhs.b,
        }
    }
}

impl Mul for ExactScalar {
    type Output = ExactScalar;

    fn mul(self, rhs: Self) -> Self {
        let two = Rational::from_integer(2.into());
        ExactScalar {
            a: &self.a * &rhs.a + two * &self.b * &rhs.b,
            b: &self.a * &rhs.b + &self.b * &rhs.a,
        }
    }
}

impl Div for ExactScalar {
    type Output = ExactScalar;

    /// Panics on division by zero, like the rational division it builds on.
    fn div(self, rhs: Self) -> Self {
        let norm = rhs.norm();
        assert!(!norm.is_zero(), "division by zero in ℚ[√2]");
        let num = self * rhs.conjugate();
        ExactScalar {
            a: num.a / &norm,
            b: num.b / norm,
        }
    }
}

impl Neg for ExactScalar {
    type Output = ExactScalar;

    fn neg(self) -> Self {
        ExactScalar { a: -self.a, b: -self.b }
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", self.a);
        }
        if !self.a.is_zero() {
            write!(f, "{}", self.a)?;
            f.write_str(if self.b.is_negative() { "-" } else { "+" })?;
        } else if self.b.is_negative() {
            f.write_str("-")?;
        }
        write!(f, "{}*sqrt(2)", self.b.abs())
    }
}

impl FromStr for ExactScalar {
    type Err = String;

    /// Parses the `Display` form: `a`, `b*sqrt(2)` or `a±b*sqrt(2)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("malformed element of Q[sqrt 2]: {s:?}");
        let Some(body) = s.strip_suffix("*sqrt(2)") else {
            return s.parse::<Rational>().map(ExactScalar::rational).map_err(|_| bad());
        };
        // the sign separating the parts is the last '+' or '-' not at position 0
        let split = body
            .char_indices()
            .skip(1)
            .filter(|(_, c)| *c == '+' || *c == '-')
            .map(|(i, _)| i)
            .last();
        let (a, b) = match split {
            Some(i) => {
                let a = body[..i].parse::<Rational>().map_err(|_| bad())?;
                let mut b = body[i + 1..].parse::<Rational>().map_err(|_| bad())?;
                if &body[i..i + 1] == "-" {
                    b = -b;
                }
                (a, b)
            }
            None => (Rational::zero(), body.parse::<Rational>().map_err(|_| bad())?),
        };
        Ok(ExactScalar { a, b })
    }
}

impl Serialize for ExactScalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExactScalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

impl Scalar for ExactScalar {
    const KIND: ScalarKind = ScalarKind::Exact;

    fn zero() -> Self {
        ExactScalar::default()
    }

    fn one() -> Self {
        ExactScalar::from(1)
    }

    fn from_rational(q: &Rational) -> Self {
        ExactScalar::rational(q.clone())
    }

    fn from_f64(v: f64) -> Self {
        ExactScalar::rational(super::exact_f64(v))
    }

    fn to_rational(&self) -> Option<Rational> {
        self.is_rational().then(|| self.a.clone())
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(&self.a) + rational_to_f64(&self.b) * std::f64::consts::SQRT_2
    }

    fn default_tolerance() -> f64 {
        0.0
    }

    /// Half of the samples are rational (`k/64` of the way from `lo` to `hi`)
    /// and half are irrational (`j·√2/16` of the way).
    fn sample_between<R: Rng + ?Sized>(lo: &Self, hi: &Self, rng: &mut R) -> Self {
        let width = hi.clone() - lo.clone();
        let t = if rng.gen_bool(0.5) {
            ExactScalar::from_parts(rng.gen_range(0..=64), 64, 0, 1)
        } else {
            ExactScalar::from_parts(0, 1, rng.gen_range(1..=11), 16)
        };
        lo.clone() + width * t
    }

    fn sample_weight<R: Rng + ?Sized>(rng: &mut R) -> Self {
        ExactScalar::from_parts(rng.gen_range(1..64), 64, 0, 1)
    }

    /// Irrational pairs `lo + c·w·√2`, `hi − c·w·√2` (with `w = hi − lo`)
    /// whose midpoint is `(lo + hi)/2`.
    fn probe_pairs(lo: &Self, hi: &Self) -> Vec<(Self, Self)> {
        let width = hi.clone() - lo.clone();
        if width.signum() != Ordering::Greater {
            return Vec::new();
        }
        [4, 8, 16]
            .into_iter()
            .map(|d| {
                let shift = width.clone() * ExactScalar::from_parts(0, 1, 1, d);
                (lo.clone() + shift.clone(), hi.clone() - shift)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn rationality() {
        assert!(ExactScalar::from_parts(1, 2, 0, 1).is_rational());
        assert!(!ExactScalar::from_parts(0, 1, 1, 4).is_rational());
        let lo = ExactScalar::from_parts(0, 1, 1, 4);
        let hi = ExactScalar::from_parts(1, 1, -1, 4);
        let mid = (lo + hi) * ExactScalar::from_parts(1, 2, 0, 1);
        assert!(mid.is_rational());
        assert_eq!(mid, ExactScalar::rational(q(1, 2)));
    }

    #[test]
    fn sign_by_case_analysis() {
        assert_eq!(ExactScalar::from_parts(3, 2, -1, 1).signum(), Ordering::Greater); // 1.5 - 1.414
        assert_eq!(ExactScalar::from_parts(7, 5, -1, 1).signum(), Ordering::Less); // 1.4 - 1.414
        assert_eq!(ExactScalar::from_parts(-3, 2, 1, 1).signum(), Ordering::Less);
        assert_eq!(ExactScalar::from_parts(-7, 5, 1, 1).signum(), Ordering::Greater);
        assert_eq!(ExactScalar::zero().signum(), Ordering::Equal);
        assert!(ExactScalar::sqrt2() > ExactScalar::from_parts(141, 100, 0, 1));
        assert!(ExactScalar::sqrt2() < ExactScalar::from_parts(142, 100, 0, 1));
    }

    #[test]
    fn sqrt2_squares_to_two() {
        assert_eq!(ExactScalar::sqrt2() * ExactScalar::sqrt2(), ExactScalar::from(2));
        assert_eq!(
            ExactScalar::from(1) / ExactScalar::sqrt2(),
            ExactScalar::from_parts(0, 1, 1, 2)
        );
    }

    #[test]
    fn display_round_trips() {
        for v in [
            ExactScalar::from_parts(1, 2, 0, 1),
            ExactScalar::from_parts(0, 1, 1, 4),
            ExactScalar::from_parts(0, 1, -1, 4),
            ExactScalar::from_parts(1, 1, -1, 4),
            ExactScalar::from_parts(-3, 7, 5, 3),
        ] {
            let s = v.to_string();
            assert_eq!(s.parse::<ExactScalar>().unwrap(), v, "{s}");
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<ExactScalar>(&json).unwrap(), v);
        }
        assert_eq!(ExactScalar::from_parts(1, 1, -1, 4).to_string(), "1-1/4*sqrt(2)");
    }

    #[test]
    fn probe_pairs_have_rational_midpoints() {
        let lo = ExactScalar::zero();
        let hi = ExactScalar::one();
        let pairs = ExactScalar::probe_pairs(&lo, &hi);
        assert_eq!(pairs[0].0, ExactScalar::from_parts(0, 1, 1, 4));
        assert_eq!(pairs[0].1, ExactScalar::from_parts(1, 1, -1, 4));
        for (a, b) in pairs {
            assert!(!a.is_rational() && !b.is_rational());
            assert!(a >= lo && b <= hi);
            let mid = (a + b) / ExactScalar::from(2);
            assert_eq!(mid, ExactScalar::from_parts(1, 2, 0, 1));
        }
    }

    fn arb_exact(bound: i64) -> impl Strategy<Value = ExactScalar> {
        (-bound..=bound, 1i64..=50, -bound..=bound, 1i64..=50)
            .prop_map(|(p, q, r, s)| ExactScalar::from_parts(p, q, r, s))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn field_laws_hold_exactly(p in arb_exact(100), q in arb_exact(100)) {
            prop_assert_eq!((p.clone() + q.clone()) - q.clone(), p.clone());
            if q != ExactScalar::zero() {
                prop_assert_eq!((p.clone() * q.clone()) / q, p);
            }
        }

        #[test]
        fn ordering_agrees_with_floats(p in arb_exact(100), q in arb_exact(100)) {
            if p < q {
                prop_assert!(p.to_f64() <= q.to_f64() + 1e-12);
            }
            prop_assert_eq!(p.cmp(&q), q.cmp(&p).reverse());
        }
    }
}
