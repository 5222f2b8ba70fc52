//! Scalar fields the series layer is generic over.
//!
//! Two modes exist: exact arbitrary-precision rationals (the default for every
//! algebraic check) and `f64` (used by the free-energy estimator). The mode is
//! a type parameter, so one computation can never mix the two.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type Rational = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarMode {
    ExactRational,
    Float64,
}

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const MODE: ScalarMode;

    fn from_rational(r: &Rational) -> Self;

    fn from_i64(v: i64) -> Self;

    fn from_bigint(v: &BigInt) -> Self;

    fn is_positive(&self) -> bool;

    fn to_f64(&self) -> f64;

    /// Natural log of a positive constant, when representable in this field.
    fn ln(&self) -> Option<Self>;

    /// Zero test used by elimination: exact for rationals, `|x| <= tol` for floats.
    fn negligible(&self, tol: f64) -> bool;

    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }
}

impl Scalar for Rational {
    const MODE: ScalarMode = ScalarMode::ExactRational;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_bigint(v: &BigInt) -> Self {
        Rational::from_integer(v.clone())
    }

    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }

    fn negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn ln(&self) -> Option<Self> {
        if self.is_one() {
            Some(Rational::zero())
        } else {
            None
        }
    }
}

impl Scalar for f64 {
    const MODE: ScalarMode = ScalarMode::Float64;

    fn from_rational(r: &Rational) -> Self {
        ratio_to_f64(r)
    }

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_bigint(v: &BigInt) -> Self {
        v.to_f64().unwrap_or(f64::NAN)
    }

    fn is_positive(&self) -> bool {
        *self > 0.0
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn negligible(&self, tol: f64) -> bool {
        self.abs() <= tol
    }

    fn ln(&self) -> Option<Self> {
        (*self > 0.0).then(|| f64::ln(*self))
    }
}

/// Converts a big rational to the nearest `f64`, tolerating huge numerators and
/// denominators that would overflow a naive `num / den`.
pub fn ratio_to_f64(r: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() {
            return n / d;
        }
    }
    let shift = r.numer().bits().max(r.denom().bits()) as i64 - 900;
    let scaled = if shift > 0 {
        let n = r.numer() >> (shift as usize);
        let d = r.denom() >> (shift as usize);
        (n, d)
    } else {
        (r.numer().clone(), r.denom().clone())
    };
    match (scaled.0.to_f64(), scaled.1.to_f64()) {
        (Some(n), Some(d)) if d != 0.0 => n / d,
        _ => f64::NAN,
    }
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n as u64).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Best rational approximation with denominator at most `max_den`
/// (continued-fraction convergents).
pub fn approximate_rational(x: f64, max_den: i64) -> Rational {
    if !x.is_finite() {
        return Rational::zero();
    }
    let sign = if x < 0.0 { -1 } else { 1 };
    let mut v = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    for _ in 0..64 {
        let a = v.floor();
        if a > 1e12 {
            break;
        }
        let a = a as i64;
        let p2 = a * p1 + p0;
        let q2 = a * q1 + q0;
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = v - a as f64;
        if frac < 1e-12 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        return Rational::zero();
    }
    rat(sign * p1, q1)
}

/// JSON form of a rational: `{"num": n, "den": d}`, integers as JSON numbers
/// when they fit in 64 bits and as decimal strings otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Q(pub Rational);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonInt {
    Small(i64),
    Big(String),
}

impl JsonInt {
    fn of(v: &BigInt) -> Self {
        match v.to_i64() {
            Some(x) => JsonInt::Small(x),
            None => JsonInt::Big(v.to_string()),
        }
    }

    fn value(&self) -> Result<BigInt, String> {
        match self {
            JsonInt::Small(x) => Ok(BigInt::from(*x)),
            JsonInt::Big(s) => s.parse().map_err(|_| format!("invalid integer `{s}`")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct QRepr {
    num: JsonInt,
    den: JsonInt,
}

impl Serialize for Q {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        QRepr {
            num: JsonInt::of(self.0.numer()),
            den: JsonInt::of(self.0.denom()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = QRepr::deserialize(d)?;
        let num = r.num.value().map_err(D::Error::custom)?;
        let den = r.den.value().map_err(D::Error::custom)?;
        if den.is_zero() {
            return Err(D::Error::custom("zero denominator"));
        }
        Ok(Q(Rational::new(num, den)))
    }
}

impl From<Rational> for Q {
    fn from(r: Rational) -> Self {
        Q(r)
    }
}

impl std::fmt::Display for Q {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_are_normalized() {
        let r = rat(2, -4);
        assert_eq!(r.numer(), &BigInt::from(-1));
        assert_eq!(r.denom(), &BigInt::from(2));
    }

    #[test]
    fn float_of_large_ratio() {
        let big = Rational::new(BigInt::from(3) << 2000usize, BigInt::from(2) << 2000usize);
        assert!((ratio_to_f64(&big) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn continued_fraction_recovers_simple_fractions() {
        assert_eq!(approximate_rational(0.333333333, 100), rat(1, 3));
        assert_eq!(approximate_rational(-0.75, 100), rat(-3, 4));
        assert_eq!(approximate_rational(2.0, 100), int(2));
    }

    #[test]
    fn json_form() {
        let q = Q(rat(3, 4));
        let text = serde_json::to_string(&q).unwrap();
        assert_eq!(text, r#"{"num":3,"den":4}"#);
        let big = Q(Rational::new(BigInt::from(7) << 100usize, BigInt::from(3)));
        let back: Q = serde_json::from_str(&serde_json::to_string(&big).unwrap()).unwrap();
        assert_eq!(back, big);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), BigInt::from(6));
        assert_eq!(binomial(3, 5), BigInt::from(0));
    }
}
