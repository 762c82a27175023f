//! Numeric carriers shared by the exact and floating-point code paths.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational number.
pub type Q = BigRational;

/// Field-like scalar used to evaluate polynomials either exactly (`Q`) or in
/// floating point (`f64`).
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn s_zero() -> Self;
    fn s_one() -> Self;
    fn from_q(q: &Q) -> Self;
    fn as_f64(&self) -> f64;
    fn s_is_zero(&self) -> bool;
    fn s_from_i64(v: i64) -> Self;
}

impl Scalar for f64 {
    fn s_zero() -> Self {
        0.0
    }
    fn s_one() -> Self {
        1.0
    }
    fn from_q(q: &Q) -> Self {
        q_to_f64(q)
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn s_is_zero(&self) -> bool {
        *self == 0.0
    }
    fn s_from_i64(v: i64) -> Self {
        v as f64
    }
}

impl Scalar for Q {
    fn s_zero() -> Self {
        Zero::zero()
    }
    fn s_one() -> Self {
        One::one()
    }
    fn from_q(q: &Q) -> Self {
        q.clone()
    }
    fn as_f64(&self) -> f64 {
        q_to_f64(self)
    }
    fn s_is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn s_from_i64(v: i64) -> Self {
        Q::from_integer(BigInt::from(v))
    }
}

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // numerator or denominator overflowed f64; fall back to a scaled division
        let n = x.numer().bits() as i64;
        let d = x.denom().bits() as i64;
        let shift = (n - d).clamp(-1000, 1000);
        let sign = if x.is_negative() { -1.0 } else { 1.0 };
        sign * 2f64.powi(shift as i32)
    })
}

/// Exact rational value of a finite float.
pub fn f64_to_q(x: f64) -> Q {
    Q::from_float(x).unwrap_or_else(Q::zero)
}

pub fn q_abs(x: &Q) -> Q {
    x.abs()
}
