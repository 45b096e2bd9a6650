//! Scalar abstraction shared by the exact (rational) and float jet pipelines.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arbitrary-precision rational scalar used by the exact pipeline.
pub type Rat = BigRational;

/// Field operations needed by the jet algebra.
///
/// Implemented for `f64` (float mode) and [`Rat`] (exact mode). `EXACT`
/// distinguishes the two where equality semantics differ (base-point
/// matching, zero tests).
pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_i64(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Multiplicative inverse; `None` for zero.
    fn recip(&self) -> Option<Self>;
    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn recip(&self) -> Option<Self> {
        if *self == 0.0 {
            None
        } else {
            Some(1.0 / *self)
        }
    }
}

impl Scalar for Rat {
    const EXACT: bool = true;

    fn zero() -> Self {
        <Rat as Zero>::zero()
    }
    fn one() -> Self {
        <Rat as One>::one()
    }
    fn is_zero(&self) -> bool {
        <Rat as Zero>::is_zero(self)
    }
    fn from_i64(v: i64) -> Self {
        Rat::from_integer(BigInt::from(v))
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Rat::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        num::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn recip(&self) -> Option<Self> {
        if <Rat as Zero>::is_zero(self) {
            None
        } else {
            Some(<Rat as One>::one() / self.clone())
        }
    }
    fn abs_f64(&self) -> f64 {
        num::ToPrimitive::to_f64(&self.abs()).unwrap_or(f64::NAN)
    }
}

/// Exact rational from an `f64` (every finite float is rational).
pub fn rat_from_f64(v: f64) -> Option<Rat> {
    Rat::from_float(v)
}

/// k! as f64; exact for k <= 170.
pub fn factorial_f64(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// ln k!.
pub fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// k! as an exact rational.
pub fn factorial_rat(k: usize) -> Rat {
    let mut acc = BigInt::one();
    for i in 1..=k as i64 {
        acc *= i;
    }
    Rat::from_integer(acc)
}

/// Binomial coefficient as f64.
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
