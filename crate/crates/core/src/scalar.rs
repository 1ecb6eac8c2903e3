//! Scalar abstractions.
//!
//! Everything algebraic in the crate is written against [`Scalar`], which is
//! satisfied by `f32`, `f64` and the exact [`Rational`] type. Operations that
//! need transcendental functions (real powers, logarithms, square roots) ask
//! for [`Real`] instead.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// Arbitrary precision rational number used on the exact path.
pub type Rational = BigRational;

/// Field-like scalar: exact rationals or IEEE floats.
pub trait Scalar:
    Clone + Debug + PartialEq + PartialOrd + Num + Neg<Output = Self> + Signed + Send + Sync + 'static
{
    fn from_i64(v: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    /// Lossy conversion used for reporting.
    fn as_f64(&self) -> f64;

    /// Best-effort conversion from a float; exact for rationals (dyadic value).
    fn from_f64(v: f64) -> Self;

    fn two() -> Self {
        Self::from_i64(2)
    }

    fn half() -> Self {
        Self::from_ratio(1, 2)
    }
}

/// Scalars that support real powers, logarithms and square roots.
pub trait Real: Scalar + num_traits::Float + FloatConst + Copy {}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl Scalar for f32 {
    fn from_i64(v: i64) -> Self {
        v as f32
    }
    fn as_f64(&self) -> f64 {
        *self as f64
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for Rational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn from_f64(v: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(v).expect("finite float")
    }
}

impl Real for f64 {}
impl Real for f32 {}

/// Sum of squares of a slice.
pub fn norm_sq<S: Scalar>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |acc, x| acc + x.clone() * x.clone())
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Relative residual `|lhs - rhs| / max(|lhs|, |rhs|, floor)`.
pub fn rel_residual(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs()).max(1e-30);
    (lhs - rhs).abs() / scale
}

pub fn is_zero<S: Scalar>(v: &S) -> bool {
    v.is_zero()
}

pub fn one<S: Scalar>() -> S {
    S::one()
}
