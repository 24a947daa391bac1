//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the metric, integrator and optimizers are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted throughout the
/// documentation assume `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Lossy conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `|x|^p`, defined as zero at `x = 0` for positive `p`.
    #[inline]
    fn abs_pow(self, p: Self) -> Self {
        let a = self.abs();
        if a == Self::zero() {
            Self::zero()
        } else {
            a.powf(p)
        }
    }

    /// Sign with `sgn(0) = 0`.
    #[inline]
    fn sgn(self) -> Self {
        if self > Self::zero() {
            Self::one()
        } else if self < Self::zero() {
            -Self::one()
        } else {
            Self::zero()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub(crate) fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

pub(crate) fn max_abs<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_pow_at_zero() {
        assert_eq!(0.0f64.abs_pow(1.5), 0.0);
        assert_eq!((-0.25f64).abs_pow(0.5), 0.5);
        assert_eq!(0.0f32.abs_pow(0.5), 0.0);
    }

    #[test]
    fn sgn_values() {
        assert_eq!(2.0f64.sgn(), 1.0);
        assert_eq!((-2.0f64).sgn(), -1.0);
        assert_eq!(0.0f64.sgn(), 0.0);
    }
}
