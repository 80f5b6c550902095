//! Floating point abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real scalar the solvers are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + Display + Debug + Sum + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal is representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for `T::lit`.
#[inline]
pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::lit(x)
}

/// Wraps `x` into `[0, length)`.
#[inline]
pub(crate) fn wrap<T: Scalar>(x: T, length: T) -> T {
    let r = x - (x / length).floor() * length;
    // rounding can land exactly on `length`
    if r >= length {
        r - length
    } else {
        r
    }
}

/// Smallest signed representative of `d` modulo `length`, in `[-length/2, length/2)`.
#[inline]
pub(crate) fn periodic_delta<T: Scalar>(d: T, length: T) -> T {
    let half = length * lit(0.5);
    wrap(d + half, length) - half
}
