use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar type the analysis is generic over.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// `2π`.
#[inline]
pub fn two_pi<T: Scalar>() -> T {
    T::PI() + T::PI()
}

/// Hz to rad/s.
#[inline]
pub fn hz_to_rad<T: Scalar>(f: T) -> T {
    two_pi::<T>() * f
}

/// Relative difference `|a - b| / max(|b|, tiny)`.
#[inline]
pub fn rel_diff<T: Scalar>(a: T, b: T) -> T {
    (a - b).abs() / b.abs().max(T::min_positive_value())
}
