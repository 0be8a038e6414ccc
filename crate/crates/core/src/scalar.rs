//! Scalar abstraction for the numeric core.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the toolkit is generic over: `f32` or `f64`.
pub trait Real: Copy + nalgebra::RealField + FromPrimitive + ToPrimitive {}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for pulling an `f64` literal into the generic scalar type.
#[inline]
pub(crate) fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}
