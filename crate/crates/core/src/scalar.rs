//! Scalar abstraction for the numeric core.
//!
//! Everything under `math`, `kinematics`, `retarget`, `reward`, `augment`,
//! `nn` and the visual-policy numerics is generic over [`Real`], so the same
//! code runs at f32 or f64 precision. The rest of the crate fixes the scalar
//! through the aliases exported from the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the numeric core.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + serde::Serialize
    + serde::de::DeserializeOwned
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn c<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("constant not representable")
}

/// Lossy conversion back to `f64`, for reporting and serialization.
#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().expect("scalar not representable as f64")
}
