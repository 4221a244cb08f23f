use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the probes and the decoder compute in: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f32_lossless(value: f32) -> Self;

    /// Conversion used for literals and counts. Panics only if `value`
    /// is not representable, which cannot happen for `f32`/`f64`.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal not representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn from_f32_lossless(value: f32) -> Self {
        value
    }
}

impl Scalar for f64 {
    fn from_f32_lossless(value: f32) -> Self {
        f64::from(value)
    }
}
