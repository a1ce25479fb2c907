//! Floating point abstraction shared by every numeric routine in the crate.
//!
//! Everything numeric is written once against [`Scalar`] and instantiated for
//! `f64` (default, used for the physics and for gradient checks) and `f32`
//! (used for full-size model training where the classification weight matrix
//! alone has 335M entries).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// floating point: f32 or f64
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Infallible for finite inputs on both impls.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn as_f32(self) -> f32 {
        self.to_f32().expect("scalar converts to f32")
    }

    #[inline]
    fn from_f32_bits(v: f32) -> Self {
        Self::from_f32(v).expect("f32 representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
