//! Scalar abstraction for the numerical kernels.
//!
//! Everything in this crate is written against [`Real`], a thin alias over
//! the `num-traits` float machinery, so the same code runs at `f32` or `f64`
//! precision. The concrete aliases exported from the crate root fix `f64`,
//! which is what the file formats and the command-line front end use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar underlying phase-space coordinates, field values
/// and integration state.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal into this scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
