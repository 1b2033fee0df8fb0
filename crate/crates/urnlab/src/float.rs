use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::float::FloatConst;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type for the analysis side of the crate (trajectories, curves,
/// actions, transforms). Implemented for `f32` and `f64`; public type
/// defaults pick `f64`.
///
/// Simulation and exact dynamic programming are deliberately *not* generic:
/// coin flips and probability mass are always carried in `f64` so that
/// histories and distributions are reproducible independent of what scalar
/// the caller uses for analysis.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Convert from `f64`, rounding if the target is narrower.
    fn cast(v: f64) -> Self {
        Self::from_f64(v).expect("every finite f64 converts")
    }

    /// Convert from an integer-valued count.
    fn cast_u64(v: u64) -> Self {
        Self::from_u64(v).expect("count converts to float")
    }

    fn cast_usize(v: usize) -> Self {
        Self::from_usize(v).expect("index converts to float")
    }

    /// Widen (or pass through) to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("real scalar widens to f64")
    }

    fn half() -> Self {
        Self::cast(0.5)
    }

    fn two() -> Self {
        Self::cast(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}
