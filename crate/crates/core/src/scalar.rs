//! Generic scalar type used throughout the engine.
//!
//! All timing, rate, probability, and model arithmetic is written against
//! [`Scalar`] so the same code runs at `f32` or `f64`. The crate root exports
//! `f64` aliases for the common types; `f64` is what the CLI and the report
//! writers use.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into the scalar type.
    ///
    /// Panics if the value is not representable, which cannot happen for the
    /// finite literals this crate feeds it.
    #[inline]
    fn cast(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable in scalar type")
    }

    /// Widens the scalar to `f64` (exact for both supported types).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cast_round_trips_for_both_widths() {
        assert_eq!(f64::cast(0.125), 0.125);
        assert_eq!(f32::cast(0.125), 0.125f32);
        assert_eq!(0.125f32.as_f64(), 0.125);
    }
}
