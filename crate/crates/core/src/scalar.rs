//! Scalar abstraction for all numeric code in this crate.
//!
//! Every matrix, loss and optimizer is generic over [`Scalar`], so the same
//! code runs in `f32` or `f64`. The crate-root alias [`crate::Real`] pins the
//! default precision (`f64`) used by the CLI and the test suites.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar used throughout the numeric core.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal into this scalar type.
    fn cast(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("f64 literal not representable")
    }

    /// Widen to `f64` for reporting and tolerance arithmetic.
    fn widen(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar not representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_literals() {
        assert_eq!(<f64 as Scalar>::cast(0.25), 0.25);
        assert_eq!(<f32 as Scalar>::cast(0.25), 0.25f32);
        assert_eq!(Scalar::widen(0.5f32), 0.5);
    }
}
