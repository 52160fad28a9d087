use std::fmt;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the analytics kernels are generic over: `f32` or `f64`.
///
/// Everything numeric in this crate (distances, metrics, weighted means, the
/// regression kernel) is written against this trait; concrete `f64` aliases
/// live at the crate root.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn from_f64_const(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    fn from_usize_const(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Feet in one Earth radius; fixes the planar-projection scale.
pub const EARTH_RADIUS_FEET: f64 = 20_902_231.0;

/// Meters per statute mile, used at every ingestion boundary.
pub const METERS_PER_MILE: f64 = 1_609.344;

/// Feet per statute mile.
pub const FEET_PER_MILE: f64 = 5_280.0;

#[cfg(test)]
mod tests {
    use super::*;

    fn generic_mean<T: Scalar>(values: &[T]) -> T {
        let sum = values.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / T::from_usize_const(values.len())
    }

    #[test]
    fn mean_works_for_both_scalar_types() {
        assert_eq!(generic_mean(&[1.0f32, 2.0, 3.0]), 2.0f32);
        assert_eq!(generic_mean(&[1.0f64, 2.0, 3.0]), 2.0f64);
    }

    #[test]
    fn mile_constants_are_consistent() {
        assert!((METERS_PER_MILE / 0.3048 - FEET_PER_MILE).abs() < 1e-9);
    }
}
