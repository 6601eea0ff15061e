//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// `Display`/`FromStr` are required so that persisted draws round-trip
/// through CSV without loss (both std impls print the shortest exact repr).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + FromStr
    + Default
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `ln(2π)`.
    #[inline]
    fn ln_two_pi() -> Self {
        Self::lit(1.837_877_066_409_345_5)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Log-density of `N(mean, sd²)` at `x`.
#[inline]
pub fn normal_logpdf<T: Real>(x: T, mean: T, sd: T) -> T {
    let z = (x - mean) / sd;
    -T::lit(0.5) * (T::ln_two_pi() + z * z) - sd.ln()
}

/// Standard normal CDF.
pub fn normal_cdf<T: Real>(z: T) -> T {
    let z = z.to_f64_lossy();
    T::lit(0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2))
}

/// Inverse of the standard normal CDF, for `p` in `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p)
}
