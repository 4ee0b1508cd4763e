//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumCast
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }

    /// `ln(1e-300)`: the floor applied to log-densities.
    #[inline]
    fn log_floor() -> Self {
        Self::lit(LOG_DENSITY_FLOOR)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumCast
        + Default
        + Debug
        + Display
        + Sum
        + Send
        + Sync
        + 'static
{
}

/// Natural log of the smallest density kept before taking logs.
pub const LOG_DENSITY_FLOOR: f64 = -690.775_527_898_213_7;

/// `ln(max(density, 1e-300))` expressed on an already-logged density.
#[inline]
pub fn floor_log<T: Real>(log_density: T) -> T {
    if log_density.is_nan() {
        return T::log_floor();
    }
    log_density.max(T::log_floor())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_matches_ln_of_1e_300() {
        assert!((LOG_DENSITY_FLOOR - 1e-300f64.ln()).abs() < 1e-9);
        assert_eq!(floor_log(f64::NEG_INFINITY), LOG_DENSITY_FLOOR);
        assert_eq!(floor_log(-1.0f32), -1.0f32);
        assert!(floor_log(f32::NEG_INFINITY).is_finite());
    }
}
