use std::fmt;

use nalgebra::RealField;
use num_traits::ToPrimitive;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the numerical core is generic over (`f32` or `f64`).
pub trait Real: RealField + Copy + ToPrimitive + Serialize + DeserializeOwned + fmt::LowerExp + Default {
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A tolerance of `x`, widened to what the type can actually resolve.
    #[inline]
    fn tol(x: f64) -> Self {
        let eps = Self::default_epsilon().as_f64();
        Self::lit(x.max(1e3 * eps))
    }
}

impl Real for f32 {}
impl Real for f64 {}
