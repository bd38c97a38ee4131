//! Floating-point abstraction for the numeric core.
//!
//! Every solver, matrix, and estimator in this crate is generic over
//! [`Scalar`] so the same code runs in `f32` or `f64`. Concrete `f64`
//! aliases for the main pipeline types live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Field element for all numeric computation.
///
/// A thin bundle of the standard float traits plus infallible conversion
/// to and from `f64`. Randomness is always drawn in `f64` and converted,
/// which keeps seeded streams identical across precisions; serialization
/// likewise goes through `f64`.
pub trait Scalar: Float + NumAssign + Sum + Debug + Display + Send + Sync + 'static {
    /// Converts from `f64`, rounding to the nearest representable value.
    fn from_f64(v: f64) -> Self;

    /// Widens (or passes through) to `f64`.
    fn into_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn into_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn into_f64(self) -> f64 {
        self as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Scalar>(v: f64) -> f64 {
        T::from_f64(v).into_f64()
    }

    #[test]
    fn f64_roundtrip_is_exact() {
        for v in [0.0, 1.0, -2.5, 1e-12, 6.02214076e23] {
            assert_eq!(roundtrip::<f64>(v), v);
        }
    }

    #[test]
    fn f32_roundtrip_rounds() {
        assert_eq!(roundtrip::<f32>(1.5), 1.5);
        let narrowed = roundtrip::<f32>(0.1);
        assert!((narrowed - 0.1).abs() < 1e-7);
    }
}
