//! Numeric traits the belief, rating and clustering math is written against.
//!
//! [`Scalar`] is the minimum needed for normalisation and Bayes updates, so it
//! is implemented for exact rationals as well as floats. [`Real`] adds the
//! transcendental functions required by entropies, ELO expectation and
//! distance computations.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num};

/// A field-like number type usable as a probability.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Absolute slack allowed when checking that a distribution sums to one.
    fn normalization_tolerance() -> Self;

    /// Lossy conversion used for reporting.
    fn to_f64(self) -> f64;

    fn abs_diff(self, other: Self) -> Self {
        if self >= other {
            self - other
        } else {
            other - self
        }
    }
}

/// Floating-point scalar.
pub trait Real: Scalar + Float + FromPrimitive {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in every Real")
    }
}

impl<T: Scalar + Float + FromPrimitive> Real for T {}

impl Scalar for f64 {
    fn normalization_tolerance() -> Self {
        1e-9
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    // f32 cannot hold 1e-9 of slack around 1.0.
    fn normalization_tolerance() -> Self {
        1e-5
    }

    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for Ratio<i64> {
    fn normalization_tolerance() -> Self {
        Ratio::from_integer(0)
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

impl Scalar for Ratio<i128> {
    fn normalization_tolerance() -> Self {
        Ratio::from_integer(0)
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}
