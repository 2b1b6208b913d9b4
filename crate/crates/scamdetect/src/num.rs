//! Scalar abstraction for the numeric half of the crate.
//!
//! Feature matrices, classifiers, and metrics are generic over the float
//! type. `f64` is what the CLI and the crate-root aliases use; `f32` is
//! available where memory matters more than precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Floating point scalar usable by the feature and model code.
pub trait Scalar:
    Float + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn into_f64(self) -> f64;

    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> f32 {
        v as f32
    }

    fn into_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> f64 {
        v
    }

    fn into_f64(self) -> f64 {
        self
    }
}
