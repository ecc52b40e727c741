//! Scalar abstraction for the numeric parts of the crate.
//!
//! The transport solver only needs ordered field arithmetic, so it runs on
//! `f32`, `f64` and exact rationals alike. Embedding geometry additionally
//! needs square roots and is restricted to [`FloatScalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};

/// Ordered field element usable by the transport solver and edit ratios.
pub trait Scalar:
    Num + NumAssign + Copy + PartialOrd + Debug + Display + FromPrimitive + ToPrimitive + Sum + Send + Sync + 'static
{
    /// Threshold under which a reduced cost or residual mass counts as zero.
    fn pivot_tolerance() -> Self;

    /// Allowed mismatch between total source and sink mass.
    fn mass_tolerance() -> Self;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }

    fn abs_diff(self, other: Self) -> Self {
        if self > other {
            self - other
        } else {
            other - self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn pivot_tolerance() -> Self {
        1e-12
    }
    fn mass_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn pivot_tolerance() -> Self {
        1e-6
    }
    fn mass_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for Ratio<i64> {
    fn pivot_tolerance() -> Self {
        Ratio::from_integer(0)
    }
    fn mass_tolerance() -> Self {
        Ratio::from_integer(0)
    }
}

impl Scalar for Ratio<i128> {
    fn pivot_tolerance() -> Self {
        Ratio::from_integer(0)
    }
    fn mass_tolerance() -> Self {
        Ratio::from_integer(0)
    }
}

/// Floating point scalar: `f32` or `f64`.
pub trait FloatScalar: Scalar + Float {
    /// Tolerance for the unit-norm check on embeddings.
    fn norm_tolerance() -> Self;
}

impl FloatScalar for f64 {
    fn norm_tolerance() -> Self {
        1e-6
    }
}

impl FloatScalar for f32 {
    fn norm_tolerance() -> Self {
        1e-5
    }
}
