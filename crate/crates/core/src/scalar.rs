//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All geometry, projection and fitting code is written against [`Scalar`]
//! so the same algorithms run in `f32` or `f64`. Tolerances are expressed
//! through the trait because a threshold that is sensible for `f64`
//! (for example a `1e-9` symmetry check) is below `f32` resolution.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and sampled values.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Relative tolerance for accepting a matrix as symmetric.
    fn symmetry_tol() -> Self;

    /// Condition number at or above which densities are refused.
    fn max_condition() -> Self;

    /// Residual below which a Gram-Schmidt step is treated as degenerate.
    fn degenerate_tol() -> Self;
}

impl Scalar for f64 {
    fn lit(x: f64) -> Self {
        x
    }
    fn to_f64_lossy(self) -> f64 {
        self
    }
    fn symmetry_tol() -> Self {
        1e-9
    }
    fn max_condition() -> Self {
        1e12
    }
    fn degenerate_tol() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
    fn symmetry_tol() -> Self {
        1e-4
    }
    fn max_condition() -> Self {
        1e6
    }
    fn degenerate_tol() -> Self {
        1e-5
    }
}
