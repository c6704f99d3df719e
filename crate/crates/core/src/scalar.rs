//! Scalar abstraction: the numerical kernels are generic over the floating
//! point type, concrete `f64` aliases live at the crate root.

use std::fmt::{Debug, Display, LowerExp};

/// Floating point scalar usable by every kernel in this crate.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Conversion from `f64` literals (tolerances, table constants).
    fn of(x: f64) -> Self {
        num_traits::FromPrimitive::from_f64(x).expect("f64 conversion")
    }

    fn of_usize(n: usize) -> Self {
        num_traits::FromPrimitive::from_usize(n).expect("usize conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("f64 conversion")
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
