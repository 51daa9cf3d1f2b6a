//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! The simulator is written against [`Real`], which bundles the `num-traits`
//! floating-point vocabulary with the field traits `faer` needs for its dense
//! and sparse factorizations. `f64` is the working precision for the physics
//! pipeline; `f32` is supported for the closed-form layers.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Complex number over a real scalar.
pub type Complex<T> = num_complex::Complex<T>;

/// Real scalar type usable throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + faer::traits::RealField
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    /// Converts a count or index into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("representable count")
    }

    /// Lossy conversion back to `f64`, used for diagnostics and I/O.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Angular frequency `2π·f` for a cyclic frequency `f`.
    #[inline]
    fn two_pi() -> Self {
        Self::lit(2.0) * Self::PI()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for a complex number with zero imaginary part.
#[inline]
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// The imaginary unit.
#[inline]
pub fn imag_unit<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

#[inline]
pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}
