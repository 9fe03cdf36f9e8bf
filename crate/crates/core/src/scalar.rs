//! Scalar abstraction shared by every numeric module.
//!
//! All geometry, covariance and Fisher-information code is written against
//! [`Real`], which is implemented for `f32` and `f64`. The complex linear
//! algebra underneath is nalgebra's, so anything that is a `RealField` and
//! `Copy` works.

use nalgebra::{Complex, RealField};
use num_traits::FromPrimitive;

pub trait Real: RealField + Copy + FromPrimitive {
    /// Lossy conversion from an `f64` literal or input value.
    #[inline]
    fn of(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Value as `f64` for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        nalgebra::try_convert(self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn cplx(re: Self, im: Self) -> Complex<Self> {
        Complex::new(re, im)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^{j·phase}`.
#[inline]
pub fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

#[inline]
pub fn deg<T: Real>(degrees: T) -> T {
    degrees * T::pi() / T::of(180.0)
}

#[inline]
pub fn to_deg<T: Real>(radians: T) -> T {
    radians * T::of(180.0) / T::pi()
}
