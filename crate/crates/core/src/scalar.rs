//! Scalar abstraction shared by every numeric module.
//!
//! All physics is written against [`Real`], which is implemented for `f32`
//! and `f64`. Tolerances quoted throughout the crate assume `f64`.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating-point scalar usable by the simulator.
pub trait Real:
    RealField + FftNum + Copy + FromPrimitive + ToPrimitive + Display + LowerExp + Debug + Default
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Machine epsilon of the scalar type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

/// Unnormalized cardinal sine, `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc<T: Real>(x: T) -> T {
    if x.abs() < lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / lit(6.0) + x2 * x2 / lit(120.0)
    } else {
        x.sin() / x
    }
}

/// `(1 - cos x)/x`, the companion of [`sinc`] with value 0 at `x = 0`.
pub(crate) fn versinc<T: Real>(x: T) -> T {
    let half = x / lit(2.0);
    half.sin() * sinc(half)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase<T: Real>(phi: T) -> T {
    let two_pi = T::two_pi();
    let mut w = phi - two_pi * (phi / two_pi).round();
    if w <= -T::pi() {
        w += two_pi;
    } else if w > T::pi() {
        w -= two_pi;
    }
    w
}
