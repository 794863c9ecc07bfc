//! Scalar abstractions.
//!
//! Every numerical routine in the crate is written against [`Real`] (the
//! floating-point type) and [`Field`] (real or complex matrix entries), so
//! `f32` and `f64` share one implementation. On-disk formats are always
//! float64; conversions go through [`Real::from_f64`] / [`Real::to_f64`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Entry type of a dense matrix: either a real float or a complex number over one.
pub trait Field:
    Copy + NumAssign + std::ops::Neg<Output = Self> + Debug + Send + Sync + 'static
{
    type Real: Real;

    /// Squared modulus.
    fn abs2(self) -> Self::Real;
    fn modulus(self) -> Self::Real {
        self.abs2().sqrt()
    }
    fn conj(self) -> Self;
    fn from_real(r: Self::Real) -> Self;
    fn real(self) -> Self::Real;
    fn imag(self) -> Self::Real;
    fn finite(self) -> bool;
    /// Scale by a real factor.
    fn scale(self, s: Self::Real) -> Self;
}

/// Floating-point scalar used throughout the crate.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Display
    + Field<Real = Self>
{
    /// Machine epsilon as the concrete type.
    fn eps() -> Self {
        <Self as Float>::epsilon()
    }

    /// Lossless for f64, rounding for f32.
    fn c(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("representable constant")
    }

    fn from_usize_(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("representable count")
    }

    fn to_f64_(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

macro_rules! impl_real {
    ($($t:ty),*) => {$(
        impl Field for $t {
            type Real = $t;
            #[inline]
            fn abs2(self) -> $t { self * self }
            #[inline]
            fn modulus(self) -> $t { self.abs() }
            #[inline]
            fn conj(self) -> $t { self }
            #[inline]
            fn from_real(r: $t) -> $t { r }
            #[inline]
            fn real(self) -> $t { self }
            #[inline]
            fn imag(self) -> $t { 0.0 }
            #[inline]
            fn finite(self) -> bool { self.is_finite() }
            #[inline]
            fn scale(self, s: $t) -> $t { self * s }
        }

        impl Real for $t {}
    )*};
}

impl_real!(f32, f64);

impl<T: Real> Field for Complex<T> {
    type Real = T;
    #[inline]
    fn abs2(self) -> T {
        self.norm_sqr()
    }
    #[inline]
    fn modulus(self) -> T {
        self.norm()
    }
    #[inline]
    fn conj(self) -> Self {
        Complex::conj(&self)
    }
    #[inline]
    fn from_real(r: T) -> Self {
        Complex::new(r, T::zero())
    }
    #[inline]
    fn real(self) -> T {
        self.re
    }
    #[inline]
    fn imag(self) -> T {
        self.im
    }
    #[inline]
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    #[inline]
    fn scale(self, s: T) -> Self {
        Complex::new(self.re * s, self.im * s)
    }
}

/// Complex number over a [`Real`].
pub type C<T> = Complex<T>;
