//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar used by the operator library, the integrator and
/// the symbolic protocol engine. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Amplitudes below this magnitude are pruned from symbolic kets.
    fn prune_threshold() -> Self;
    /// Deviation allowed when checking unitarity or Hermiticity of inputs.
    fn structure_tol() -> Self;
    /// Default bound on trace drift and negative eigenvalues during evolution.
    fn guard_tol() -> Self;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn prune_threshold() -> Self {
        1e-14
    }
    fn structure_tol() -> Self {
        1e-12
    }
    fn guard_tol() -> Self {
        1e-8
    }
}

impl Real for f32 {
    fn prune_threshold() -> Self {
        1e-6
    }
    fn structure_tol() -> Self {
        1e-5
    }
    fn guard_tol() -> Self {
        1e-3
    }
}

/// Complex number over a [`Real`] scalar.
pub type C<T> = Complex<T>;

#[inline]
pub fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn imag_unit<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::one())
}

/// ln(n!) summed exactly for small n; used for Fock-coherent overlaps.
pub fn ln_factorial<T: Real>(n: usize) -> T {
    (2..=n).map(|k| T::from_usize_lossy(k).ln()).sum()
}
