//! Real scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable as the real part of matrix entries.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Relative constant used for numerical rank decisions.
    const RANK_EPS: f64;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const RANK_EPS: f64 = 1e-12;
}

impl Real for f32 {
    const RANK_EPS: f64 = 1e-5;
}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn czero<T: Real>() -> C<T> {
    C::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn cone<T: Real>() -> C<T> {
    C::new(T::one(), T::zero())
}

#[inline]
pub(crate) fn creal<T: Real>(x: T) -> C<T> {
    C::new(x, T::zero())
}

/// Default relative rank tolerance: `max(rows, cols) * RANK_EPS`.
pub fn default_rank_tol<T: Real>(rows: usize, cols: usize) -> T {
    T::lit(rows.max(cols).max(1) as f64 * T::RANK_EPS)
}

/// Absolute tolerance for Hermiticity and PSD validation: `1e-10` in double precision, looser
/// in single precision.
pub fn check_tol<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
}
