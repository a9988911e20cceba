//! Scalar abstraction for the numerical kernels.
//!
//! All core math is generic over [`Scalar`], which bundles the floating-point
//! traits from `num-traits` with the FFT requirements of `rustfft` and the
//! serde bounds needed by the configuration and report types. `f32` and `f64`
//! are the two implementors; concrete type aliases live at the crate root.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
///
/// Serde bounds are left to the individual container types so that the
/// derived impls stay unambiguous.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum<Self>
    + fmt::Display
    + fmt::LowerExp
    + Default
{
    /// Relative tolerance on the imaginary residue discarded after an
    /// inverse transform of a real field. 1e-10 in f64; wider types scale
    /// with the machine epsilon.
    fn imag_residue_tol() -> Self {
        let floor = cast::<Self>(1e-10);
        let eps_based = cast::<Self>(1e3) * Self::epsilon();
        if eps_based > floor {
            eps_based
        } else {
            floor
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for pulling literal constants into generic code.
///
/// Panics only if `x` is not representable, which cannot happen for the
/// finite literals used in this crate.
#[inline]
pub fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}
