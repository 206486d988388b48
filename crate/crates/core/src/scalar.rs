//! Scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::FftNum;

/// Floating-point type the design and filtering paths are generic over.
///
/// Implemented for `f32` and `f64`. The design path is only validated at
/// `f64`; `f32` is intended for the streaming engine.
pub trait Real:
    Float + FloatConst + FromPrimitive + FftNum + Sum + Default + Display + LowerExp + Debug
{
    /// Lossless-enough conversion from an `f64` constant.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_index(i: usize) -> Self {
        <Self as FromPrimitive>::from_usize(i).expect("index representable")
    }

    #[inline]
    fn from_int(i: i64) -> Self {
        <Self as FromPrimitive>::from_i64(i).expect("integer representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    pub(crate) fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> T {
        self.sum + self.carry
    }
}

/// `10·log10(x)` with a -400 dB floor for zero energies.
pub fn power_db<T: Real>(x: T) -> f64 {
    let x = x.as_f64();
    if x <= 0.0 {
        DB_FLOOR
    } else {
        (10.0 * x.log10()).max(DB_FLOOR)
    }
}

/// `20·log10(|x|)` with the same floor.
pub fn magnitude_db<T: Real>(x: T) -> f64 {
    power_db(x * x)
}

/// Reported level for an exactly zero response.
pub const DB_FLOOR: f64 = -400.0;
