//! Floating-point abstraction shared by the numeric modules.
//!
//! The DSP front end, embedding search and the logistic model are written once
//! against [`Scalar`] and instantiated for `f32` and `f64`. Everything that is
//! persisted or crosses a process boundary (bank files, event logs, model files)
//! is pinned to `f64` through the aliases in the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

mod private {
    pub trait Sealed {}
    impl Sealed for f32 {}
    impl Sealed for f64 {}
}

/// A real floating-point type usable throughout the crate.
///
/// Sealed; implemented for `f32` and `f64` only.
pub trait Scalar:
    private::Sealed
    + Float
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
    + Serialize
    + DeserializeOwned
    + rustfft::FftNum
    + 'static
{
    /// Converts an `f64` literal. Never fails for the implemented types.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    /// Converts a count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("finite conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Arithmetic mean; zero for an empty slice.
pub fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    xs.iter().copied().sum::<T>() / T::of_usize(xs.len())
}

/// Population standard deviation (divides by `n`); zero for fewer than two values.
pub fn population_std<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::of_usize(xs.len());
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_small_sample() {
        let xs = [0.1_f64, 0.3, 0.5];
        assert!((mean(&xs) - 0.3).abs() < 1e-15);
        let expected = ((0.04 + 0.0 + 0.04) / 3.0_f64).sqrt();
        assert!((population_std(&xs) - expected).abs() < 1e-15);
        assert_eq!(population_std(&[2.0_f32]), 0.0);
        assert_eq!(mean::<f32>(&[]), 0.0);
    }

    #[test]
    fn literal_conversion() {
        assert_eq!(<f32 as Scalar>::of(0.5), 0.5_f32);
        assert_eq!(<f64 as Scalar>::of_usize(7), 7.0);
        assert_eq!(Scalar::as_f64(0.25_f32), 0.25);
    }
}
