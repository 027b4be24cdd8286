//! Scalar abstraction for the numeric kernels.
//!
//! All core math (channel model, device updates, losses, benchmark solver)
//! is written against [`Scalar`] so the same code runs at `f32` or `f64`.
//! The simulation harness itself is instantiated at `f64`; see the aliases
//! at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar the numeric kernels are generic over.
pub trait Scalar:
    Float + NumAssignOps + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from configuration space (configs are parsed as `f64`).
    fn of(v: f64) -> Self;

    fn to_f64(self) -> f64;

    /// One standard normal draw. Kept on the trait so callers need no
    /// distribution bounds of their own.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}
