use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the probe, emergence and diagnosis math.
///
/// Implemented for `f32` and `f64`. Hidden states are stored as `f32`; the
/// pipeline runs its arithmetic in `f64` through the aliases at the crate root.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Conversion from a stored `f32` entry.
    fn widen(v: f32) -> Self;

    /// Conversion from an `f64` constant.
    fn c(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn widen(v: f32) -> Self {
        v
    }

    #[inline]
    fn c(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn widen(v: f32) -> Self {
        v as f64
    }

    #[inline]
    fn c(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Derives an independent 64-bit seed from a base seed and a stream index
/// (SplitMix64 finalizer over the combined words).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
