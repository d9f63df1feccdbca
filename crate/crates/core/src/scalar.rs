//! Scalar abstraction shared by the numeric modules.
//!
//! Embeddings, similarity scores, emotion distributions and the evaluation
//! statistics are all written against [`Scalar`], so the same code runs in
//! `f32` (compact index storage) and `f64` (statistics).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Short dtype name, stored in persisted index headers.
    const DTYPE: &'static str;

    /// Lossless for `f32`/`f64` inputs that fit the target type.
    fn from_f64_lossy(v: f64) -> Self;

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize always converts to a float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float always converts to f64")
    }
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    fn from_f64_lossy(v: f64) -> Self {
        v
    }
}

/// Total order on scalars for sorting; NaN sorts last.
pub(crate) fn total_cmp<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.as_f64().total_cmp(&b.as_f64())
}
