//! Retrieval-grounded spoken news dialogue with emotion-conditioned speech,
//! and the statistics used to compare two system variants.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the service.

pub mod audio;
pub mod backends;
pub mod evalkit;
pub mod index;
pub mod pipeline;
pub mod scalar;
pub mod sentiment;

pub use scalar::Scalar;

/// Stored vectors are `f32`.
pub type NewsIndex = index::Index<f32>;
pub type Embedding = index::EmbeddingVector<f32>;
pub type Retrieval = index::RetrievalResult<f32>;
pub type Distribution = sentiment::EmotionDistribution<f64>;

/// Statistics run in `f64`.
pub type MannWhitney = evalkit::MannWhitneyResult<f64>;
pub type FiveNumber = evalkit::FiveNumberSummary<f64>;
pub type Report = evalkit::ComparisonReport<f64>;
