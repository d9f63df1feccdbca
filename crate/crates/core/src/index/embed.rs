use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Bucket count of the trigram hashing embedder.
pub const HASH_DIM: usize = 256;

/// Identifier recorded in index files built with [`HashEmbedder`].
pub const HASH_EMBEDDER_ID: &str = "hash-trigram-256-v1";

const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("vector contains non-finite values")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("vector is not unit length (norm {0})")]
    NotNormalized(f64),
    #[error("embedding backend failed: {0}")]
    Backend(#[source] Box<dyn std::error::Error + Send + Sync>),
}

/// L2-normalized embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct EmbeddingVector<T: Scalar> {
    values: Vec<T>,
}

fn l2_norm<T: Scalar>(values: &[T]) -> f64 {
    values.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt()
}

impl<T: Scalar> EmbeddingVector<T> {
    /// Normalizes `values` to unit length. Rejects empty, zero and non-finite input.
    pub fn normalize(values: Vec<T>) -> Result<Self, EmbedError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = l2_norm(&values);
        if values.is_empty() || norm == 0.0 {
            return Err(EmbedError::ZeroVector);
        }
        let values = values
            .into_iter()
            .map(|v| T::from_f64_lossy(v.as_f64() / norm))
            .collect();
        Ok(Self { values })
    }

    /// Wraps values that are already unit length (within 1e-6).
    pub fn from_unit(values: Vec<T>) -> Result<Self, EmbedError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = l2_norm(&values);
        if values.is_empty() || norm == 0.0 {
            return Err(EmbedError::ZeroVector);
        }
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(EmbedError::NotNormalized(norm));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for EmbeddingVector<T> {
    type Error = EmbedError;

    fn try_from(values: Vec<T>) -> Result<Self, Self::Error> {
        Self::from_unit(values)
    }
}

impl<T: Scalar> From<EmbeddingVector<T>> for Vec<T> {
    fn from(v: EmbeddingVector<T>) -> Self {
        v.values
    }
}

/// Cosine similarity of two raw vectors: `dot(a, b) / (|a| |b|)`, clamped to [-1, 1].
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimMismatch { expected: a.len(), got: b.len() });
    }
    // accumulate in f64 so f32 storage does not reorder near-ties
    let (mut dot, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.as_f64(), y.as_f64());
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    let sim = (dot / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0);
    Ok(T::from_f64_lossy(sim))
}

/// Something that turns title or query text into an embedding.
pub trait Embedder<T: Scalar>: Send + Sync {
    /// Stable name, persisted in index files.
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError>;
}

/// Deterministic offline embedder: character trigrams hashed into 256 buckets.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashEmbedder;

impl<T: Scalar> Embedder<T> for HashEmbedder {
    fn id(&self) -> &str {
        HASH_EMBEDDER_ID
    }

    fn dim(&self) -> usize {
        HASH_DIM
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        hash_embed(text)
    }
}

// FNV-1a, 64 bit. Stable across platforms and processes, unlike std's SipHash keys.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Lowercases, collapses whitespace runs and pads with one space on each side.
fn normalize_text(text: &str) -> Option<String> {
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    if words.is_empty() {
        return None;
    }
    Some(format!(" {} ", words.join(" ")))
}

/// Bucket counts of the character trigrams of `text`.
pub fn trigram_counts(text: &str) -> Option<[u32; HASH_DIM]> {
    let padded = normalize_text(text)?;
    let chars: Vec<char> = padded.chars().collect();
    let mut counts = [0u32; HASH_DIM];
    let mut buf = [0u8; 12];
    for window in chars.windows(3) {
        let mut len = 0;
        for c in window {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        counts[(fnv1a(&buf[..len]) % HASH_DIM as u64) as usize] += 1;
    }
    Some(counts)
}

/// Deterministic trigram-hash embedding, L2-normalized, dimension 256.
pub fn hash_embed<T: Scalar>(text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
    let counts = trigram_counts(text).ok_or(EmbedError::EmptyText)?;
    EmbeddingVector::normalize(counts.iter().map(|&c| T::from_count(c as usize)).collect())
}
