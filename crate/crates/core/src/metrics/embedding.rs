//! Sentence embeddings and within-bin semantic divergence.

use thiserror::Error;

use crate::error::{Error, Result};
use crate::trace::InteractionEvent;

use super::text::tokens;

#[derive(Debug, Error)]
#[error("{0}")]
pub struct ProviderError(pub String);

/// Maps utterances to unit-norm vectors of a fixed dimension.
///
/// Implementations must be deterministic and callable from several threads at
/// once. Texts that cannot be embedded (empty, no tokens) come back as the
/// zero vector and are skipped by [`divergence`].
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f64>>, ProviderError>;
}

/// Bag-of-hashed-tokens embedding: each token adds ±1 to one coordinate
/// chosen by a seeded FNV-1a hash, and the sum is L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedEmbedding {
    dimension: usize,
    seed: u64,
}

pub const MIN_HASHED_DIMENSION: usize = 8;

pub fn hashed_embedding_provider(dimension: usize, seed: u64) -> Result<HashedEmbedding> {
    if dimension < MIN_HASHED_DIMENSION {
        return Err(Error::invalid(format!(
            "hashed embedding dimension {dimension} below minimum {MIN_HASHED_DIMENSION}"
        )));
    }
    Ok(HashedEmbedding { dimension, seed })
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

impl HashedEmbedding {
    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for tok in tokens(text) {
            let h = fnv1a(self.seed, tok.as_bytes());
            let idx = (h % self.dimension as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[idx] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl EmbeddingProvider for HashedEmbedding {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine distance between unit vectors mapped onto [0, 1] as `(1 − cos) / 2`.
pub fn unit_cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    ((1.0 - dot(a, b)) / 2.0).clamp(0.0, 1.0)
}

/// Mean pairwise cosine distance over the bin's embeddable utterances.
/// `None` when fewer than two utterances embed to a non-zero vector.
pub fn divergence(
    bin: &[InteractionEvent],
    provider: &dyn EmbeddingProvider,
) -> std::result::Result<Option<f64>, ProviderError> {
    let texts: Vec<&str> = bin
        .iter()
        .map(|e| e.text.as_str())
        .filter(|t| !t.trim().is_empty())
        .collect();
    if texts.len() < 2 {
        return Ok(None);
    }
    let vectors = provider.embed(&texts)?;
    if vectors.len() != texts.len() {
        return Err(ProviderError(format!(
            "expected {} embeddings, got {}",
            texts.len(),
            vectors.len()
        )));
    }
    let usable: Vec<&Vec<f64>> = vectors
        .iter()
        .filter(|v| v.iter().any(|x| *x != 0.0))
        .collect();
    if usable.len() < 2 {
        return Ok(None);
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, a) in usable.iter().enumerate() {
        for b in &usable[i + 1..] {
            total += unit_cosine_distance(a, b);
            pairs += 1;
        }
    }
    Ok(Some(total / pairs as f64))
}
