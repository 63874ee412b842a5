use crate::error::{Error, Result};
use crate::types::EmbeddingVector;

use super::Embedder;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Hashed bag-of-words: each token's FNV-1a hash picks one of `dim`
/// buckets, counts are L2-normalized. Identical input always maps to the
/// identical vector.
#[derive(Debug, Clone)]
pub struct DeterministicEmbedder {
    dim: usize,
}

impl DeterministicEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedder dim must be positive".into()));
        }
        Ok(DeterministicEmbedder { dim })
    }
}

impl Embedder for DeterministicEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn model_name(&self) -> &str {
        "hashed-bow"
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut tokens = tokenize(trimmed);
        if tokens.is_empty() {
            // punctuation-only input still gets a unit vector
            tokens.push(trimmed.to_lowercase());
        }
        let mut counts = vec![0f64; self.dim];
        for t in &tokens {
            counts[(fnv1a64(t.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        EmbeddingVector::new(counts.iter().map(|c| (c / norm) as f32).collect())
    }
}
