use crate::error::{Error, Result};
use crate::types::EmbeddingVector;

const LANES: usize = 16;

/// Dot product over 16 independent f32 accumulators (auto-vectorizes),
/// reduced in f64.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f32; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..LANES {
            acc[i] += x[i] * y[i];
        }
    }
    let mut sum: f64 = acc.iter().map(|v| f64::from(*v)).sum();
    for (x, y) in ra.iter().zip(rb) {
        sum += f64::from(x * y);
    }
    sum
}

#[inline]
pub fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Squared norm, rejecting values that cannot appear in a cosine denominator.
pub(crate) fn checked_sq_norm(a: &[f32]) -> Result<f64> {
    let n = dot(a, a);
    if n > 0.0 && n.is_finite() {
        Ok(n)
    } else {
        Err(Error::ZeroVector)
    }
}

/// Cosine from a dot product and squared norms, clamped to [-1, 1].
/// `sqrt(x * x) == x` exactly in IEEE arithmetic, so `cos(v, v)` is exactly 1.
#[inline]
pub(crate) fn cosine_from_parts(dot: f64, sq_norm_a: f64, sq_norm_b: f64) -> f64 {
    (dot / (sq_norm_a * sq_norm_b).sqrt()).clamp(-1.0, 1.0)
}

/// `S = (a . b) / (|a| |b|)`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    cosine_slices(a.values(), b.values())
}

pub fn cosine_slices(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (checked_sq_norm(a)?, checked_sq_norm(b)?);
    Ok(cosine_from_parts(dot(a, b), na, nb))
}
