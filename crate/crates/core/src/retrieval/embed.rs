use serde::{Deserialize, Serialize};

use crate::backend::BackendError;
use crate::hashing::StableHasher;

/// Maps a prompt to a unit-norm vector of fixed dimension.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<f32>, BackendError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<Vec<f32>, BackendError> {
        (**self).embed(text)
    }
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
        (**self).embed_batch(texts)
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<Vec<f32>, BackendError> {
        (**self).embed(text)
    }
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
        (**self).embed_batch(texts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Synthetic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    /// Ignored for remote embedders, whose dimension is whatever the endpoint returns.
    pub dimension: usize,
    pub seed: u64,
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        Self { kind: EmbedderKind::Synthetic, dimension: 64, seed: 0 }
    }
}

/// Deterministic feature-hashing embedder over word unigrams and bigrams.
///
/// Each shingle is hashed (with the seed) to one coordinate and a sign;
/// unigrams add ±1 and bigrams ±0.5. Prompts sharing vocabulary land close
/// together, unrelated prompts are near-orthogonal up to hash collisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self, BackendError> {
        if dim < 2 {
            return Err(BackendError::InvalidInput(format!("embedding dimension must be >= 2, got {dim}")));
        }
        Ok(Self { dim, seed })
    }

    fn add(&self, v: &mut [f64], shingle: &str, weight: f64) {
        let h = StableHasher::new(self.seed).str(shingle).finish();
        let idx = (h % self.dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[idx] += sign * weight;
    }
}

pub(crate) fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::InvalidInput("cannot embed an empty prompt".into()));
        }
        let words = words(text);
        let mut v = vec![0.0f64; self.dim];
        for w in &words {
            self.add(&mut v, w, 1.0);
        }
        for pair in words.windows(2) {
            self.add(&mut v, &format!("{} {}", pair[0], pair[1]), 0.5);
        }
        if v.iter().all(|x| *x == 0.0) {
            // no alphanumeric tokens, or collisions cancelled exactly
            let h = StableHasher::new(self.seed).str("fallback").str(text).finish();
            v[(h % self.dim as u64) as usize] = 1.0;
        }
        normalize(&v).ok_or_else(|| BackendError::Protocol("embedding has zero norm".into()))
    }
}

/// L2-normalizes into `f32`, or `None` for a zero or non-finite vector.
pub fn normalize(v: &[f64]) -> Option<Vec<f32>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    Some(v.iter().map(|x| (x / norm) as f32).collect())
}

pub fn norm(v: &[f32]) -> f64 {
    v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
}
