//! Sentence embeddings for action similarity.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::llm::{LlmEndpointConfig, LlmError, RetryingPoster};

pub const DEFAULT_HASH_DIM: usize = 512;

pub trait Embedder: Send + Sync {
    /// Unit-norm embedding of `text`.
    fn embed(&self, text: &str) -> Result<Vec<f64>, EvalError>;
    fn name(&self) -> String;
}

/// Lowercased, whitespace-collapsed, trimmed.
pub fn canonical_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Offline provider: signed feature hashing of character 3-grams.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dim: DEFAULT_HASH_DIM }
    }
}

impl Embedder for HashingEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, EvalError> {
        let text = canonical_text(text);
        if text.is_empty() {
            return Err(EvalError::Precondition("cannot embed empty text".into()));
        }
        let chars: Vec<char> = text.chars().collect();
        let mut v = vec![0.0; self.dim];
        let mut add = |gram: &[char]| {
            let s: String = gram.iter().collect();
            let h = fnv1a(s.as_bytes());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        };
        if chars.len() < 3 {
            add(&chars);
        } else {
            chars.windows(3).for_each(&mut add);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Every gram cancelled against a colliding one.
            v[(fnv1a(text.as_bytes()) % self.dim as u64) as usize] = 1.0;
            return Ok(v);
        }
        Ok(v.into_iter().map(|x| x / norm).collect())
    }

    fn name(&self) -> String {
        format!("hashing-3gram-{}", self.dim)
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// OpenAI-compatible `/embeddings` provider.
pub struct RemoteEmbedder {
    poster: RetryingPoster,
}

impl RemoteEmbedder {
    pub fn new(cfg: LlmEndpointConfig) -> Result<Self, EvalError> {
        Ok(RemoteEmbedder {
            poster: RetryingPoster::new(cfg)?,
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, EvalError> {
        if text.trim().is_empty() {
            return Err(EvalError::Precondition("cannot embed empty text".into()));
        }
        let body = EmbeddingRequest {
            model: &self.poster.config().model_name,
            input: text,
        };
        let raw = self.poster.post("/embeddings", &body)?;
        let parsed: EmbeddingResponse = serde_json::from_str(&raw)
            .map_err(|e| LlmError::Protocol(format!("unexpected embeddings response: {e}")))?;
        let v = parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| LlmError::Protocol("embeddings response has no data".into()))?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(LlmError::Protocol("embedding has zero or non-finite norm".into()).into());
        }
        Ok(v.into_iter().map(|x| x / norm).collect())
    }

    fn name(&self) -> String {
        format!("remote:{}", self.poster.config().model_name)
    }
}

/// `dot(u, v) / (|u| |v|)`, clamped to [-1, 1].
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, EvalError> {
    if u.len() != v.len() {
        return Err(EvalError::Precondition(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|x| x * x).sum();
    let nv: f64 = v.iter().map(|x| x * x).sum();
    if nu == 0.0 || nv == 0.0 {
        return Err(EvalError::Precondition("cosine similarity of a zero vector".into()));
    }
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashing_is_deterministic_and_canonical() {
        let e = HashingEmbedder::default();
        assert_eq!(e.embed("wash hands").unwrap(), e.embed("wash hands").unwrap());
        assert_eq!(e.embed("abc").unwrap(), e.embed("abc ").unwrap());
        assert_eq!(e.embed("Wash  Hands").unwrap(), e.embed("wash hands").unwrap());
        for t in ["a", "ab", "abc", "make a sandwich at the dining table"] {
            let n = e.embed(t).unwrap().iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
        assert!(e.embed("   ").is_err());
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[0.6, 0.8], &[0.6, 0.8]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[1.0, 2.0], &[-1.0, -2.0]).unwrap(), -1.0);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn similar_sentences_score_higher() {
        let e = HashingEmbedder::default();
        let a = e.embed("wash the dishes in the sink").unwrap();
        let b = e.embed("wash hands at the sink").unwrap();
        let c = e.embed("turn on the tv").unwrap();
        assert!(cosine_similarity(&a, &b).unwrap() > cosine_similarity(&a, &c).unwrap());
    }
}
