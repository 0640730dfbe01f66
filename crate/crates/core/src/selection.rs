//! Few-shot example retrieval by embedding cosine similarity.

use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use crate::gateway::post_json;
use crate::gateway::ProviderError;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("vectors differ in dimension ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("cannot retrieve {requested} examples from a pool of {available}")]
    PoolTooSmall { requested: usize, available: usize },
    #[error("embedding provider failed: {0}")]
    Provider(#[from] ProviderError),
}

pub fn cosine<F: Scalar>(u: &[F], v: &[F]) -> Result<F, SelectionError> {
    if u.len() != v.len() {
        return Err(SelectionError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (F::zero(), F::zero(), F::zero());
    for (&a, &b) in u.iter().zip(v) {
        dot = dot + a * b;
        nu = nu + a * a;
        nv = nv + b * b;
    }
    if nu == F::zero() || nv == F::zero() {
        return Err(SelectionError::ZeroVector);
    }
    let c = dot / (nu.sqrt() * nv.sqrt());
    Ok(c.max(-F::one()).min(F::one()))
}

/// Text in, fixed-length vector out.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

/// Lexical stand-in for a neural encoder: counts of hashed character
/// trigrams of the lowercased text padded with `^` and `$`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNgramEmbedder {
    dim: usize,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self { dim: 256 }
    }
}

impl HashedNgramEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, text: &str) -> Vec<f64> {
        let chars: Vec<char> = std::iter::once('^')
            .chain(text.to_lowercase().chars())
            .chain(std::iter::once('$'))
            .collect();
        let mut v = vec![0.0; self.dim];
        let mut buf = [0u8; 12];
        if chars.len() < 3 {
            let s: String = chars.iter().collect();
            v[(fnv1a(s.as_bytes()) % self.dim as u64) as usize] += 1.0;
            return v;
        }
        for w in chars.windows(3) {
            let mut n = 0;
            for c in w {
                n += c.encode_utf8(&mut buf[n..]).len();
            }
            v[(fnv1a(&buf[..n]) % self.dim as u64) as usize] += 1.0;
        }
        v
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl EmbeddingProvider for HashedNgramEmbedder {
    fn id(&self) -> &str {
        "hashed-char3"
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        Ok(self.vector(text))
    }
}

/// Remote encoder speaking the OpenAI `/embeddings` shape.
pub struct HttpEmbedder {
    url: String,
    model: String,
    auth_env: Option<String>,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(url: impl Into<String>, model: impl Into<String>, auth_env: Option<String>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            auth_env,
            agent: crate::gateway::http::http_agent(timeout),
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn id(&self) -> &str {
        &self.model
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let token = match &self.auth_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| ProviderError::Auth(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let body = json!({"model": self.model, "input": text});
        let value = post_json(&self.agent, &self.url, token.as_deref(), &body)?;
        value
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .ok_or_else(|| ProviderError::Malformed("response has no data[0].embedding".into()))
    }
}

/// Precomputed embeddings of a retrieval pool.
pub struct IclIndex {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl IclIndex {
    /// Embeds `pool` as `(id, text)` pairs.
    pub fn build<S: AsRef<str>>(
        pool: &[(S, S)],
        embedder: &dyn EmbeddingProvider,
    ) -> Result<Self, SelectionError> {
        let mut ids = Vec::with_capacity(pool.len());
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(pool.len());
        for (id, text) in pool {
            let v = embedder.embed(text.as_ref())?;
            if let Some(first) = vectors.first() {
                if first.len() != v.len() {
                    return Err(SelectionError::DimensionMismatch(first.len(), v.len()));
                }
            }
            if v.iter().all(|x| *x == 0.0) {
                return Err(SelectionError::ZeroVector);
            }
            ids.push(id.as_ref().to_owned());
            vectors.push(v);
        }
        Ok(Self { ids, vectors })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    /// Pool positions of the `m` nearest members, most similar first; ties
    /// keep pool order.
    pub fn nearest(&self, query: &[f64], m: usize) -> Result<Vec<usize>, SelectionError> {
        self.nearest_excluding(query, m, None)
    }

    pub fn nearest_excluding(
        &self,
        query: &[f64],
        m: usize,
        exclude: Option<&str>,
    ) -> Result<Vec<usize>, SelectionError> {
        let candidates: Vec<usize> = (0..self.len())
            .filter(|&i| exclude != Some(self.ids[i].as_str()))
            .collect();
        if m > candidates.len() {
            return Err(SelectionError::PoolTooSmall {
                requested: m,
                available: candidates.len(),
            });
        }
        let mut scored = Vec::with_capacity(candidates.len());
        for i in candidates {
            scored.push((i, cosine(query, &self.vectors[i])?));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(scored.into_iter().take(m).map(|(i, _)| i).collect())
    }

    pub fn retrieve(
        &self,
        query: &str,
        m: usize,
        embedder: &dyn EmbeddingProvider,
    ) -> Result<Vec<usize>, SelectionError> {
        self.nearest(&embedder.embed(query)?, m)
    }

    /// Like [`Self::retrieve`] but never returns the pool member `self_id`.
    pub fn retrieve_excluding(
        &self,
        query: &str,
        m: usize,
        self_id: &str,
        embedder: &dyn EmbeddingProvider,
    ) -> Result<Vec<usize>, SelectionError> {
        self.nearest_excluding(&embedder.embed(query)?, m, Some(self_id))
    }
}
