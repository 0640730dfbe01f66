//! Diversity statistics over explored prompts.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{rouge_l, tokenize};
use crate::selection::{cosine, EmbeddingProvider, SelectionError};

#[derive(Debug, Error)]
pub enum DiversityError {
    #[error("diversity needs at least 2 prompts, got {0}")]
    TooFew(usize),
    #[error(transparent)]
    Embedding(#[from] SelectionError),
    #[error("cannot write diversity csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityStats {
    pub prompt_count: usize,
    pub len_mean: f64,
    /// Population standard deviation.
    pub len_std: f64,
    pub vocab: usize,
    #[serde(rename = "rougeL_mean")]
    pub rouge_l_mean: f64,
    pub cosine_mean: f64,
}

pub fn diversity_report<S: AsRef<str>>(
    prompts: &[S],
    embedder: &dyn EmbeddingProvider,
) -> Result<DiversityStats, DiversityError> {
    let n = prompts.len();
    if n < 2 {
        return Err(DiversityError::TooFew(n));
    }
    let tokens: Vec<Vec<String>> = prompts.iter().map(|p| tokenize(p.as_ref())).collect();
    let lens: Vec<f64> = tokens.iter().map(|t| t.len() as f64).collect();
    let len_mean = lens.iter().sum::<f64>() / n as f64;
    let len_std = (lens.iter().map(|l| (l - len_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let vocab = tokens.iter().flatten().collect::<HashSet<_>>().len();
    let vectors = prompts
        .iter()
        .map(|p| embedder.embed(p.as_ref()).map_err(SelectionError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let (mut rouge_sum, mut cos_sum) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            rouge_sum += rouge_l::<f64, _>(&tokens[i], &tokens[j]).f;
            cos_sum += cosine(&vectors[i], &vectors[j])?;
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(DiversityStats {
        prompt_count: n,
        len_mean,
        len_std,
        vocab,
        rouge_l_mean: rouge_sum / pairs,
        cosine_mean: cos_sum / pairs,
    })
}

/// Columns: prompt_count, len_mean, len_std, vocab, rougeL_mean, cosine_mean.
pub fn write_diversity_csv(path: &Path, stats: &DiversityStats) -> Result<(), DiversityError> {
    let mut w = csv::Writer::from_path(path)?;
    w.serialize(stats)?;
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::HashedNgramEmbedder;

    #[test]
    fn identical_pair() {
        let s = diversity_report(&["a b", "a b"], &HashedNgramEmbedder::default()).unwrap();
        assert_eq!(s.rouge_l_mean, 1.0);
        assert_eq!(s.vocab, 2);
        assert_eq!((s.len_mean, s.len_std), (2.0, 0.0));
        assert!((s.cosine_mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_pair() {
        let s = diversity_report(&["alpha beta", "gamma delta"], &HashedNgramEmbedder::default()).unwrap();
        assert_eq!(s.rouge_l_mean, 0.0);
        assert_eq!(s.vocab, 4);
    }

    #[test]
    fn permutation_invariant() {
        let e = HashedNgramEmbedder::default();
        let a = diversity_report(&["one two", "two three four", "five"], &e).unwrap();
        let b = diversity_report(&["five", "one two", "two three four"], &e).unwrap();
        assert!((a.rouge_l_mean - b.rouge_l_mean).abs() < 1e-12);
        assert!((a.cosine_mean - b.cosine_mean).abs() < 1e-12);
        assert_eq!((a.vocab, a.len_mean), (b.vocab, b.len_mean));
    }

    #[test]
    fn too_few() {
        assert!(matches!(
            diversity_report(&["x"], &HashedNgramEmbedder::default()),
            Err(DiversityError::TooFew(1))
        ));
    }

    #[test]
    fn csv_header() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("diversity.csv");
        let s = diversity_report(&["a b", "a c"], &HashedNgramEmbedder::default()).unwrap();
        write_diversity_csv(&p, &s).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("prompt_count,len_mean,len_std,vocab,rougeL_mean,cosine_mean\n2,2.0,0.0,3,0.5,"));
    }
}
