use std::collections::HashMap;
use std::hash::Hash;

use super::{MetricError, PrecisionRecallF};
use crate::scalar::Scalar;

fn ngram_counts<K: Eq + Hash>(tokens: &[K], n: usize) -> HashMap<&[K], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped n-gram counts.
pub fn rouge_n<F: Scalar, K: Eq + Hash>(
    pred: &[K],
    reference: &[K],
    n: usize,
) -> Result<PrecisionRecallF<F>, MetricError> {
    if n == 0 {
        return Err(MetricError::InvalidOrder);
    }
    let pred_counts = ngram_counts(pred, n);
    let ref_counts = ngram_counts(reference, n);
    let matches: usize = pred_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let pred_total = pred.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    Ok(PrecisionRecallF::from_counts(matches, pred_total, ref_total))
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<K: Eq>(a: &[K], b: &[K]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            row[j + 1] = if x == y {
                prev[j] + 1
            } else {
                row[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// Sentence-level ROUGE-L.
pub fn rouge_l<F: Scalar, K: Eq>(pred: &[K], reference: &[K]) -> PrecisionRecallF<F> {
    let lcs = lcs_len(pred, reference);
    PrecisionRecallF::from_counts(lcs, pred.len(), reference.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn unigram_hand_count() {
        let s: PrecisionRecallF<f64> = rouge_n(&toks("the cat sat"), &toks("the cat"), 1).unwrap();
        assert_eq!(s.precision, 2.0 / 3.0);
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.f, 0.8);
    }

    #[test]
    fn bigram_hand_count() {
        let s: PrecisionRecallF<f64> = rouge_n(&toks("a b c"), &toks("a b d"), 2).unwrap();
        assert_eq!((s.precision, s.recall, s.f), (0.5, 0.5, 0.5));
    }

    #[test]
    fn identity_scores_one() {
        let x = toks("one two three four");
        for n in 1..=4 {
            let s: PrecisionRecallF<f64> = rouge_n(&x, &x, n).unwrap();
            assert_eq!((s.precision, s.recall, s.f), (1.0, 1.0, 1.0));
        }
        let l: PrecisionRecallF<f32> = rouge_l(&x, &x);
        assert_eq!(l.f, 1.0);
    }

    #[test]
    fn zero_order_rejected() {
        assert!(rouge_n::<f64, _>(&toks("a"), &toks("a"), 0).is_err());
    }

    #[test]
    fn clipping() {
        let s: PrecisionRecallF<f64> = rouge_n(&toks("a a a"), &toks("a"), 1).unwrap();
        assert_eq!(s.precision, 1.0 / 3.0);
        assert_eq!(s.recall, 1.0);
    }

    #[test]
    fn lcs_transposition() {
        let s: PrecisionRecallF<f64> = rouge_l(&toks("a b c d"), &toks("a c b d"));
        assert_eq!(lcs_len(&toks("a b c d"), &toks("a c b d")), 3);
        assert_eq!((s.precision, s.recall, s.f), (0.75, 0.75, 0.75));
    }

    #[test]
    fn empty_prediction() {
        let s: PrecisionRecallF<f64> = rouge_l(&toks(""), &toks("a"));
        assert_eq!((s.precision, s.recall, s.f), (0.0, 0.0, 0.0));
        let s: PrecisionRecallF<f64> = rouge_n(&toks(""), &toks("a"), 1).unwrap();
        assert_eq!(s.f, 0.0);
    }
}
