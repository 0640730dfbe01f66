use std::collections::HashMap;

use super::text::{answer_tokens, normalize_answer, normalize_choice};
use super::{MetricError, PrecisionRecallF};
use crate::scalar::Scalar;

/// 1 when the normalized prediction equals any normalized reference.
pub fn exact_match<F: Scalar, S: AsRef<str>>(pred: &str, refs: &[S]) -> Result<F, MetricError> {
    if refs.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let p = normalize_answer(pred);
    let hit = refs.iter().any(|r| normalize_answer(r.as_ref()) == p);
    Ok(if hit { F::one() } else { F::zero() })
}

/// Bag-of-tokens F1 over normalized answer tokens.
pub fn token_f1<F: Scalar>(pred: &str, reference: &str) -> PrecisionRecallF<F> {
    let p = answer_tokens(pred);
    let r = answer_tokens(reference);
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in &r {
        *ref_counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut common = 0;
    for t in &p {
        if let Some(c) = ref_counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    PrecisionRecallF::from_counts(common, p.len(), r.len())
}

/// Multiple-choice accuracy.
///
/// A prediction is correct when it matches a reference after choice
/// normalization, or when its first token equals a single-letter reference
/// (the gold option label, e.g. `"b"` for `"B. Aspirin"`).
pub fn accuracy<F: Scalar, S: AsRef<str>>(pred: &str, refs: &[S]) -> Result<F, MetricError> {
    if refs.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let normalized = normalize_choice(pred);
    let first = normalized.split(' ').next().unwrap_or("");
    let hit = refs.iter().any(|r| {
        let r = normalize_choice(r.as_ref());
        r == normalized || (r.chars().count() == 1 && r == first)
    });
    Ok(if hit { F::one() } else { F::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_examples() {
        assert_eq!(exact_match::<f64, _>("Paris", &["paris"]).unwrap(), 1.0);
        assert_eq!(exact_match::<f64, _>("the Paris", &["paris"]).unwrap(), 1.0);
        assert_eq!(exact_match::<f64, _>("London", &["paris"]).unwrap(), 0.0);
        assert_eq!(exact_match::<f64, _>("London", &["paris", "london."]).unwrap(), 1.0);
    }

    #[test]
    fn exact_match_requires_refs() {
        let none: [&str; 0] = [];
        assert!(matches!(exact_match::<f64, _>("x", &none), Err(MetricError::NoReferences)));
    }

    #[test]
    fn token_f1_examples() {
        let s: PrecisionRecallF<f64> = token_f1("black cat", "cat");
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 1.0);
        assert!((s.f - 2.0 / 3.0).abs() < 1e-15);
        let s: PrecisionRecallF<f64> = token_f1("the cat", "cat");
        assert_eq!(s.f, 1.0);
        let s: PrecisionRecallF<f64> = token_f1("big red dog", "big red dog");
        assert_eq!(s.f, 1.0);
    }

    #[test]
    fn token_f1_multiset() {
        let s: PrecisionRecallF<f64> = token_f1("cat cat cat", "cat dog");
        assert_eq!(s.precision, 1.0 / 3.0);
        assert_eq!(s.recall, 0.5);
    }

    #[test]
    fn accuracy_by_label_or_text() {
        assert_eq!(accuracy::<f64, _>("B. Aspirin", &["B", "Aspirin"]).unwrap(), 1.0);
        assert_eq!(accuracy::<f64, _>("aspirin", &["B", "Aspirin"]).unwrap(), 1.0);
        assert_eq!(accuracy::<f64, _>("C", &["B", "Aspirin"]).unwrap(), 0.0);
        assert_eq!(accuracy::<f64, _>("A) the liver", &["A"]).unwrap(), 1.0);
    }
}
