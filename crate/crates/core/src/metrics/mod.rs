//! Reference-based metrics and multi-metric rank aggregation.
//!
//! Every function here is pure. Numeric results are generic over
//! [`Scalar`]; ratios of counts are computed with a single division so
//! hand-checkable values (e.g. 0.8, 0.75) come out exact.

mod qa;
mod rank;
mod rouge;
mod text;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{count, Scalar};

pub use qa::{accuracy, exact_match, token_f1};
pub use rank::{best_by_rank, fractional_ranks, rank_aggregate, ScoreMatrix};
pub use rouge::{lcs_len, rouge_l, rouge_n};
pub use text::{answer_tokens, normalize_answer, normalize_choice, tokenize};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("at least one reference is required")]
    NoReferences,
    #[error("cannot aggregate an empty score list")]
    EmptyAggregate,
    #[error("score matrix needs at least one candidate and one metric")]
    EmptyMatrix,
    #[error("score matrix is not rectangular")]
    Ragged,
    #[error("score matrix contains a non-finite value")]
    NonFinite,
    #[error("metric `{0}` is scored by an external adapter")]
    RequiresAdapter(String),
    #[error("unknown metric `{0}`")]
    Unknown(String),
}

/// Precision, recall and F-measure, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallF<F> {
    pub precision: F,
    pub recall: F,
    pub f: F,
}

impl<F: Scalar> PrecisionRecallF<F> {
    pub fn zero() -> Self {
        Self {
            precision: F::zero(),
            recall: F::zero(),
            f: F::zero(),
        }
    }

    /// From a match count and the two denominators; `0/0` is 0.
    ///
    /// F is `2·m / (|pred| + |ref|)`, algebraically equal to the harmonic
    /// mean of precision and recall but with one rounding step.
    pub fn from_counts(matches: usize, pred_total: usize, ref_total: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                F::zero()
            } else {
                count::<F>(num) / count::<F>(den)
            }
        };
        let f = if matches == 0 {
            F::zero()
        } else {
            count::<F>(2 * matches) / count::<F>(pred_total + ref_total)
        };
        Self {
            precision: ratio(matches, pred_total),
            recall: ratio(matches, ref_total),
            f,
        }
    }

    pub fn from_ratios(precision: F, recall: F) -> Self {
        let sum = precision + recall;
        let f = if sum == F::zero() {
            F::zero()
        } else {
            (precision + precision) * recall / sum
        };
        Self {
            precision,
            recall,
            f,
        }
    }
}

/// Which computation a metric uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricKind {
    RougeN { n: usize },
    RougeL,
    ExactMatch,
    TokenF1,
    Accuracy,
    /// Scored by an HTTP adapter. `against_input` compares the prediction to
    /// the example input (faithfulness-style metrics) instead of references.
    External {
        endpoint: String,
        #[serde(default)]
        against_input: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricRole {
    #[default]
    Primary,
    Secondary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: MetricKind,
    #[serde(default = "default_true")]
    pub higher_is_better: bool,
    #[serde(default)]
    pub role: MetricRole,
}

fn default_true() -> bool {
    true
}

impl MetricSpec {
    pub fn new(id: impl Into<String>, kind: MetricKind) -> Self {
        Self {
            id: id.into(),
            kind,
            higher_is_better: true,
            role: MetricRole::Primary,
        }
    }

    pub fn rouge_n(n: usize) -> Self {
        Self::new(format!("rouge{n}"), MetricKind::RougeN { n })
    }

    pub fn rouge_l() -> Self {
        Self::new("rougeL", MetricKind::RougeL)
    }

    #[cfg(test)]
    pub(crate) fn builtin_rouge_l(id: String) -> Self {
        Self::new(id, MetricKind::RougeL)
    }

    pub fn with_role(mut self, role: MetricRole) -> Self {
        self.role = role;
        self
    }

    pub fn is_external(&self) -> bool {
        matches!(self.kind, MetricKind::External { .. })
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Parses `rouge1`, `rouge2`, `rougeL`, `exact-match`, `token-f1`,
/// `accuracy`, or `name=URL` for an external adapter (`name@input=URL`
/// scores against the example input).
impl FromStr for MetricSpec {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((name, url)) = s.split_once('=') {
            let (name, against_input) = match name.strip_suffix("@input") {
                Some(n) => (n, true),
                None => (name, false),
            };
            if name.is_empty() || url.is_empty() {
                return Err(MetricError::Unknown(s.to_owned()));
            }
            return Ok(Self::new(
                name,
                MetricKind::External {
                    endpoint: url.to_owned(),
                    against_input,
                },
            ));
        }
        match s {
            "rougeL" | "rouge-l" | "rougel" => Ok(Self::rouge_l()),
            "exact-match" | "em" => Ok(Self::new("exact-match", MetricKind::ExactMatch)),
            "token-f1" | "f1" => Ok(Self::new("token-f1", MetricKind::TokenF1)),
            "accuracy" => Ok(Self::new("accuracy", MetricKind::Accuracy)),
            _ => s
                .strip_prefix("rouge")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .map(Self::rouge_n)
                .ok_or_else(|| MetricError::Unknown(s.to_owned())),
        }
    }
}

/// Arithmetic mean.
pub fn aggregate<F: Scalar>(per_example: &[F]) -> Result<F, MetricError> {
    if per_example.is_empty() {
        return Err(MetricError::EmptyAggregate);
    }
    let sum = per_example.iter().fold(F::zero(), |acc, &x| acc + x);
    Ok(sum / count::<F>(per_example.len()))
}

fn max_over<F: Scalar>(refs: &[String], mut score: impl FnMut(&str) -> F) -> Result<F, MetricError> {
    if refs.is_empty() {
        return Err(MetricError::NoReferences);
    }
    Ok(refs
        .iter()
        .map(|r| score(r))
        .fold(F::zero(), |a, b| if b > a { b } else { a }))
}

/// Scores one prediction with a built-in metric; multiple references take
/// the best match.
pub fn score_builtin<F: Scalar>(
    spec: &MetricSpec,
    prediction: &str,
    references: &[String],
) -> Result<F, MetricError> {
    match &spec.kind {
        MetricKind::RougeN { n } => {
            let p = tokenize(prediction);
            let mut err = None;
            let best = max_over(references, |r| {
                match rouge_n::<F, _>(&p, &tokenize(r), *n) {
                    Ok(s) => s.f,
                    Err(e) => {
                        err = Some(e);
                        F::zero()
                    }
                }
            })?;
            match err {
                Some(e) => Err(e),
                None => Ok(best),
            }
        }
        MetricKind::RougeL => {
            let p = tokenize(prediction);
            max_over(references, |r| rouge_l::<F, _>(&p, &tokenize(r)).f)
        }
        MetricKind::ExactMatch => exact_match(prediction, references),
        MetricKind::TokenF1 => max_over(references, |r| token_f1::<F>(prediction, r).f),
        MetricKind::Accuracy => accuracy(prediction, references),
        MetricKind::External { .. } => Err(MetricError::RequiresAdapter(spec.id.clone())),
    }
}
