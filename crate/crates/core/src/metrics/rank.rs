//! Cross-candidate rank aggregation over several metrics.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{MetricError, MetricSpec};
use crate::scalar::{count, Scalar};

/// Per-(candidate, metric) aggregate scores. Row-major: one row per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix<F> {
    candidates: Vec<String>,
    metrics: Vec<MetricSpec>,
    cells: Vec<Vec<F>>,
}

impl<F: Scalar> ScoreMatrix<F> {
    pub fn new(
        candidates: Vec<String>,
        metrics: Vec<MetricSpec>,
        cells: Vec<Vec<F>>,
    ) -> Result<Self, MetricError> {
        if candidates.is_empty() || metrics.is_empty() {
            return Err(MetricError::EmptyMatrix);
        }
        if cells.len() != candidates.len() || cells.iter().any(|row| row.len() != metrics.len()) {
            return Err(MetricError::Ragged);
        }
        if cells.iter().flatten().any(|x| !x.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        Ok(Self {
            candidates,
            metrics,
            cells,
        })
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn metrics(&self) -> &[MetricSpec] {
        &self.metrics
    }

    pub fn cell(&self, candidate: usize, metric: usize) -> F {
        self.cells[candidate][metric]
    }

    pub fn column(&self, metric: usize) -> Vec<F> {
        self.cells.iter().map(|row| row[metric]).collect()
    }
}

/// Fractional ranks (1 = best) for one column; ties share the mean of
/// their positions.
pub fn fractional_ranks<F: Scalar>(scores: &[F], higher_is_better: bool) -> Vec<F> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![F::zero(); scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let mean = count::<F>(start + 1 + end) / count::<F>(2);
        for &idx in &order[start..end] {
            ranks[idx] = mean;
        }
        start = end;
    }
    ranks
}

/// Per-candidate mean rank across all metric columns (lower is better).
pub fn rank_aggregate<F: Scalar>(m: &ScoreMatrix<F>) -> Vec<F> {
    let n_candidates = m.candidates.len();
    let mut totals = vec![F::zero(); n_candidates];
    for (j, spec) in m.metrics.iter().enumerate() {
        let ranks = fractional_ranks(&m.column(j), spec.higher_is_better);
        for (t, r) in totals.iter_mut().zip(ranks) {
            *t = *t + r;
        }
    }
    let k = count::<F>(m.metrics.len());
    totals.into_iter().map(|t| t / k).collect()
}

/// Index of the best (lowest) average rank. Ties go to the later index, which
/// callers arrange to be the more recent candidate.
pub fn best_by_rank<F: Scalar>(avg_ranks: &[F]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in avg_ranks.iter().enumerate() {
        match best {
            Some(b) if avg_ranks[b] < *r => {}
            _ => best = Some(i),
        }
    }
    best
}
