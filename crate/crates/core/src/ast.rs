//! Suffix tuning: keep a tuned prompt frozen and optimize a short postscript
//! against the average rank over several metrics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineError, OptimizationConfig, RunHeader, RunMode, RunOutcome, RunRecord};
use crate::metrics::{best_by_rank, rank_aggregate, ScoreMatrix};

pub const DEFAULT_SEED_SUFFIX: &str = "Every word of your summary must be faithful to the input/conversation";

/// One dev-evaluated suffix and its standing in the final pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffixCandidate {
    pub candidate_id: u64,
    pub suffix: String,
    /// Main prompt, newline, suffix.
    pub composed: String,
    pub metric_ids: Vec<String>,
    pub aggregates: Vec<f64>,
    pub avg_rank: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AstOutcome {
    pub best: SuffixCandidate,
    /// Dev-evaluated candidates in id order, ranked against each other.
    pub pool: Vec<SuffixCandidate>,
    pub run: RunOutcome,
}

fn require_metrics(config: &OptimizationConfig) -> Result<(), EngineError> {
    if config.effective_metrics().len() < 2 {
        return Err(EngineError::Config(
            "suffix tuning ranks across at least two metrics; with one metric run plain optimize instead".into(),
        ));
    }
    Ok(())
}

/// Header for a suffix-tuning run; `p_star` is frozen and `sigma0` seeds the
/// search.
pub fn suffix_header(engine: &Engine<'_>, config: OptimizationConfig, p_star: &str, sigma0: &str) -> RunHeader {
    RunHeader::new(RunMode::SuffixTune, config, sigma0, Some(p_star), engine.data())
}

/// Header for tuning the concatenated prompt with no freeze.
pub fn full_tune_header(engine: &Engine<'_>, config: OptimizationConfig, p_star: &str, sigma0: &str) -> RunHeader {
    RunHeader::new(RunMode::FullTune, config, sigma0, Some(p_star), engine.data())
}

/// Optimizes a suffix appended to the frozen `p_star`, resuming `dir` when it
/// already holds the same run.
pub fn tune_suffix(
    engine: &Engine<'_>,
    config: OptimizationConfig,
    p_star: &str,
    sigma0: &str,
    dir: &Path,
) -> Result<AstOutcome, EngineError> {
    require_metrics(&config)?;
    let header = suffix_header(engine, config, p_star, sigma0);
    let run = engine.resume_or_start(header, dir)?;
    outcome(run)
}

/// The same ranked search, but the optimizer may rewrite the whole composed
/// prompt.
pub fn full_tune_baseline(
    engine: &Engine<'_>,
    config: OptimizationConfig,
    p_star: &str,
    sigma0: &str,
    dir: &Path,
) -> Result<AstOutcome, EngineError> {
    require_metrics(&config)?;
    let header = full_tune_header(engine, config, p_star, sigma0);
    let run = engine.resume_or_start(header, dir)?;
    outcome(run)
}

/// Re-ranks the persisted dev pool of a ranked run.
pub fn ranked_pool(record: &RunRecord) -> Result<Vec<SuffixCandidate>, EngineError> {
    let mut devs: Vec<_> = record.dev_evals.iter().collect();
    devs.sort_by_key(|d| d.candidate_id);
    if devs.is_empty() {
        return Ok(Vec::new());
    }
    let metrics = record.header.config.effective_metrics();
    let m = ScoreMatrix::new(
        devs.iter().map(|d| d.candidate_id.to_string()).collect(),
        metrics,
        devs.iter().map(|d| d.evaluation.aggregates.clone()).collect(),
    )?;
    let ranks = rank_aggregate(&m);
    devs.iter()
        .zip(ranks)
        .map(|(d, avg_rank)| {
            let c = record
                .candidates
                .get(d.candidate_id as usize)
                .ok_or_else(|| EngineError::Integrity(format!("dev eval for unknown candidate {}", d.candidate_id)))?;
            Ok(SuffixCandidate {
                candidate_id: c.id,
                suffix: c.instruction.clone(),
                composed: c.template.clone(),
                metric_ids: d.evaluation.metric_ids.clone(),
                aggregates: d.evaluation.aggregates.clone(),
                avg_rank,
            })
        })
        .collect()
}

fn outcome(run: RunOutcome) -> Result<AstOutcome, EngineError> {
    let pool = ranked_pool(&run.record)?;
    let ranks: Vec<f64> = pool.iter().map(|c| c.avg_rank).collect();
    let best = best_by_rank(&ranks)
        .map(|i| pool[i].clone())
        .ok_or_else(|| EngineError::Integrity("ranked run has no dev evaluations".into()))?;
    Ok(AstOutcome { best, pool, run })
}
