//! The optimization loop: evaluate, critique, propose, dev-gate, select.

mod eval;
mod record;
mod run;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critique::{CritiqueError, CritiqueVariant};
use crate::gateway::GatewayError;
use crate::metaprompt::ProviderFamily;
use crate::metrics::{MetricError, MetricRole, MetricSpec};
use crate::optimizer::AblationFlags;
use crate::selection::SelectionError;
use crate::store::{DiversityError, StoreError};
use crate::templates::{TaskKind, TemplateError, Violation};

pub use eval::{evaluate, CallLog, EvalContext, Evaluation, ExampleOutcome, IclSource};
pub use record::*;
pub use run::{Engine, RunOutcome};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid seed prompt: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    SeedPrompt(Vec<Violation>),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{split} evaluation failed: {flagged} of {total} examples errored (first: {first_error})")]
    EvaluationFailed {
        split: String,
        flagged: usize,
        total: usize,
        first_error: String,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Critique(#[from] CritiqueError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
    #[error("run directory {0} already holds a run; resume it instead")]
    RunExists(std::path::PathBuf),
    #[error("no run found in {0}")]
    NoRun(std::path::PathBuf),
    #[error("config hash mismatch: run was started with {stored}, current config hashes to {current}")]
    ConfigMismatch { stored: String, current: String },
    #[error("run record integrity error: {0}")]
    Integrity(String),
}

fn default_iterations() -> u32 {
    100
}
fn default_k() -> usize {
    3
}
fn default_top_k() -> usize {
    10
}
fn default_critique_examples() -> usize {
    10
}
fn default_dev_every() -> u32 {
    5
}
fn default_io_examples() -> usize {
    2
}
fn default_max_flagged() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    #[serde(default)]
    pub task_kind: TaskKind,
    #[serde(default = "default_iterations")]
    pub iterations: u32,
    #[serde(default = "default_k")]
    pub candidates_per_step: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_critique_examples")]
    pub critique_examples: usize,
    #[serde(default = "default_dev_every")]
    pub dev_eval_every: u32,
    #[serde(default = "default_io_examples")]
    pub io_examples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub flags: AblationFlags,
    #[serde(default)]
    pub critique_variant: CritiqueVariant,
    /// Empty means the task default.
    #[serde(default)]
    pub metrics: Vec<MetricSpec>,
    /// Retrieved few-shot examples per input; 0 disables the examples block.
    #[serde(default)]
    pub icl_shots: usize,
    #[serde(default)]
    pub family: ProviderFamily,
    /// An evaluation with a larger share of errored examples fails.
    #[serde(default = "default_max_flagged")]
    pub max_flagged_fraction: f64,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            task_kind: TaskKind::Summarization,
            iterations: default_iterations(),
            candidates_per_step: default_k(),
            top_k: default_top_k(),
            critique_examples: default_critique_examples(),
            dev_eval_every: default_dev_every(),
            io_examples: default_io_examples(),
            seed: 0,
            flags: AblationFlags::default(),
            critique_variant: CritiqueVariant::default(),
            metrics: Vec::new(),
            icl_shots: 0,
            family: ProviderFamily::Claude,
            max_flagged_fraction: default_max_flagged(),
        }
    }
}

/// ROUGE-1 for summarization, exact match for QA.
pub fn default_metrics(kind: TaskKind) -> Vec<MetricSpec> {
    match kind {
        TaskKind::Summarization => vec![MetricSpec::rouge_n(1)],
        TaskKind::Qa => vec![MetricSpec::new("exact-match", crate::metrics::MetricKind::ExactMatch)],
    }
}

impl OptimizationConfig {
    pub fn for_task(kind: TaskKind) -> Self {
        Self {
            task_kind: kind,
            ..Self::default()
        }
    }

    /// Configured metrics, or the task default when none are set.
    pub fn effective_metrics(&self) -> Vec<MetricSpec> {
        if self.metrics.is_empty() {
            default_metrics(self.task_kind)
        } else {
            self.metrics.clone()
        }
    }

    /// Index of the metric that drives single-metric selection.
    pub fn primary_index(&self) -> usize {
        self.effective_metrics()
            .iter()
            .position(|m| m.role == MetricRole::Primary)
            .unwrap_or(0)
    }

    pub fn check(&self) -> Result<(), EngineError> {
        let fail = |m: &str| Err(EngineError::Config(m.to_owned()));
        for (name, v) in [
            ("candidates_per_step", self.candidates_per_step),
            ("top_k", self.top_k),
            ("critique_examples", self.critique_examples),
            ("io_examples", self.io_examples),
        ] {
            if v == 0 {
                return fail(&format!("{name} must be at least 1"));
            }
        }
        if self.dev_eval_every == 0 {
            return fail("dev_eval_every must be at least 1");
        }
        if self.iterations > 0 && self.dev_eval_every > self.iterations {
            return fail("dev_eval_every cannot exceed iterations");
        }
        if !(0.0..=1.0).contains(&self.max_flagged_fraction) {
            return fail("max_flagged_fraction must lie in [0, 1]");
        }
        self.critique_variant.check()?;
        let mut ids = std::collections::HashSet::new();
        for m in self.effective_metrics() {
            if !ids.insert(m.id.clone()) {
                return fail(&format!("metric id `{}` listed twice", m.id));
            }
        }
        Ok(())
    }
}
