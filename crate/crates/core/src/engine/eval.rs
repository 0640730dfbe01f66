//! Applying a task prompt to a split and scoring the outputs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::gateway::{truncate_words, CompletionRequest, LlmGateway, Role, TokenUsage};
use crate::metrics::{aggregate, score_builtin, MetricKind, MetricSpec};
use crate::selection::{EmbeddingProvider, IclIndex};
use crate::store::Example;
use crate::templates::{extract_tagged, format_contexts, format_examples, Placeholder, PromptTemplate, TaskKind};

/// Retrieval pool for the examples block.
pub struct IclSource {
    index: IclIndex,
    pool: Vec<(String, String)>,
    shots: usize,
    embedder: Arc<dyn EmbeddingProvider>,
}

impl IclSource {
    pub fn build(pool: &[Example], shots: usize, embedder: Arc<dyn EmbeddingProvider>) -> Result<Self, EngineError> {
        let keyed: Vec<(&str, &str)> = pool.iter().map(|e| (e.id.as_str(), e.input.as_str())).collect();
        let index = IclIndex::build(&keyed, embedder.as_ref())?;
        Ok(Self {
            index,
            pool: pool
                .iter()
                .map(|e| (e.input.clone(), e.primary_reference().to_owned()))
                .collect(),
            shots,
            embedder,
        })
    }

    /// The examples block for `ex`, never including `ex` itself.
    pub fn block(&self, ex: &Example, kind: TaskKind) -> Result<String, EngineError> {
        let picked = self
            .index
            .retrieve_excluding(&ex.input, self.shots, &ex.id, self.embedder.as_ref())?;
        let pairs: Vec<(&str, &str)> = picked
            .into_iter()
            .map(|i| (self.pool[i].0.as_str(), self.pool[i].1.as_str()))
            .collect();
        Ok(format_examples(&pairs, kind)?)
    }
}

pub struct EvalContext<'a> {
    pub gateway: &'a LlmGateway,
    pub metrics: &'a [MetricSpec],
    pub icl: Option<&'a IclSource>,
    pub max_flagged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub example_id: String,
    /// Extracted answer; empty when the call failed.
    pub prediction: String,
    pub tagged: bool,
    /// One score per metric, in metric order.
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub split: String,
    pub metric_ids: Vec<String>,
    /// Mean per metric, in metric order.
    pub aggregates: Vec<f64>,
    pub flagged: usize,
    pub outcomes: Vec<ExampleOutcome>,
}

impl Evaluation {
    pub fn aggregate_of(&self, metric_id: &str) -> Option<f64> {
        self.metric_ids
            .iter()
            .position(|m| m == metric_id)
            .map(|i| self.aggregates[i])
    }
}

/// One model call, for the transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct CallLog {
    pub role: Role,
    pub example_id: Option<String>,
    pub prompt: String,
    pub completion: Option<String>,
    pub error: Option<String>,
    pub usage: TokenUsage,
    pub attempts: u32,
    pub latency_ms: u64,
}

/// The task prompt for one example.
pub fn render_for(
    template: &PromptTemplate,
    ex: &Example,
    icl: Option<&IclSource>,
    word_budget: Option<usize>,
) -> Result<String, EngineError> {
    let input = match word_budget {
        Some(b) => truncate_words(&ex.input, b),
        None => &ex.input,
    };
    let examples = if template.declares(Placeholder::Examples) {
        let src = icl.ok_or_else(|| {
            EngineError::Config("template has an examples block but no retrieval pool is configured".into())
        })?;
        Some(src.block(ex, template.kind())?)
    } else {
        None
    };
    let context = template
        .declares(Placeholder::Context)
        .then(|| format_contexts(&ex.contexts));
    Ok(template.render(input, examples.as_deref(), context.as_deref())?)
}

/// Renders `template` per example, runs the task model at its configured
/// temperature, extracts the answer tag and scores every metric. Failed
/// calls score 0 and are flagged; too many flags fail the evaluation.
pub fn evaluate(
    ctx: &EvalContext<'_>,
    template: &PromptTemplate,
    split_name: &str,
    examples: &[Example],
) -> Result<(Evaluation, Vec<CallLog>), EngineError> {
    if examples.is_empty() {
        return Err(EngineError::Config(format!("{split_name} split is empty")));
    }
    if ctx.metrics.is_empty() {
        return Err(EngineError::Config("no metrics configured".into()));
    }
    let budget = ctx.gateway.role_config(Role::Task).and_then(|c| c.word_budget);
    let mut reqs: Vec<CompletionRequest> = Vec::with_capacity(examples.len());
    for ex in examples {
        let prompt = render_for(template, ex, ctx.icl, budget)?;
        reqs.push(ctx.gateway.request(Role::Task, prompt)?);
    }
    let results = ctx.gateway.complete_many(&reqs, ctx.gateway.parallelism());
    let tag = template.kind().answer_tag();
    let mut outcomes = Vec::with_capacity(examples.len());
    let mut logs = Vec::with_capacity(examples.len());
    for ((ex, req), res) in examples.iter().zip(reqs).zip(results) {
        let mut outcome = ExampleOutcome {
            example_id: ex.id.clone(),
            prediction: String::new(),
            tagged: false,
            scores: vec![0.0; ctx.metrics.len()],
            error: None,
        };
        let mut log = CallLog {
            role: Role::Task,
            example_id: Some(ex.id.clone()),
            prompt: req.prompt,
            completion: None,
            error: None,
            usage: TokenUsage::default(),
            attempts: 0,
            latency_ms: 0,
        };
        match res {
            Err(e) => {
                outcome.error = Some(e.to_string());
                log.error = Some(e.to_string());
                if let crate::gateway::GatewayError::Provider { attempts, .. } = e {
                    log.attempts = attempts;
                }
            }
            Ok(c) => {
                let extracted = extract_tagged(&c.text, tag);
                outcome.prediction = extracted.text;
                outcome.tagged = extracted.tagged;
                for (slot, spec) in outcome.scores.iter_mut().zip(ctx.metrics) {
                    match score_one(ctx.gateway, spec, &outcome.prediction, ex) {
                        Ok(s) => *slot = s,
                        Err(e) => {
                            outcome.error.get_or_insert(e);
                        }
                    }
                }
                log.completion = Some(c.text);
                log.usage = c.usage;
                log.attempts = c.attempts;
                log.latency_ms = c.latency_ms;
            }
        }
        outcomes.push(outcome);
        logs.push(log);
    }
    let flagged = outcomes.iter().filter(|o| o.error.is_some()).count();
    if flagged as f64 > ctx.max_flagged_fraction * examples.len() as f64 {
        return Err(EngineError::EvaluationFailed {
            split: split_name.to_owned(),
            flagged,
            total: examples.len(),
            first_error: outcomes
                .iter()
                .find_map(|o| o.error.clone())
                .unwrap_or_default(),
        });
    }
    let mut aggregates = Vec::with_capacity(ctx.metrics.len());
    for m in 0..ctx.metrics.len() {
        let col: Vec<f64> = outcomes.iter().map(|o| o.scores[m]).collect();
        aggregates.push(aggregate(&col)?);
    }
    Ok((
        Evaluation {
            split: split_name.to_owned(),
            metric_ids: ctx.metrics.iter().map(|m| m.id.clone()).collect(),
            aggregates,
            flagged,
            outcomes,
        },
        logs,
    ))
}

fn score_one(gateway: &LlmGateway, spec: &MetricSpec, prediction: &str, ex: &Example) -> Result<f64, String> {
    match &spec.kind {
        MetricKind::External { endpoint, against_input } => {
            let target = if *against_input { &ex.input } else { ex.primary_reference() };
            gateway
                .score_external(endpoint, prediction, target)
                .map_err(|e| e.to_string())
        }
        _ => score_builtin(spec, prediction, &ex.references).map_err(|e| e.to_string()),
    }
}
