//! Scripted offline world shared by the integration tests.
//!
//! Inputs look like `SRC-<split> w0 w1 ... w9 END`; the reference is the ten
//! words. The task model reads `quality=N` (train) or `devq=M` (dev) from
//! the rendered prompt and answers with the first N (or M) words, so the
//! ROUGE-1 F of a template is 2N/(N+10) on every example.

#![allow(dead_code)]

pub mod oracle;

use std::sync::{Arc, Mutex};

use promptopt_core::gateway::{
    CompletionRequest, FnProvider, LlmGateway, ProviderError, ReplayEntry, ReplayProvider, Role, RoleConfig,
};
use promptopt_core::store::{DatasetSplits, Example};
use promptopt_core::templates::TaskKind;

pub const REF_LEN: usize = 10;

pub fn example(split: &str, i: usize) -> Example {
    let words: Vec<String> = (0..REF_LEN).map(|j| format!("{split}{i}w{j}")).collect();
    Example {
        id: format!("{split}-{i}"),
        input: format!("SRC-{split} {} END", words.join(" ")),
        references: vec![words.join(" ")],
        contexts: Vec::new(),
        choices: Vec::new(),
        gold_choice: None,
    }
}

pub fn dataset(n_train: usize, n_dev: usize) -> DatasetSplits {
    DatasetSplits::new(
        TaskKind::Summarization,
        (0..n_train).map(|i| example("tr", i)).collect(),
        (0..n_dev).map(|i| example("dv", i)).collect(),
        Vec::new(),
    )
    .unwrap()
}

/// The last occurrence wins, so a suffix can override its main prompt.
fn marker(prompt: &str, key: &str) -> Option<usize> {
    let at = prompt.rfind(key)? + key.len();
    let digits: String = prompt[at..].chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

/// Scripted task model; see the module docs.
pub fn task_answer(req: &CompletionRequest) -> Result<String, ProviderError> {
    let p = &req.prompt;
    let start = p.rfind("SRC-").ok_or_else(|| ProviderError::Malformed("no source".into()))?;
    let body = &p[start..];
    let end = body.find(" END").unwrap_or(body.len());
    let words: Vec<&str> = body[..end].split_whitespace().skip(1).collect();
    let key = if body.starts_with("SRC-dv") { "devq=" } else { "quality=" };
    let n = marker(p, key).or_else(|| marker(p, "quality=")).unwrap_or(1).min(words.len());
    Ok(format!("<summary>{}</summary>", words[..n].join(" ")))
}

/// ROUGE-1 F of an answer with `n` of the ten reference words.
pub fn oracle_f(n: usize) -> f64 {
    let n = n.min(REF_LEN) as f64;
    if n == 0.0 {
        return 0.0;
    }
    2.0 * n / (n + REF_LEN as f64)
}

pub fn template(label: &str, quality: usize, devq: usize) -> String {
    format!("Summarize the text, {label} (quality={quality}, devq={devq}).\nINSERT_INPUT_HERE")
}

pub const CRITIQUE: &str = "<critique>The predictions are shorter than the references. \
Length: too short.</critique>\n<suggestion>Ask for more detail.</suggestion>";

/// Optimizer completions served in order; the last one repeats.
pub fn optimizer_script(proposals: &[String]) -> ReplayProvider {
    let mut entries: Vec<ReplayEntry> = proposals
        .iter()
        .enumerate()
        .map(|(i, t)| {
            ReplayEntry::sequenced(
                Role::Optimizer,
                i as u64,
                format!("<suggestion>try variant {i}</suggestion>\n<instruction>{t}</instruction>"),
            )
        })
        .collect();
    entries.push(ReplayEntry::sequenced(
        Role::Optimizer,
        proposals.len() as u64,
        "<instruction>?</instruction>",
    ));
    ReplayProvider::new(entries).unwrap().with_fallback("<instruction>?</instruction>")
}

pub const BREVITY: &str = "scripted://brevity";

/// Shorter answers score higher; pulls against ROUGE-1.
pub fn brevity(prediction: &str, _target: &str) -> Result<f64, ProviderError> {
    Ok(1.0 - prediction.split_whitespace().count() as f64 / REF_LEN as f64)
}

pub fn gateway_with(optimizer: Arc<dyn promptopt_core::gateway::Provider>) -> LlmGateway {
    let task = Arc::new(FnProvider(task_answer));
    let critique = Arc::new(FnProvider(|_: &CompletionRequest| Ok(CRITIQUE.to_owned())));
    LlmGateway::builder()
        .route(RoleConfig::new(Role::Task, "task-model"), task)
        .route(RoleConfig::new(Role::Critique, "critique-model"), critique)
        .route(RoleConfig::new(Role::Optimizer, "optimizer-model"), optimizer)
        .scorer(BREVITY, Arc::new(brevity))
        .parallelism(4)
        .sleeper(Arc::new(|_| {}))
        .build()
}

pub fn gateway(proposals: &[String]) -> LlmGateway {
    gateway_with(Arc::new(optimizer_script(proposals)))
}

/// Records every optimizer prompt it sees, answering from a script.
pub struct Spy {
    pub prompts: Mutex<Vec<String>>,
    inner: ReplayProvider,
}

impl Spy {
    pub fn new(proposals: &[String]) -> Self {
        Self {
            prompts: Mutex::new(Vec::new()),
            inner: optimizer_script(proposals),
        }
    }
}

impl promptopt_core::gateway::Provider for Spy {
    fn complete(
        &self,
        request: &CompletionRequest,
    ) -> Result<promptopt_core::gateway::ProviderOutput, ProviderError> {
        self.prompts.lock().unwrap().push(request.prompt.clone());
        self.inner.complete(request)
    }
}

pub fn read(dir: &std::path::Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_default()
}
