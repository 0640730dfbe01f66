//! Scripted runs recorded in-process, replayed through the binary.
//!
//! Inputs are `SRC-<split> w0 ... w9 END`; the task model answers with the
//! first N words, where N is read from `quality=N` in the prompt.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use promptopt_core::engine::OptimizationConfig;
use promptopt_core::gateway::{
    CompletionRequest, FnProvider, LlmGateway, Provider, ProviderError, RecordingProvider, ReplayEntry, ReplayProvider,
    Role, RoleConfig,
};
use promptopt_core::store::{load_dataset, DatasetSplits, LoadOptions};
use promptopt_core::templates::TaskKind;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_promptopt"));
    c.env_remove("RUST_LOG");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn record(split: &str, i: usize) -> serde_json::Value {
    let words: Vec<String> = (0..10).map(|j| format!("{split}{i}w{j}")).collect();
    serde_json::json!({
        "id": format!("{split}-{i}"),
        "input": format!("SRC-{split} {} END", words.join(" ")),
        "references": [words.join(" ")],
    })
}

/// Writes train/dev/test JSONL files under `dir`.
pub fn write_dataset(dir: &Path, sizes: [usize; 3]) -> PathBuf {
    let data = dir.join("data");
    std::fs::create_dir_all(&data).unwrap();
    for (split, n) in ["tr", "dv", "te"].iter().zip(sizes) {
        let name = match *split {
            "tr" => "train",
            "dv" => "dev",
            _ => "test",
        };
        let body: String = (0..n).map(|i| record(split, i).to_string() + "\n").collect();
        std::fs::write(data.join(format!("{name}.jsonl")), body).unwrap();
    }
    data
}

pub fn load(data: &Path, seed: u64) -> DatasetSplits {
    load_dataset(data, TaskKind::Summarization, &LoadOptions { seed, ..Default::default() }).unwrap()
}

fn marker(prompt: &str) -> usize {
    let Some(at) = prompt.rfind("quality=") else { return 1 };
    let digits: String = prompt[at + 8..].chars().take_while(char::is_ascii_digit).collect();
    digits.parse().unwrap_or(1)
}

pub fn task_answer(req: &CompletionRequest) -> Result<String, ProviderError> {
    let p = &req.prompt;
    let start = p.rfind("SRC-").ok_or_else(|| ProviderError::Malformed("no source".into()))?;
    let body = &p[start..];
    let end = body.find(" END").unwrap_or(body.len());
    let words: Vec<&str> = body[..end].split_whitespace().skip(1).collect();
    let n = marker(p).min(words.len());
    Ok(format!("<summary>{}</summary>", words[..n].join(" ")))
}

pub fn template(label: &str, quality: usize) -> String {
    format!("Summarize the text, {label} (quality={quality}).\nINSERT_INPUT_HERE")
}

pub fn optimizer_script(proposals: &[String]) -> ReplayProvider {
    let entries: Vec<ReplayEntry> = proposals
        .iter()
        .enumerate()
        .map(|(i, t)| {
            ReplayEntry::sequenced(
                Role::Optimizer,
                i as u64,
                format!("<suggestion>variant {i}</suggestion>\n<instruction>{t}</instruction>"),
            )
        })
        .collect();
    ReplayProvider::new(entries).unwrap().with_fallback("<instruction>?</instruction>")
}

/// Scripted providers, each wrapped so every call lands in `replay`.
pub fn recording_gateway(proposals: &[String], replay: &Path) -> LlmGateway {
    let wrap = |p: Arc<dyn Provider>| -> Arc<dyn Provider> { Arc::new(RecordingProvider::new(p, replay).unwrap()) };
    let critique = FnProvider(|_: &CompletionRequest| {
        Ok("<critique>Too short.</critique>\n<suggestion>Ask for more words.</suggestion>".to_owned())
    });
    LlmGateway::builder()
        .route(RoleConfig::new(Role::Task, "replay"), wrap(Arc::new(FnProvider(task_answer))))
        .route(RoleConfig::new(Role::Critique, "replay"), wrap(Arc::new(critique)))
        .route(RoleConfig::new(Role::Optimizer, "replay"), wrap(Arc::new(optimizer_script(proposals))))
        .sleeper(Arc::new(|_| {}))
        .build()
}

pub fn proposals() -> Vec<String> {
    [3, 7, 5, 9, 2, 6].iter().enumerate().map(|(i, &q)| template(&format!("v{i}"), q)).collect()
}

pub fn config() -> OptimizationConfig {
    OptimizationConfig {
        iterations: 4,
        candidates_per_step: 2,
        dev_eval_every: 2,
        critique_examples: 2,
        seed: 5,
        ..OptimizationConfig::for_task(TaskKind::Summarization)
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

pub const RUN_FILES: [&str; 7] = [
    "config.json",
    "candidates.jsonl",
    "transcripts.jsonl",
    "dev_evals.jsonl",
    "steps.jsonl",
    "summary.json",
    "best_prompt.txt",
];

pub fn snapshot(dir: &Path) -> Vec<(String, String)> {
    RUN_FILES
        .iter()
        .map(|f| (f.to_string(), std::fs::read_to_string(dir.join(f)).unwrap_or_default()))
        .collect()
}
