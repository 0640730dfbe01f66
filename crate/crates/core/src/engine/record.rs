//! Run-directory records.
//!
//! ```text
//! config.json        run header: mode, config, seeds, config hash
//! candidates.jsonl   one line per evaluated candidate
//! transcripts.jsonl  one line per model call
//! dev_evals.jsonl    one line per dev evaluation
//! steps.jsonl        one line per finished iteration (the commit marker)
//! timing.jsonl       wall-clock per phase, excluded from reproducibility
//! summary.json       written when the run finishes
//! best_prompt.txt    selected prompt
//! main_prompt.txt    frozen prompt of a suffix-tuning run
//! diversity.csv      diversity of the explored prompts
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EngineError, Evaluation, OptimizationConfig};
use crate::critique::CritiqueReport;
use crate::gateway::{Role, TokenUsage};
use crate::store::{read_jsonl, rewrite_jsonl, DatasetSplits, JsonlRead, StoreError};

pub const FORMAT_VERSION: u32 = 1;

pub const CONFIG_FILE: &str = "config.json";
pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const DEV_EVALS_FILE: &str = "dev_evals.jsonl";
pub const STEPS_FILE: &str = "steps.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BEST_PROMPT_FILE: &str = "best_prompt.txt";
pub const MAIN_PROMPT_FILE: &str = "main_prompt.txt";
pub const DIVERSITY_FILE: &str = "diversity.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Whole-prompt optimization on the primary metric.
    Optimize,
    /// Only a suffix after a frozen main prompt changes; scored by average rank.
    SuffixTune,
    /// Main prompt and suffix tuned together; scored by average rank.
    FullTune,
}

impl RunMode {
    pub fn ranked(self) -> bool {
        !matches!(self, RunMode::Optimize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub format_version: u32,
    pub mode: RunMode,
    pub config: OptimizationConfig,
    /// p0, or σ0 in suffix mode.
    pub seed_prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main_prompt: Option<String>,
    pub dataset_sha256: String,
    pub resource_version: String,
    pub config_hash: String,
}

#[derive(Serialize)]
struct HashInput<'a> {
    format_version: u32,
    mode: RunMode,
    config: &'a OptimizationConfig,
    seed_prompt: &'a str,
    main_prompt: Option<&'a str>,
    dataset_sha256: &'a str,
    resource_version: &'a str,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn dataset_digest(data: &DatasetSplits) -> String {
    let body = serde_json::to_vec(&(&data.kind, &data.train, &data.dev)).expect("dataset serializes");
    sha256_hex(&body)
}

impl RunHeader {
    pub fn new(
        mode: RunMode,
        config: OptimizationConfig,
        seed_prompt: &str,
        main_prompt: Option<&str>,
        data: &DatasetSplits,
    ) -> Self {
        let mut h = Self {
            format_version: FORMAT_VERSION,
            mode,
            config,
            seed_prompt: seed_prompt.to_owned(),
            main_prompt: main_prompt.map(str::to_owned),
            dataset_sha256: dataset_digest(data),
            resource_version: crate::metaprompt::RESOURCE_VERSION.to_owned(),
            config_hash: String::new(),
        };
        h.config_hash = h.compute_hash();
        h
    }

    pub fn compute_hash(&self) -> String {
        let input = HashInput {
            format_version: self.format_version,
            mode: self.mode,
            config: &self.config,
            seed_prompt: &self.seed_prompt,
            main_prompt: self.main_prompt.as_deref(),
            dataset_sha256: &self.dataset_sha256,
            resource_version: &self.resource_version,
        };
        sha256_hex(&serde_json::to_vec(&input).expect("header serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritiqueRecord {
    pub example_ids: Vec<String>,
    pub report: CritiqueReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: u64,
    pub iteration: u32,
    /// What meta-prompts show: template, bare instruction, or suffix.
    pub instruction: String,
    /// The full task prompt that was evaluated.
    pub template: String,
    pub train: Evaluation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critique: Option<CritiqueRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevEvalRecord {
    pub iteration: u32,
    pub candidate_id: u64,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub candidate_id: u64,
    /// Dev score on the primary metric, or average rank in ranked modes.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: u32,
    /// Candidate ids shown to the optimizer, ascending by score.
    pub elite: Vec<u64>,
    pub proposed: Vec<u64>,
    pub optimizer_calls: u32,
    pub invalid: usize,
    pub duplicates: usize,
    /// Draws that produced nothing even after the retry.
    pub empty_draws: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cot_suggestions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_evaluated: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incumbent: Option<Incumbent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub seq: u64,
    pub iteration: u32,
    pub role: Role,
    pub purpose: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_id: Option<String>,
    pub prompt_sha256: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub usage: TokenUsage,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub iteration: u32,
    pub phase: String,
    pub wall_ms: u64,
    pub calls: usize,
    pub call_latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPrompt {
    pub candidate_id: u64,
    pub instruction: String,
    pub template: String,
    pub train_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_rank: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: RunMode,
    pub iterations_completed: u32,
    pub candidates: usize,
    pub dev_evaluations: usize,
    pub transcripts: u64,
    pub usage: TokenUsage,
    pub best: BestPrompt,
}

/// Everything a run directory holds, minus transcripts and timing.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub header: RunHeader,
    pub candidates: Vec<CandidateRecord>,
    pub dev_evals: Vec<DevEvalRecord>,
    pub steps: Vec<StepRecord>,
    pub transcripts: u64,
    pub usage: TokenUsage,
}

impl RunRecord {
    pub fn last_iteration(&self) -> Option<u32> {
        self.steps.last().map(|s| s.iteration)
    }

    pub fn is_finished(&self) -> bool {
        self.last_iteration() == Some(self.header.config.iterations)
    }

    pub fn read_header(dir: &Path) -> Result<RunHeader, EngineError> {
        let path = dir.join(CONFIG_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| StoreError::Io {
            path: path.clone(),
            source,
        })?;
        let header: RunHeader = serde_json::from_str(&text)
            .map_err(|e| EngineError::Integrity(format!("{}: {e}", path.display())))?;
        if header.format_version != FORMAT_VERSION {
            return Err(EngineError::Integrity(format!(
                "{}: unsupported format version {}",
                path.display(),
                header.format_version
            )));
        }
        if header.compute_hash() != header.config_hash {
            return Err(EngineError::Integrity(format!(
                "{}: stored config hash does not match its contents",
                path.display()
            )));
        }
        Ok(header)
    }

    /// Reads committed state. Records past the last committed iteration are
    /// dropped, and when `repair` is set the files are rewritten without them.
    pub fn load(dir: &Path, repair: bool) -> Result<Self, EngineError> {
        let header = Self::read_header(dir)?;
        let steps_read = read_committed::<StepRecord>(dir, STEPS_FILE)?;
        let steps = steps_read.records;
        for (i, s) in steps.iter().enumerate() {
            if s.iteration as usize != i {
                return Err(EngineError::Integrity(format!(
                    "steps.jsonl: expected iteration {i}, found {}",
                    s.iteration
                )));
            }
        }
        let committed = steps.last().map(|s| s.iteration);
        let keep = |it: u32| committed.is_some_and(|c| it <= c);

        let cands = read_committed::<CandidateRecord>(dir, CANDIDATES_FILE)?;
        let devs = read_committed::<DevEvalRecord>(dir, DEV_EVALS_FILE)?;
        let trans = read_committed::<Transcript>(dir, TRANSCRIPTS_FILE)?;
        let timing = read_committed::<TimingRecord>(dir, TIMING_FILE)?;

        let n = (cands.records.len(), devs.records.len(), trans.records.len(), timing.records.len());
        let candidates: Vec<_> = cands.records.into_iter().filter(|c| keep(c.iteration)).collect();
        let dev_evals: Vec<_> = devs.records.into_iter().filter(|d| keep(d.iteration)).collect();
        let transcripts: Vec<_> = trans.records.into_iter().filter(|t| keep(t.iteration)).collect();
        let timings: Vec<_> = timing.records.into_iter().filter(|t| keep(t.iteration)).collect();

        for (i, c) in candidates.iter().enumerate() {
            if c.id as usize != i {
                return Err(EngineError::Integrity(format!(
                    "candidates.jsonl: expected id {i}, found {}",
                    c.id
                )));
            }
        }
        for (i, t) in transcripts.iter().enumerate() {
            if t.seq as usize != i {
                return Err(EngineError::Integrity(format!(
                    "transcripts.jsonl: expected seq {i}, found {}",
                    t.seq
                )));
            }
        }
        for d in &dev_evals {
            if d.candidate_id as usize >= candidates.len() {
                return Err(EngineError::Integrity(format!(
                    "dev_evals.jsonl: unknown candidate {}",
                    d.candidate_id
                )));
            }
        }

        if steps_read.truncated && repair {
            rewrite_jsonl(&dir.join(STEPS_FILE), &steps)?;
        }
        let dirty = cands.truncated
            || devs.truncated
            || trans.truncated
            || timing.truncated
            || n != (candidates.len(), dev_evals.len(), transcripts.len(), timings.len());
        if dirty && repair {
            log::warn!("{}: discarding records of an unfinished iteration", dir.display());
            rewrite_jsonl(&dir.join(CANDIDATES_FILE), &candidates)?;
            rewrite_jsonl(&dir.join(DEV_EVALS_FILE), &dev_evals)?;
            rewrite_jsonl(&dir.join(TRANSCRIPTS_FILE), &transcripts)?;
            rewrite_jsonl(&dir.join(TIMING_FILE), &timings)?;
        }
        let mut usage = TokenUsage::default();
        for t in &transcripts {
            usage += t.usage;
        }
        Ok(Self {
            dir: dir.to_owned(),
            header,
            candidates,
            dev_evals,
            steps,
            transcripts: transcripts.len() as u64,
            usage,
        })
    }
}

/// A malformed line before the tail is corruption, not a torn write.
fn read_committed<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> Result<JsonlRead<T>, EngineError> {
    read_jsonl(&dir.join(name)).map_err(|e| match e {
        StoreError::Corrupt { path, line, message } => {
            EngineError::Integrity(format!("{}:{line}: {message}", path.display()))
        }
        other => other.into(),
    })
}
