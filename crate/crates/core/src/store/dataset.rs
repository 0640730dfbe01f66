//! JSONL dataset splits.
//!
//! A dataset is a directory with `train.jsonl`, `dev.jsonl` and optionally
//! `test.jsonl`. One record per line:
//!
//! ```json
//! {"id": "q1", "input": "...", "references": ["..."], "contexts": ["..."], "choices": ["A", "B"], "gold_choice": "A"}
//! ```
//!
//! Only `input` and `references` (or `gold_choice`) are required.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::templates::TaskKind;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Schema { path: PathBuf, line: usize, message: String },
    #[error("example id `{id}` appears in both {first} and {second}")]
    Overlap { id: String, first: String, second: String },
    #[error("duplicate example id `{id}` in {split}")]
    DuplicateId { id: String, split: String },
    #[error("split `{0}` has no usable examples")]
    EmptySplit(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub input: String,
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contexts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_choice: Option<String>,
}

impl Example {
    /// The reference shown to critique and optimizer prompts.
    pub fn primary_reference(&self) -> &str {
        &self.references[0]
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    #[serde(default)]
    id: Option<serde_json::Value>,
    input: String,
    #[serde(default)]
    references: Vec<String>,
    #[serde(default)]
    contexts: Vec<String>,
    #[serde(default)]
    choices: Vec<String>,
    #[serde(default)]
    gold_choice: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
    /// Keep only the first N context passages of each record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_contexts: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub source_records: usize,
    pub dropped_degenerate: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub train: SplitStats,
    pub dev: SplitStats,
    pub test: Option<SplitStats>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub kind: TaskKind,
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
    pub provenance: Provenance,
}

impl DatasetSplits {
    /// Builds splits from in-memory examples, checking id disjointness.
    pub fn new(kind: TaskKind, train: Vec<Example>, dev: Vec<Example>, test: Vec<Example>) -> Result<Self, DataError> {
        let stats = |v: &[Example]| SplitStats {
            source_records: v.len(),
            dropped_degenerate: 0,
            kept: v.len(),
        };
        let provenance = Provenance {
            train: stats(&train),
            dev: stats(&dev),
            test: (!test.is_empty()).then(|| stats(&test)),
            seed: 0,
        };
        let s = Self {
            kind,
            train,
            dev,
            test,
            provenance,
        };
        s.check_disjoint()?;
        Ok(s)
    }

    pub fn split(&self, name: &str) -> Option<&[Example]> {
        match name {
            "train" => Some(&self.train),
            "dev" => Some(&self.dev),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn has_contexts(&self) -> bool {
        [&self.train, &self.dev, &self.test]
            .iter()
            .any(|s| s.iter().any(|e| !e.contexts.is_empty()))
    }

    fn check_disjoint(&self) -> Result<(), DataError> {
        let mut owner: std::collections::HashMap<&str, &str> = std::collections::HashMap::new();
        for (name, split) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test)] {
            let mut local = HashSet::new();
            for e in split.iter() {
                if !local.insert(e.id.as_str()) {
                    return Err(DataError::DuplicateId {
                        id: e.id.clone(),
                        split: name.into(),
                    });
                }
                if let Some(first) = owner.insert(e.id.as_str(), name) {
                    return Err(DataError::Overlap {
                        id: e.id.clone(),
                        first: first.into(),
                        second: name.into(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn read_split(
    path: &Path,
    split: &str,
    max_contexts: Option<usize>,
) -> Result<(Vec<Example>, SplitStats), DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = Vec::new();
    let mut stats = SplitStats::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        stats.source_records += 1;
        let rec: WireRecord = serde_json::from_str(line).map_err(|e| DataError::Schema {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let id = match rec.id {
            None => format!("{split}-{}", i + 1),
            Some(serde_json::Value::String(s)) => s,
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(other) => {
                return Err(DataError::Schema {
                    path: path.to_owned(),
                    line: i + 1,
                    message: format!("`id` must be a string or number, got {other}"),
                })
            }
        };
        let mut references: Vec<String> = rec.references.into_iter().filter(|r| !r.trim().is_empty()).collect();
        if references.is_empty() {
            if let Some(g) = rec.gold_choice.clone().filter(|g| !g.trim().is_empty()) {
                references.push(g);
            }
        }
        if rec.input.trim().is_empty() || references.is_empty() {
            stats.dropped_degenerate += 1;
            continue;
        }
        let mut contexts = rec.contexts;
        if let Some(m) = max_contexts {
            contexts.truncate(m);
        }
        out.push(Example {
            id,
            input: rec.input,
            references,
            contexts,
            choices: rec.choices,
            gold_choice: rec.gold_choice,
        });
    }
    if stats.dropped_degenerate > 0 {
        log::info!(
            "{}: dropped {} degenerate record(s)",
            path.display(),
            stats.dropped_degenerate
        );
    }
    Ok((out, stats))
}

/// Seeded down-sampling that keeps file order.
fn downsample(examples: Vec<Example>, size: Option<usize>, seed: u64, split: &str) -> Vec<Example> {
    match size {
        Some(n) if n < examples.len() => {
            let mut r = rng::derived(seed, &format!("downsample-{split}"), 0);
            let mut idx = rng::sample_indices(&mut r, examples.len(), n);
            idx.sort_unstable();
            let mut keep = vec![false; examples.len()];
            for i in idx {
                keep[i] = true;
            }
            examples
                .into_iter()
                .zip(keep)
                .filter_map(|(e, k)| k.then_some(e))
                .collect()
        }
        _ => examples,
    }
}

pub fn load_dataset(dir: &Path, kind: TaskKind, opts: &LoadOptions) -> Result<DatasetSplits, DataError> {
    let load = |split: &str, size: Option<usize>| -> Result<(Vec<Example>, SplitStats), DataError> {
        let (ex, mut stats) = read_split(&dir.join(format!("{split}.jsonl")), split, opts.max_contexts)?;
        let ex = downsample(ex, size, opts.seed, split);
        stats.kept = ex.len();
        Ok((ex, stats))
    };
    let (train, train_stats) = load("train", opts.train_size)?;
    let (dev, dev_stats) = load("dev", opts.dev_size)?;
    let (test, test_stats) = if dir.join("test.jsonl").exists() {
        let (t, s) = load("test", opts.test_size)?;
        (t, Some(s))
    } else {
        (Vec::new(), None)
    };
    for (name, split) in [("train", &train), ("dev", &dev)] {
        if split.is_empty() {
            return Err(DataError::EmptySplit(name.into()));
        }
    }
    let splits = DatasetSplits {
        kind,
        train,
        dev,
        test,
        provenance: Provenance {
            train: train_stats,
            dev: dev_stats,
            test: test_stats,
            seed: opts.seed,
        },
    };
    splits.check_disjoint()?;
    Ok(splits)
}
