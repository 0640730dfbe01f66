//! Deterministic replay and transcript recording.
//!
//! Replay files are JSONL. Each line is either keyed by content,
//! `{"role", "prompt_sha256", "completion"}`, or by position,
//! `{"role", "seq", "completion"}`. Several entries with the same
//! `(role, prompt_sha256)` are served in file order and the last one repeats,
//! so repeated draws of one prompt can be scripted.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionRequest, Provider, ProviderError, ProviderOutput, Role, TokenUsage};

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    pub completion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

impl ReplayEntry {
    pub fn keyed(role: Role, prompt: &str, completion: impl Into<String>) -> Self {
        Self {
            role,
            prompt_sha256: Some(prompt_sha256(prompt)),
            seq: None,
            completion: completion.into(),
            usage: None,
        }
    }

    pub fn sequenced(role: Role, seq: u64, completion: impl Into<String>) -> Self {
        Self {
            role,
            prompt_sha256: None,
            seq: Some(seq),
            completion: completion.into(),
            usage: None,
        }
    }
}

#[derive(Default)]
struct Cursors {
    keyed: HashMap<(Role, String), usize>,
    seq: HashMap<Role, usize>,
}

/// Serves scripted completions. Strict by default: an unscripted request is
/// an error naming its hash.
pub struct ReplayProvider {
    keyed: HashMap<(Role, String), Vec<ReplayEntry>>,
    sequenced: HashMap<Role, Vec<ReplayEntry>>,
    cursors: Mutex<Cursors>,
    fallback: Option<String>,
}

impl ReplayProvider {
    pub fn new(entries: impl IntoIterator<Item = ReplayEntry>) -> Result<Self, ProviderError> {
        let mut keyed: HashMap<(Role, String), Vec<ReplayEntry>> = HashMap::new();
        let mut by_seq: HashMap<Role, BTreeMap<u64, ReplayEntry>> = HashMap::new();
        for e in entries {
            match (&e.prompt_sha256, e.seq) {
                (Some(h), _) => keyed.entry((e.role, h.clone())).or_default().push(e),
                (None, Some(s)) => {
                    if by_seq.entry(e.role).or_default().insert(s, e.clone()).is_some() {
                        return Err(ProviderError::Config(format!(
                            "duplicate replay seq {s} for role {}",
                            e.role
                        )));
                    }
                }
                (None, None) => {
                    return Err(ProviderError::Config(
                        "replay entry needs prompt_sha256 or seq".into(),
                    ))
                }
            }
        }
        let sequenced = by_seq
            .into_iter()
            .map(|(role, m)| (role, m.into_values().collect()))
            .collect();
        Ok(Self {
            keyed,
            sequenced,
            cursors: Mutex::new(Cursors::default()),
            fallback: None,
        })
    }

    pub fn from_jsonl(path: &Path) -> Result<Self, ProviderError> {
        let file = File::open(path)
            .map_err(|e| ProviderError::Config(format!("cannot open replay file {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| ProviderError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayEntry = serde_json::from_str(&line).map_err(|e| {
                ProviderError::Config(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
            entries.push(entry);
        }
        Self::new(entries)
    }

    /// Answer unscripted requests with `text` instead of failing.
    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }
}

impl Provider for ReplayProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<ProviderOutput, ProviderError> {
        let hash = prompt_sha256(&request.prompt);
        let mut cursors = self.cursors.lock().expect("replay cursor lock");
        let key = (request.role, hash);
        let entry = if let Some(list) = self.keyed.get(&key) {
            let pos = cursors.keyed.entry(key.clone()).or_insert(0);
            let e = &list[(*pos).min(list.len() - 1)];
            *pos += 1;
            Some(e)
        } else if let Some(list) = self.sequenced.get(&request.role) {
            let pos = cursors.seq.entry(request.role).or_insert(0);
            let e = list.get(*pos);
            *pos += 1;
            e
        } else {
            None
        };
        match (entry, &self.fallback) {
            (Some(e), _) => Ok(ProviderOutput {
                text: e.completion.clone(),
                usage: e.usage,
            }),
            (None, Some(text)) => Ok(ProviderOutput::text(text.clone())),
            (None, None) => Err(ProviderError::Unscripted {
                role: request.role,
                hash: key.1,
            }),
        }
    }
}

/// Wraps a live provider and appends every successful call to a replay file.
pub struct RecordingProvider {
    inner: Arc<dyn Provider>,
    out: Mutex<File>,
}

impl RecordingProvider {
    pub fn new(inner: Arc<dyn Provider>, path: &Path) -> std::io::Result<Self> {
        let out = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner,
            out: Mutex::new(out),
        })
    }
}

impl Provider for RecordingProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<ProviderOutput, ProviderError> {
        let mut out = self.inner.complete(request)?;
        let usage = *out
            .usage
            .get_or_insert_with(|| TokenUsage::estimate(&request.prompt, &out.text));
        let entry = ReplayEntry {
            usage: Some(usage),
            ..ReplayEntry::keyed(request.role, &request.prompt, out.text.clone())
        };
        let line = serde_json::to_string(&entry).map_err(|e| ProviderError::Config(e.to_string()))?;
        let mut f = self.out.lock().expect("recording lock");
        f.write_all(format!("{line}\n").as_bytes()).map_err(|e| ProviderError::Config(format!("recording failed: {e}")))?;
        Ok(out)
    }
}
