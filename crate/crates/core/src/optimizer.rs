//! Optimization trajectory, optimizer meta-prompt, and candidate parsing.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metaprompt::{
    edit_lines, numbered, optimizer_resource, slots, LineEdit, MetaTemplate, ProviderFamily, Slots,
};
use crate::templates::{format_contexts, tag_spans, Placeholder, TaskKind, Violation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OptimizerError {
    #[error("trajectory history is empty")]
    EmptyHistory,
    #[error("top-k size must be at least 1")]
    ZeroK,
    #[error("optimizer completion held no usable candidate ({invalid} invalid, {duplicate} duplicate)")]
    Resample { invalid: usize, duplicate: usize },
}

/// An evaluated candidate as the optimizer sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub candidate_id: u64,
    /// Text shown to the optimizer: the full template, the bare instruction
    /// under a fixed layout, or the suffix in suffix mode.
    pub instruction: String,
    /// Train score in [0, 1].
    pub score: f64,
    pub critique: String,
    pub iteration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationFlags {
    pub use_critique: bool,
    pub use_cot: bool,
    pub use_flexible_template: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self {
            use_critique: true,
            use_cot: true,
            use_flexible_template: true,
        }
    }
}

impl AblationFlags {
    /// All enhancements off: the OPRO baseline.
    pub const fn opro() -> Self {
        Self {
            use_critique: false,
            use_cot: false,
            use_flexible_template: false,
        }
    }

    pub fn is_opro(&self) -> bool {
        *self == Self::opro()
    }
}

/// The `k` best entries, ascending by score; ties favour the more recent.
pub fn select_top_k(history: &[TrajectoryEntry], k: usize) -> Result<Vec<TrajectoryEntry>, OptimizerError> {
    if k == 0 {
        return Err(OptimizerError::ZeroK);
    }
    if history.is_empty() {
        return Err(OptimizerError::EmptyHistory);
    }
    let mut sorted: Vec<&TrajectoryEntry> = history.iter().collect();
    sorted.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.candidate_id.cmp(&a.candidate_id))
    });
    let mut top: Vec<TrajectoryEntry> = sorted.into_iter().take(k).cloned().collect();
    top.reverse();
    Ok(top)
}

/// An input/output pair shown as a worked example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoExample {
    pub input: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contexts: Vec<String>,
    pub output: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions<'a> {
    pub kind: TaskKind,
    pub family: ProviderFamily,
    pub flags: AblationFlags,
    /// Frozen main prompt when only a suffix is being tuned.
    pub main_prompt: Option<&'a str>,
}

/// Score as shown to the optimizer: a percentage with one decimal.
pub fn display_score(score: f64) -> String {
    format!("{:.1}", score * 100.0)
}

const SUFFIX_PREAMBLE: &str = "The instruction is a suffix appended to the fixed main prompt below. Only the suffix is optimized and the main prompt never changes.\n<main_prompt>\n{main_prompt}\n</main_prompt>\nEvery instruction below is such a suffix. Do not repeat the main prompt or its placeholders in the suffix.";

fn apply_flags(resource: &str, flags: AblationFlags, suffix: bool) -> String {
    let fixed = !flags.use_flexible_template || suffix;
    let mut text = resource.to_owned();
    if !flags.use_critique {
        text = text.replace("with their scores and critiques.", "with their scores.");
        text = edit_lines(&text, |l| match l {
            "<critique>" | "{critique}" | "</critique>" | "CRITIQUE:" => LineEdit::Drop,
            _ => LineEdit::Keep,
        });
    }
    let mut drop_blank = false;
    let mut n = 0;
    text = edit_lines(&text, |l| {
        if std::mem::take(&mut drop_blank) && l.is_empty() {
            return LineEdit::Drop;
        }
        if l == "Draft your new instruction step by step:" && !flags.use_cot {
            drop_blank = true;
            return LineEdit::Drop;
        }
        let Some((_, body)) = numbered(l) else {
            return LineEdit::Keep;
        };
        let mut body = body.to_owned();
        if fixed {
            if body.contains("INSERT_") && !body.contains("position of") {
                return LineEdit::Drop;
            }
            if let Some(start) = body.find("position of ") {
                if let Some(end) = body[start..].find("phrase order") {
                    body.replace_range(start..start + end, "");
                }
            }
        }
        if !flags.use_cot {
            if body.to_lowercase().contains("suggestion") {
                return LineEdit::Drop;
            }
            return LineEdit::Replace(body);
        }
        n += 1;
        LineEdit::Replace(format!("{n}. {body}"))
    });
    if suffix {
        let (head, rest) = text.split_once('\n').unwrap_or((&text, ""));
        text = format!("{head}\n\n{SUFFIX_PREAMBLE}\n{rest}");
    }
    text
}

/// Instantiates the optimizer meta-prompt over the elite trajectory.
pub fn build_optimizer_prompt(
    elite: &[TrajectoryEntry],
    io_examples: &[IoExample],
    opts: OptimizerOptions<'_>,
) -> String {
    let resource = optimizer_resource(opts.kind, opts.family);
    let text = apply_flags(resource, opts.flags, opts.main_prompt.is_some());
    let globals = slots([
        ("main_prompt", opts.main_prompt.unwrap_or_default().to_owned()),
        ("question_placeholder", Placeholder::Question.literal().to_owned()),
        ("context_placeholder", Placeholder::Context.literal().to_owned()),
    ]);
    let examples: Vec<Slots> = io_examples
        .iter()
        .enumerate()
        .map(|(i, ex)| match opts.kind {
            TaskKind::Summarization => slots([
                ("id", (i + 1).to_string()),
                ("article", ex.input.clone()),
                ("summary", ex.output.clone()),
            ]),
            TaskKind::Qa => slots([
                ("id", (i + 1).to_string()),
                ("question", ex.input.clone()),
                ("context", format_contexts(&ex.contexts)),
                ("answer", ex.output.clone()),
            ]),
        })
        .collect();
    let rated: Vec<Slots> = elite
        .iter()
        .map(|e| {
            slots([
                ("instruction", e.instruction.clone()),
                ("score", display_score(e.score)),
                ("critique", e.critique.clone()),
            ])
        })
        .collect();
    MetaTemplate::parse(&text).render(&globals, &[examples, rated])
}

/// Whitespace-normalized form used for duplicate detection.
pub fn dedupe_key(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `<INSERT_INPUT_HERE>` → `INSERT_INPUT_HERE`, as some models echo the
/// bracketed spelling.
fn unbracket(text: &str) -> String {
    let mut out = text.to_owned();
    for p in Placeholder::ALL {
        out = out.replace(&format!("<{}>", p.literal()), p.literal());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCandidates<T> {
    pub accepted: Vec<(String, T)>,
    pub invalid: Vec<(String, Vec<Violation>)>,
    pub duplicates: usize,
}

/// Pulls `<instruction>` spans from `completion`, validates each through
/// `accept`, and drops those already in `seen` (or repeated in the batch).
/// The last `expected` survivors are kept, since drafts precede the final
/// answer. No survivor is a resample signal.
pub fn parse_new_candidates<T>(
    completion: &str,
    expected: usize,
    seen: &HashSet<String>,
    mut accept: impl FnMut(&str) -> Result<T, Vec<Violation>>,
) -> Result<ParsedCandidates<T>, OptimizerError> {
    let mut accepted = Vec::new();
    let mut invalid = Vec::new();
    let mut duplicates = 0;
    let mut batch = HashSet::new();
    for span in tag_spans(completion, "instruction") {
        let text = unbracket(span.trim());
        if text.is_empty() || text == "?" {
            continue;
        }
        match accept(&text) {
            Err(v) => invalid.push((text, v)),
            Ok(t) => {
                let key = dedupe_key(&text);
                if seen.contains(&key) || !batch.insert(key) {
                    duplicates += 1;
                } else {
                    accepted.push((text, t));
                }
            }
        }
    }
    if accepted.is_empty() {
        return Err(OptimizerError::Resample {
            invalid: invalid.len(),
            duplicate: duplicates,
        });
    }
    let skip = accepted.len().saturating_sub(expected.max(1));
    accepted.drain(..skip);
    Ok(ParsedCandidates {
        accepted,
        invalid,
        duplicates,
    })
}

/// The optimizer's own `<suggestion>` notes, kept for the run record.
pub fn cot_suggestions(completion: &str) -> Vec<String> {
    tag_spans(completion, "suggestion")
        .into_iter()
        .map(|s| s.trim().to_owned())
        .collect()
}
