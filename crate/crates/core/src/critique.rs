//! Multi-aspect critique-suggestion meta-prompt and its parser.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metaprompt::{
    critique_resource, edit_lines, numbered, slots, LineEdit, MetaTemplate, ProviderFamily, Slots,
    PREDEFINED_ASPECTS,
};
use crate::rng;
use crate::templates::{format_contexts, tag_spans, TaskKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CritiqueError {
    #[error("cannot sample {requested} critique examples from a split of {available}")]
    NotEnoughExamples { requested: usize, available: usize },
    #[error("critique batch is empty")]
    EmptyBatch,
    #[error("predefined aspect list is empty")]
    NoAspects,
}

/// One named comparison dimension with its definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectDefinition {
    pub name: String,
    pub definition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "variant", content = "aspects", rename_all = "snake_case")]
pub enum CritiqueVariant {
    /// The critic picks its own dimensions.
    #[default]
    MultiAspectFree,
    /// Plain comparison without dimensions.
    NoAspect,
    PredefinedAspects(Vec<AspectDefinition>),
}

impl CritiqueVariant {
    /// The four shipped aspects: verbosity, comprehensiveness, precision, style.
    pub fn predefined_default() -> Self {
        CritiqueVariant::PredefinedAspects(default_aspects())
    }

    pub fn check(&self) -> Result<(), CritiqueError> {
        match self {
            CritiqueVariant::PredefinedAspects(a) if a.is_empty() => Err(CritiqueError::NoAspects),
            _ => Ok(()),
        }
    }
}

pub fn default_aspects() -> Vec<AspectDefinition> {
    PREDEFINED_ASPECTS
        .lines()
        .filter_map(|l| l.strip_prefix("- "))
        .filter_map(|l| l.split_once(": "))
        .map(|(name, def)| AspectDefinition {
            name: name.to_owned(),
            definition: def.trim_end().to_owned(),
        })
        .collect()
}

/// An evaluated training example shown to the critic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CritiqueExample {
    pub input: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contexts: Vec<String>,
    pub prediction: String,
    pub reference: String,
}

/// Seeded draw of `n` distinct items.
pub fn sample_critique_examples<T: Clone>(
    train: &[T],
    n: usize,
    seed: u64,
    draw: u64,
) -> Result<Vec<T>, CritiqueError> {
    if n > train.len() {
        return Err(CritiqueError::NotEnoughExamples {
            requested: n,
            available: train.len(),
        });
    }
    let mut r = rng::derived(seed, "critique-batch", draw);
    Ok(rng::sample_indices(&mut r, train.len(), n)
        .into_iter()
        .map(|i| train[i].clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CritiqueOptions<'a> {
    pub kind: TaskKind,
    pub family: ProviderFamily,
    pub variant: &'a CritiqueVariant,
    /// Frozen main prompt when only a suffix is being tuned.
    pub main_prompt: Option<&'a str>,
}

const SUFFIX_CLAUSE: &str = "The instruction is a fixed main prompt in <main_prompt> tags followed by a suffix in <suffix> tags. Critique and suggest changes to the suffix only; the main prompt cannot be changed.";

/// Directive lines of the resource rewritten for `variant`; numbering is
/// kept contiguous.
fn directives(resource: &str, variant: &CritiqueVariant, suffix: bool) -> String {
    let mut n = 0;
    let mut last_directive = 0;
    let text = edit_lines(resource, |line| {
        let Some((k, body)) = numbered(line) else {
            return LineEdit::Keep;
        };
        let out = match (variant, k) {
            (CritiqueVariant::MultiAspectFree, _) => Some(body.to_owned()),
            (CritiqueVariant::NoAspect, 1) => None,
            (CritiqueVariant::NoAspect, _) => Some(body.replace(" on each dimension", "")),
            (CritiqueVariant::PredefinedAspects(aspects), 1) => {
                let object = body
                    .split_once("to compare ")
                    .and_then(|(_, r)| r.split_once(", e.g.,"))
                    .map(|(o, _)| o)
                    .unwrap_or("the predictions and references");
                let mut s = format!("Compare {object} on the following dimensions:");
                for a in aspects {
                    s.push_str(&format!("\n- {}: {}", a.name, a.definition));
                }
                Some(s)
            }
            (CritiqueVariant::PredefinedAspects(_), _) => Some(body.to_owned()),
        };
        match out {
            None => LineEdit::Drop,
            Some(body) => {
                n += 1;
                last_directive = n;
                LineEdit::Replace(format!("{n}. {body}"))
            }
        }
    });
    if suffix {
        let mut text = text;
        if !text.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(&format!("{}. {SUFFIX_CLAUSE}\n", last_directive + 1));
        text
    } else {
        text
    }
}

/// Instantiates the critique meta-prompt for one candidate.
pub fn build_critique_prompt(
    instruction: &str,
    batch: &[CritiqueExample],
    opts: CritiqueOptions<'_>,
) -> Result<String, CritiqueError> {
    if batch.is_empty() {
        return Err(CritiqueError::EmptyBatch);
    }
    opts.variant.check()?;
    let resource = critique_resource(opts.kind, opts.family);
    let text = directives(resource, opts.variant, opts.main_prompt.is_some());
    let shown = match opts.main_prompt {
        Some(main) => format!("\n<main_prompt>\n{main}\n</main_prompt>\n<suffix>\n{instruction}\n</suffix>\n"),
        None => instruction.to_owned(),
    };
    let globals = slots([("instruction", shown)]);
    let stanzas: Vec<Slots> = batch
        .iter()
        .enumerate()
        .map(|(i, ex)| match opts.kind {
            TaskKind::Summarization => slots([
                ("id", (i + 1).to_string()),
                ("document", ex.input.clone()),
                ("predicted_summary", ex.prediction.clone()),
                ("reference_summary", ex.reference.clone()),
            ]),
            TaskKind::Qa => slots([
                ("id", (i + 1).to_string()),
                ("question", ex.input.clone()),
                ("context", format_contexts(&ex.contexts)),
                ("generated_answer", ex.prediction.clone()),
                ("gold_answer", ex.reference.clone()),
            ]),
        })
        .collect();
    Ok(MetaTemplate::parse(&text).render(&globals, &[stanzas]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    Structured,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectCritique {
    pub name: String,
    pub critique: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CritiqueReport {
    /// The completion exactly as received.
    pub raw_text: String,
    pub aspects: Vec<AspectCritique>,
    /// Action items that could not be tied to a single aspect.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suggestions: Vec<String>,
    pub parse_mode: ParseMode,
}

impl CritiqueReport {
    /// Text fed back to the optimizer: the `<critique>` body when present,
    /// otherwise the whole completion.
    pub fn trajectory_text(&self) -> &str {
        tag_spans(&self.raw_text, "critique")
            .into_iter()
            .next()
            .unwrap_or(&self.raw_text)
            .trim()
    }
}

fn bullet(line: &str) -> Option<&str> {
    let t = line.trim_start();
    t.strip_prefix("- ")
        .or_else(|| t.strip_prefix("* "))
        .or_else(|| t.strip_prefix("• "))
        .map(str::trim)
}

fn is_suggestion_heading(line: &str) -> bool {
    let l = line.to_lowercase();
    bullet(line).is_none() && (l.contains("action item") || l.contains("suggestion"))
}

/// `"Name: text"` with a short name.
fn named(item: &str) -> Option<(&str, &str)> {
    let (name, text) = item.split_once(':')?;
    let name = name.trim().trim_matches('*').trim();
    let words = name.split_whitespace().count();
    (1..=6).contains(&words).then_some((name, text.trim()))
}

pub fn parse_critique(completion: &str) -> CritiqueReport {
    let span = tag_spans(completion, "critique").into_iter().next();
    let Some(body) = span else {
        return CritiqueReport {
            raw_text: completion.to_owned(),
            aspects: Vec::new(),
            suggestions: Vec::new(),
            parse_mode: ParseMode::Raw,
        };
    };
    let mut aspects: Vec<AspectCritique> = Vec::new();
    let mut loose = Vec::new();
    let mut in_suggestions = false;
    for line in body.lines() {
        if is_suggestion_heading(line) {
            in_suggestions = true;
            continue;
        }
        let Some(item) = bullet(line) else { continue };
        if in_suggestions {
            loose.push(item.to_owned());
        } else if let Some((name, text)) = named(item) {
            aspects.push(AspectCritique {
                name: name.to_owned(),
                critique: text.to_owned(),
                suggestion: None,
            });
        }
    }
    let mut unattached = Vec::new();
    let positional = loose.len() == aspects.len();
    for (i, s) in loose.into_iter().enumerate() {
        let by_name = named(&s).and_then(|(n, t)| {
            aspects
                .iter()
                .position(|a| a.name.eq_ignore_ascii_case(n) && a.suggestion.is_none())
                .map(|p| (p, t.to_owned()))
        });
        match by_name {
            Some((p, t)) => aspects[p].suggestion = Some(t),
            None if positional && aspects[i].suggestion.is_none() => aspects[i].suggestion = Some(s),
            None => unattached.push(s),
        }
    }
    CritiqueReport {
        raw_text: completion.to_owned(),
        aspects,
        suggestions: unattached,
        parse_mode: ParseMode::Structured,
    }
}
