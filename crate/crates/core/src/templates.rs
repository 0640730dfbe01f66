//! Task-prompt templates with movable placeholders.
//!
//! Placeholder detection is purely lexical on the literal tokens
//! `INSERT_INPUT_HERE`, `INSERT_EXAMPLES_HERE`, `INSERT_CONTEXT_HERE` and
//! `INSERT_QUESTION_HERE`. Any other `INSERT_*_HERE` token is a violation.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Placeholder {
    Input,
    Examples,
    Context,
    Question,
}

impl Placeholder {
    pub const ALL: [Placeholder; 4] = [
        Placeholder::Input,
        Placeholder::Examples,
        Placeholder::Context,
        Placeholder::Question,
    ];

    pub const fn literal(self) -> &'static str {
        match self {
            Placeholder::Input => "INSERT_INPUT_HERE",
            Placeholder::Examples => "INSERT_EXAMPLES_HERE",
            Placeholder::Context => "INSERT_CONTEXT_HERE",
            Placeholder::Question => "INSERT_QUESTION_HERE",
        }
    }

    fn from_literal(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.literal() == s)
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.literal())
    }
}

/// Task family. Decides the required placeholder, answer tag and
/// meta-prompt wording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    #[default]
    Summarization,
    Qa,
}

impl TaskKind {
    pub const fn required_placeholder(self) -> Placeholder {
        match self {
            TaskKind::Summarization => Placeholder::Input,
            TaskKind::Qa => Placeholder::Question,
        }
    }

    pub const fn answer_tag(self) -> &'static str {
        match self {
            TaskKind::Summarization => "summary",
            TaskKind::Qa => "answer",
        }
    }

    /// Tag wrapping an input inside example blocks.
    pub const fn input_tag(self) -> &'static str {
        match self {
            TaskKind::Summarization => "input",
            TaskKind::Qa => "question",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "summarization" | "summary" => Ok(TaskKind::Summarization),
            "qa" | "rag" => Ok(TaskKind::Qa),
            other => Err(format!("unknown task kind `{other}` (expected summarization or qa)")),
        }
    }
}

/// Which optional placeholders a run can fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemplatePolicy {
    pub kind: TaskKind,
    pub allow_examples: bool,
    pub allow_context: bool,
}

impl TemplatePolicy {
    pub fn permissive(kind: TaskKind) -> Self {
        Self {
            kind,
            allow_examples: true,
            allow_context: true,
        }
    }

    fn allows(&self, p: Placeholder) -> bool {
        match p {
            Placeholder::Input => self.kind == TaskKind::Summarization,
            Placeholder::Question => self.kind == TaskKind::Qa,
            Placeholder::Examples => self.allow_examples,
            Placeholder::Context => self.allow_context,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum Violation {
    Missing { placeholder: Placeholder },
    Duplicated { placeholder: Placeholder, count: usize },
    NotAllowed { placeholder: Placeholder },
    Unknown { token: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Missing { placeholder } => write!(f, "{placeholder} missing"),
            Violation::Duplicated { placeholder, count } => {
                write!(f, "{placeholder} appears {count} times")
            }
            Violation::NotAllowed { placeholder } => write!(f, "{placeholder} not allowed here"),
            Violation::Unknown { token } => write!(f, "unknown placeholder {token}"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template declares {0} but no block was supplied")]
    MissingBlock(Placeholder),
    #[error("a {0} block was supplied but the template does not declare it")]
    UnexpectedBlock(Placeholder),
    #[error("example block needs at least one example")]
    NoExamples,
    #[error("invalid template: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// A validated task-prompt template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    text: String,
    placeholders: BTreeSet<Placeholder>,
    kind: TaskKind,
}

/// Every `INSERT_<UPPER_OR_UNDERSCORE>_HERE` token with its byte offset.
fn scan_tokens(text: &str) -> Vec<(usize, &str)> {
    const PREFIX: &str = "INSERT_";
    const SUFFIX: &str = "_HERE";
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find(PREFIX) {
        let start = from + rel;
        let body_start = start + PREFIX.len();
        let body_len = text[body_start..]
            .bytes()
            .take_while(|b| b.is_ascii_uppercase() || *b == b'_')
            .count();
        let body = &text[body_start..body_start + body_len];
        // The body greedily includes `_HERE`; accept the longest prefix that
        // ends with it.
        match body.rfind(SUFFIX).filter(|&i| i > 0) {
            Some(i) => {
                let end = body_start + i + SUFFIX.len();
                out.push((start, &text[start..end]));
                from = end;
            }
            None => from = body_start,
        }
    }
    out
}

/// Checks `text` against the placeholder rules of `policy`.
pub fn validate_with(text: &str, policy: &TemplatePolicy) -> Result<PromptTemplate, Vec<Violation>> {
    let mut violations = Vec::new();
    let mut counts = [0usize; 4];
    let mut unknown = BTreeSet::new();
    for (_, token) in scan_tokens(text) {
        match Placeholder::from_literal(token) {
            Some(p) => counts[p as usize] += 1,
            None => {
                unknown.insert(token.to_owned());
            }
        }
    }
    let required = policy.kind.required_placeholder();
    let mut placeholders = BTreeSet::new();
    for p in Placeholder::ALL {
        let c = counts[p as usize];
        if c == 0 {
            if p == required {
                violations.push(Violation::Missing { placeholder: p });
            }
            continue;
        }
        placeholders.insert(p);
        if !policy.allows(p) {
            violations.push(Violation::NotAllowed { placeholder: p });
        } else if c > 1 {
            violations.push(Violation::Duplicated {
                placeholder: p,
                count: c,
            });
        }
    }
    violations.extend(unknown.into_iter().map(|token| Violation::Unknown { token }));
    if violations.is_empty() {
        Ok(PromptTemplate {
            text: text.to_owned(),
            placeholders,
            kind: policy.kind,
        })
    } else {
        Err(violations)
    }
}

/// Validates with every optional placeholder permitted.
pub fn validate(text: &str, kind: TaskKind) -> Result<PromptTemplate, Vec<Violation>> {
    validate_with(text, &TemplatePolicy::permissive(kind))
}

impl PromptTemplate {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn placeholders(&self) -> &BTreeSet<Placeholder> {
        &self.placeholders
    }

    pub fn declares(&self, p: Placeholder) -> bool {
        self.placeholders.contains(&p)
    }

    /// Fixed layout used when the template structure is not optimized: the
    /// instruction first, then examples and context when enabled, then the
    /// input at the end.
    pub fn fixed_layout(instruction: &str, policy: &TemplatePolicy) -> Result<Self, Vec<Violation>> {
        let mut text = instruction.trim_end().to_owned();
        if policy.allow_examples {
            text.push_str("\n\n");
            text.push_str(Placeholder::Examples.literal());
        }
        if policy.allow_context {
            text.push_str("\n\n");
            text.push_str(Placeholder::Context.literal());
        }
        text.push_str("\n\n");
        text.push_str(policy.kind.required_placeholder().literal());
        validate_with(&text, policy)
    }

    /// Accepts `text` as-is when valid; otherwise, if the only problem is the
    /// missing input placeholder, falls back to [`Self::fixed_layout`].
    pub fn from_seed(text: &str, policy: &TemplatePolicy) -> Result<Self, Vec<Violation>> {
        match validate_with(text, policy) {
            Ok(t) => Ok(t),
            Err(v)
                if v.iter().all(|x| {
                    matches!(x, Violation::Missing { placeholder } if *placeholder == policy.kind.required_placeholder())
                }) =>
            {
                Self::fixed_layout(text, policy)
            }
            Err(v) => Err(v),
        }
    }

    /// Literal single-pass substitution. Blocks must be supplied exactly when
    /// the template declares the matching placeholder.
    pub fn render(
        &self,
        input: &str,
        examples: Option<&str>,
        context: Option<&str>,
    ) -> Result<String, TemplateError> {
        for (p, block) in [(Placeholder::Examples, examples), (Placeholder::Context, context)] {
            match (self.declares(p), block.is_some()) {
                (true, false) => return Err(TemplateError::MissingBlock(p)),
                (false, true) => return Err(TemplateError::UnexpectedBlock(p)),
                _ => {}
            }
        }
        let mut out = String::with_capacity(self.text.len() + input.len());
        let mut last = 0;
        for (start, token) in scan_tokens(&self.text) {
            let replacement = match Placeholder::from_literal(token) {
                Some(Placeholder::Input | Placeholder::Question) => input,
                Some(Placeholder::Examples) => examples.unwrap_or_default(),
                Some(Placeholder::Context) => context.unwrap_or_default(),
                None => continue,
            };
            out.push_str(&self.text[last..start]);
            out.push_str(replacement);
            last = start + token.len();
        }
        out.push_str(&self.text[last..]);
        Ok(out)
    }
}

/// Result of pulling the answer out of a completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extracted {
    pub text: String,
    pub tagged: bool,
}

/// Content of the first `<tag>…</tag>` span, trimmed. Without one, the
/// whole completion trimmed and flagged as untagged.
pub fn extract_tagged(completion: &str, tag: &str) -> Extracted {
    match tag_spans(completion, tag).into_iter().next() {
        Some(inner) => Extracted {
            text: inner.trim().to_owned(),
            tagged: true,
        },
        None => Extracted {
            text: completion.trim().to_owned(),
            tagged: false,
        },
    }
}

/// All closed `<tag>…</tag>` spans in order, untrimmed.
pub fn tag_spans<'a>(text: &'a str, tag: &str) -> Vec<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let mut spans = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find(&open) {
        let start = from + rel + open.len();
        match text[start..].find(&close) {
            Some(end_rel) => {
                spans.push(&text[start..start + end_rel]);
                from = start + end_rel + close.len();
            }
            None => break,
        }
    }
    spans
}

/// Wraps `body` in `<tag>` lines.
pub(crate) fn tagged_block(tag: &str, body: &str) -> String {
    format!("<{tag}>\n{body}\n</{tag}>")
}

/// Few-shot block in XML stanzas: one `<example>` per pair, in order.
pub fn format_examples<S: AsRef<str>>(pairs: &[(S, S)], kind: TaskKind) -> Result<String, TemplateError> {
    if pairs.is_empty() {
        return Err(TemplateError::NoExamples);
    }
    let mut out = String::from("<examples>\n");
    for (input, reference) in pairs {
        out.push_str("<example>\n");
        out.push_str(&tagged_block(kind.input_tag(), input.as_ref()));
        out.push('\n');
        out.push_str(&tagged_block(kind.answer_tag(), reference.as_ref()));
        out.push_str("\n</example>\n");
    }
    out.push_str("</examples>");
    Ok(out)
}

/// Context passages, each in its own `<context>` block.
pub fn format_contexts<S: AsRef<str>>(passages: &[S]) -> String {
    passages
        .iter()
        .map(|p| tagged_block("context", p.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}
