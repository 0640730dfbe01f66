//! Versioned meta-prompt resources and their renderer.
//!
//! Resources are stored verbatim. Inside them, `{name}` marks an
//! interpolation slot and a line consisting of `...` repeats the stanza just
//! above it (from its opener line such as `<example>` down to the `...`).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::templates::TaskKind;

/// Prompt dialect of the critique/optimizer model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderFamily {
    #[default]
    Claude,
    Mistral,
}

pub const RESOURCE_VERSION: &str = "v1";

const CRITIQUE_SUM_CLAUDE: &str = include_str!("../resources/critique_summarization_claude.txt");
const CRITIQUE_SUM_MISTRAL: &str = include_str!("../resources/critique_summarization_mistral.txt");
const CRITIQUE_QA_CLAUDE: &str = include_str!("../resources/critique_qa_claude.txt");
const OPTIMIZER_SUM_CLAUDE: &str = include_str!("../resources/optimizer_summarization_claude.txt");
const OPTIMIZER_SUM_MISTRAL: &str = include_str!("../resources/optimizer_summarization_mistral.txt");
const OPTIMIZER_QA_CLAUDE: &str = include_str!("../resources/optimizer_qa_claude.txt");
pub(crate) const PREDEFINED_ASPECTS: &str = include_str!("../resources/predefined_aspects.txt");

/// Critique meta-prompt text. QA has a single dialect.
pub fn critique_resource(kind: TaskKind, family: ProviderFamily) -> &'static str {
    match (kind, family) {
        (TaskKind::Summarization, ProviderFamily::Claude) => CRITIQUE_SUM_CLAUDE,
        (TaskKind::Summarization, ProviderFamily::Mistral) => CRITIQUE_SUM_MISTRAL,
        (TaskKind::Qa, _) => CRITIQUE_QA_CLAUDE,
    }
}

/// Optimizer meta-prompt text. QA has a single dialect.
pub fn optimizer_resource(kind: TaskKind, family: ProviderFamily) -> &'static str {
    match (kind, family) {
        (TaskKind::Summarization, ProviderFamily::Claude) => OPTIMIZER_SUM_CLAUDE,
        (TaskKind::Summarization, ProviderFamily::Mistral) => OPTIMIZER_SUM_MISTRAL,
        (TaskKind::Qa, _) => OPTIMIZER_QA_CLAUDE,
    }
}

const REPEAT_MARKER: &str = "...";
const STANZA_OPENERS: [&str; 4] = ["<example>", "<rated_instruction>", "EXAMPLE {id}", "INSTRUCTION:"];

pub type Slots = HashMap<&'static str, String>;

#[derive(Debug, Clone, PartialEq)]
enum Part {
    Lines(Vec<String>),
    Repeat(Vec<String>),
}

/// A parsed meta-prompt: literal line runs and repeatable stanzas.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaTemplate {
    parts: Vec<Part>,
    trailing_newline: bool,
}

impl MetaTemplate {
    pub fn parse(text: &str) -> Self {
        let trailing_newline = text.ends_with('\n');
        let mut parts = Vec::new();
        let mut pending: Vec<String> = Vec::new();
        for line in text.lines() {
            if line == REPEAT_MARKER {
                let start = pending
                    .iter()
                    .rposition(|l| STANZA_OPENERS.contains(&l.trim_end()))
                    .unwrap_or(0);
                let stanza = pending.split_off(start);
                if !pending.is_empty() {
                    parts.push(Part::Lines(std::mem::take(&mut pending)));
                }
                parts.push(Part::Repeat(stanza));
            } else {
                pending.push(line.to_owned());
            }
        }
        if !pending.is_empty() {
            parts.push(Part::Lines(pending));
        }
        Self {
            parts,
            trailing_newline,
        }
    }

    /// Number of repeatable stanzas, in order.
    pub fn repeat_count(&self) -> usize {
        self.parts.iter().filter(|p| matches!(p, Part::Repeat(_))).count()
    }

    /// Fills global slots and, for the i-th stanza, one copy per entry of
    /// `stanzas[i]`. A line holding only an empty slot is dropped.
    pub fn render(&self, globals: &Slots, stanzas: &[Vec<Slots>]) -> String {
        let mut out: Vec<String> = Vec::new();
        let mut stanza_idx = 0;
        for part in &self.parts {
            match part {
                Part::Lines(lines) => {
                    for l in lines {
                        push_line(&mut out, l, globals, None);
                    }
                }
                Part::Repeat(lines) => {
                    let items = stanzas.get(stanza_idx).map(Vec::as_slice).unwrap_or(&[]);
                    for item in items {
                        for l in lines {
                            push_line(&mut out, l, globals, Some(item));
                        }
                    }
                    stanza_idx += 1;
                }
            }
        }
        let mut text = out.join("\n");
        if self.trailing_newline {
            text.push('\n');
        }
        text
    }
}

fn lookup<'a>(name: &str, globals: &'a Slots, local: Option<&'a Slots>) -> Option<&'a str> {
    local
        .and_then(|l| l.get(name))
        .or_else(|| globals.get(name))
        .map(String::as_str)
}

fn push_line(out: &mut Vec<String>, line: &str, globals: &Slots, local: Option<&Slots>) {
    if let Some(name) = line.strip_prefix('{').and_then(|l| l.strip_suffix('}')) {
        if lookup(name, globals, local) == Some("") {
            return;
        }
    }
    out.push(fill(line, globals, local));
}

/// Single-pass `{name}` substitution; unknown names stay literal.
fn fill(line: &str, globals: &Slots, local: Option<&Slots>) -> String {
    let mut out = String::with_capacity(line.len());
    let mut rest = line;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        let name = close.map(|c| &after[..c]);
        match name.filter(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')) {
            Some(n) => match lookup(n, globals, local) {
                Some(v) => {
                    out.push_str(v);
                    rest = &after[n.len() + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            },
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Convenience for building slot maps.
pub fn slots<const N: usize>(pairs: [(&'static str, String); N]) -> Slots {
    pairs.into_iter().collect()
}

/// Lines of a resource with a line-level edit applied.
pub(crate) fn edit_lines(text: &str, mut edit: impl FnMut(&str) -> LineEdit) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        let (body, nl) = match line.strip_suffix('\n') {
            Some(b) => (b, "\n"),
            None => (line, ""),
        };
        match edit(body) {
            LineEdit::Keep => out.push_str(line),
            LineEdit::Drop => {}
            LineEdit::Replace(s) => {
                out.push_str(&s);
                out.push_str(nl);
            }
        }
    }
    out
}

pub(crate) enum LineEdit {
    Keep,
    Drop,
    Replace(String),
}

/// `"3. text"` → `Some((3, "text"))`.
pub(crate) fn numbered(line: &str) -> Option<(u32, &str)> {
    let (num, rest) = line.split_once(". ")?;
    let n = num.parse().ok()?;
    Some((n, rest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resources_keep_verbatim_markers() {
        for kind in [TaskKind::Summarization, TaskKind::Qa] {
            for fam in [ProviderFamily::Claude, ProviderFamily::Mistral] {
                assert_eq!(MetaTemplate::parse(critique_resource(kind, fam)).repeat_count(), 1);
                assert_eq!(MetaTemplate::parse(optimizer_resource(kind, fam)).repeat_count(), 2);
            }
        }
        assert!(CRITIQUE_SUM_MISTRAL.contains("INSTRUCTION: \n{instruction}"));
    }

    #[test]
    fn repeat_and_fill() {
        let t = MetaTemplate::parse("head {x}\n<example>\nv={v}\n</example>\n...\ntail\n");
        let out = t.render(
            &slots([("x", "X".into())]),
            &[vec![slots([("v", "1".into())]), slots([("v", "{x}".into())])]],
        );
        assert_eq!(out, "head X\n<example>\nv=1\n</example>\n<example>\nv={x}\n</example>\ntail\n");
    }

    #[test]
    fn empty_slot_line_dropped() {
        let t = MetaTemplate::parse("a\n{context}\nb");
        assert_eq!(t.render(&slots([("context", String::new())]), &[]), "a\nb");
        assert_eq!(t.render(&slots([("context", "C".into())]), &[]), "a\nC\nb");
    }

    #[test]
    fn unknown_and_braces_literal() {
        let t = MetaTemplate::parse("{nope} {} {A} {x");
        assert_eq!(t.render(&Slots::new(), &[]), "{nope} {} {A} {x");
    }

    #[test]
    fn numbered_lines() {
        assert_eq!(numbered("12. go"), Some((12, "go")));
        assert_eq!(numbered("- x"), None);
    }
}
