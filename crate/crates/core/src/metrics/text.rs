//! Text normalization used by the metrics.
//!
//! Two conventions live here. ROUGE uses [`tokenize`]: lowercase, every
//! non-alphanumeric character becomes a separator. QA metrics use
//! [`normalize_answer`]: lowercase, ASCII punctuation deleted, articles
//! `a`/`an`/`the` dropped, whitespace collapsed.

/// Lowercased, punctuation-stripped, whitespace-split tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Answer tokens after the QA normalization rule.
pub fn answer_tokens(text: &str) -> Vec<String> {
    let lowered: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    lowered
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .map(str::to_owned)
        .collect()
}

/// Lowercase, ASCII punctuation deleted, whitespace collapsed; articles kept
/// so option labels such as `A` survive.
pub fn normalize_choice(text: &str) -> String {
    let lowered: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalized answer string (tokens joined by single spaces).
pub fn normalize_answer(text: &str) -> String {
    answer_tokens(text).join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The cat."), vec!["the", "cat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a  b"), vec!["a", "b"]);
        assert_eq!(tokenize("x,y;z"), vec!["x", "y", "z"]);
    }

    #[test]
    fn answer_normalization() {
        assert_eq!(normalize_answer("The  Paris!"), "paris");
        assert_eq!(normalize_answer("an Apple, a day"), "apple day");
        // punctuation is deleted, not split on
        assert_eq!(normalize_answer("don't"), "dont");
        assert_eq!(normalize_answer("theater"), "theater");
    }
}
