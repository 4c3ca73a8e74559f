use std::sync::OnceLock;

use regex::Regex;

fn sentence_boundary() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[.!?]+(?:\s+|$)").expect("valid regex"))
}

/// Characters allowed inside a word token besides alphanumerics.
fn is_inner_word_char(c: char) -> bool {
    matches!(c, '-' | '\'' | '&' | '_' | '.' | '/')
}

/// Characters that may lead or trail a numeric token and are kept verbatim.
fn is_numeric_affix(c: char) -> bool {
    matches!(c, '$' | '€' | '£' | '¥' | '%' | '+' | '-')
}

fn normalise_token(raw: &str) -> Option<String> {
    let has_digit = raw.chars().any(|c| c.is_ascii_digit());
    let tok = if has_digit {
        // numbers are kept verbatim, currency symbols and suffixes included
        raw.trim_matches(|c: char| !(c.is_alphanumeric() || is_numeric_affix(c)))
    } else {
        raw.trim_matches(|c: char| !c.is_alphanumeric())
    };
    if tok.is_empty() {
        return None;
    }
    if !has_digit && !tok.chars().all(|c| c.is_alphanumeric() || is_inner_word_char(c)) {
        // split on interior punctuation we don't keep, e.g. "profit,loss"
        return Some(
            tok.split(|c: char| !(c.is_alphanumeric() || is_inner_word_char(c)))
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join(" "),
        );
    }
    Some(tok.to_string())
}

/// Split cleaned text into sentences (`.`, `!`, `?` followed by whitespace or
/// end of text) and each sentence into whitespace-delimited tokens with
/// surrounding punctuation removed. Numeric tokens keep currency symbols,
/// decimal points and suffixes (`$4.2m`).
pub fn tokenize(cleaned: &str) -> Vec<Vec<String>> {
    sentence_boundary()
        .split(cleaned)
        .filter_map(|sentence| {
            let tokens: Vec<String> = sentence
                .split_whitespace()
                .filter_map(normalise_token)
                .flat_map(|t| t.split(' ').map(str::to_lowercase).collect::<Vec<_>>())
                .filter(|t| !t.is_empty())
                .collect();
            (!tokens.is_empty()).then_some(tokens)
        })
        .collect()
}
