//! Label normalization and tokenization shared by the knowledge base,
//! the lexicon and the graph passes.

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize_label(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Strips leading and trailing punctuation from a single word and lowercases it.
pub fn clean_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Whitespace tokenization with punctuation stripped and empty tokens dropped.
/// No plural folding.
pub fn raw_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(clean_word)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Naive plural folding: a trailing `s` is removed when the stripped form is
/// known to `known`.
pub fn fold_plural(token: &str, known: impl Fn(&str) -> bool) -> String {
    if token.len() > 1 {
        if let Some(stem) = token.strip_suffix('s') {
            if known(stem) {
                return stem.to_string();
            }
        }
    }
    token.to_string()
}

/// Tokenizes `text` and folds plurals against a vocabulary.
pub fn tokens_with(text: &str, known: impl Fn(&str) -> bool) -> Vec<String> {
    raw_tokens(text)
        .into_iter()
        .map(|t| fold_plural(&t, &known))
        .collect()
}
