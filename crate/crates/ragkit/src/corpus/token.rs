//! Shared tokenizer: Unicode word-boundary segmentation plus lowercasing.
//!
//! No stemming and no stopword removal; hyphenated compounds split at the
//! word boundary ("COVID-19" -> ["covid", "19"]) and pure-punctuation
//! segments are dropped.

use unicode_segmentation::UnicodeSegmentation;

/// An ordered stream of normalized terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    tokens: Vec<String>,
}

impl TokenStream {
    pub fn new(tokens: Vec<String>) -> Self {
        Self { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Space-joined form; `tokenize` is idempotent over it.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }

    /// Set semantics: first occurrence of each term, order preserved.
    pub fn deduped(&self) -> TokenStream {
        let mut seen = std::collections::HashSet::new();
        TokenStream {
            tokens: self
                .tokens
                .iter()
                .filter(|t| seen.insert(t.as_str()))
                .cloned()
                .collect(),
        }
    }
}

impl<'a> IntoIterator for &'a TokenStream {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

/// Segments `text` at Unicode word boundaries and lowercases each word.
///
/// Deterministic; empty input yields an empty stream. Combining marks can
/// glue a preceding space into a word segment, so each word is trimmed and
/// words that reduce to nothing are dropped.
pub fn tokenize(text: &str) -> TokenStream {
    TokenStream {
        tokens: text
            .unicode_words()
            .map(|w| w.trim_matches(char::is_whitespace).to_lowercase())
            .filter(|t| !t.is_empty())
            .collect(),
    }
}
