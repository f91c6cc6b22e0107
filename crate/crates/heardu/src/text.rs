//! Text normalization and tokenization shared by every pipeline stage.
//!
//! All ingested text goes through [`normalize_text`] (NFC plus whitespace
//! collapse) so that lexical matching between entity surfaces, generated
//! sentences, and ASR hypotheses is deterministic.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Marker characters reserved for the entity-aware transcript encoding.
/// They may not appear in entity surfaces or generated sentences.
pub const RESERVED_MARKER_CHARS: [char; 6] = ['[', ']', '(', ')', '<', '>'];

/// Returns true if `s` contains any reserved marker character.
pub fn contains_marker_chars(s: &str) -> bool {
    s.chars().any(is_marker_char)
}

/// Returns true for the six reserved marker characters.
pub fn is_marker_char(c: char) -> bool {
    RESERVED_MARKER_CHARS.contains(&c)
}

/// Token granularity: whitespace-delimited words or individual characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizationMode {
    /// Maximal non-whitespace runs are tokens.
    Word,
    /// Every non-whitespace character is a token.
    Char,
}

impl TokenizationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenizationMode::Word => "word",
            TokenizationMode::Char => "char",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "word" => Some(TokenizationMode::Word),
            "char" => Some(TokenizationMode::Char),
            _ => None,
        }
    }
}

/// NFC-normalize and collapse internal whitespace runs to single spaces,
/// trimming the ends. The canonical form for all stored text.
pub fn normalize_text(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Unicode-aware case folding. Full casefold tables are overkill here;
/// `to_lowercase` covers the scripts this pipeline handles.
pub fn casefold(s: &str) -> String {
    s.to_lowercase()
}

/// Split `text` into tokens. Word mode returns maximal non-whitespace runs,
/// char mode returns one token per non-whitespace character. Empty input
/// yields an empty list.
pub fn tokenize(text: &str, mode: TokenizationMode) -> Vec<String> {
    match mode {
        TokenizationMode::Word => text.split_whitespace().map(str::to_owned).collect(),
        TokenizationMode::Char => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
    }
}

/// Inverse of [`tokenize`] up to whitespace normalization: word tokens are
/// joined with single spaces, char tokens are concatenated.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S], mode: TokenizationMode) -> String {
    let parts: Vec<&str> = tokens.iter().map(|t| t.as_ref()).collect();
    match mode {
        TokenizationMode::Word => parts.join(" "),
        TokenizationMode::Char => parts.concat(),
    }
}
