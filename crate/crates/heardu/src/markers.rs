//! Entity-aware transcript encoding: typed bracket markers around entity
//! spans, and the strict/lenient parser that inverts them.
//!
//! Marker spacing is mode-specific so decoding stays unambiguous: word mode
//! separates markers from content with single spaces (`[ salva kiir ]`),
//! char mode writes them adjacent (`[张三]`).

use thiserror::Error;

use crate::entity::EntityType;
use crate::tags::{BioTag, TaggedTranscript};
use crate::text::TokenizationMode;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MarkerError {
    #[error("no marker pair assigned to entity type {0}")]
    NoMarkerForType(String),
    #[error("marker table supports at most {max} types, got {got}")]
    TooManyTypes { max: usize, got: usize },
}

/// Strict decode failures. Positions are character indices into the input.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unbalanced marker at character {position}")]
    UnbalancedMarkers { position: usize },
    #[error("marker span at character {position} overlaps a previous span")]
    OverlappingSpans { position: usize },
    #[error("marker span at character {position} encloses no tokens")]
    EmptySpan { position: usize },
    #[error("marker at character {position} cuts through a token")]
    MisalignedMarker { position: usize },
}

/// How to treat malformed markers while decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// Any grammar violation is an error.
    Strict,
    /// Violating markers are deleted and parsing continues. Never errors;
    /// intended for noisy ASR hypotheses.
    Lenient,
}

const BUILTIN_PAIRS: [(char, char); 3] = [('[', ']'), ('(', ')'), ('<', '>')];

/// Maps entity types to their open/close marker pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerTable {
    pairs: Vec<(EntityType, char, char)>,
}

impl Default for MarkerTable {
    /// `[ ]` for PER, `( )` for LOC, `< >` for ORG.
    fn default() -> Self {
        MarkerTable::for_types(&crate::entity::default_type_set())
            .expect("default set fits the builtin pairs")
    }
}

impl MarkerTable {
    /// Assigns the builtin bracket pairs to `types` in order. At most three
    /// types are supported.
    pub fn for_types(types: &[EntityType]) -> Result<Self, MarkerError> {
        if types.len() > BUILTIN_PAIRS.len() {
            return Err(MarkerError::TooManyTypes {
                max: BUILTIN_PAIRS.len(),
                got: types.len(),
            });
        }
        Ok(MarkerTable {
            pairs: types
                .iter()
                .cloned()
                .zip(BUILTIN_PAIRS)
                .map(|(t, (open, close))| (t, open, close))
                .collect(),
        })
    }

    pub fn pair_for(&self, etype: &EntityType) -> Option<(char, char)> {
        self.pairs
            .iter()
            .find(|(t, _, _)| t == etype)
            .map(|(_, o, c)| (*o, *c))
    }

    fn classify(&self, ch: char) -> Option<MarkerSym<'_>> {
        for (t, open, close) in &self.pairs {
            if ch == *open {
                return Some(MarkerSym::Open(t));
            }
            if ch == *close {
                return Some(MarkerSym::Close(t));
            }
        }
        None
    }
}

enum MarkerSym<'a> {
    Open(&'a EntityType),
    Close(&'a EntityType),
}

/// A transcript carrying inline entity markers (the E2E training target).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityAwareTranscript {
    text: String,
}

impl EntityAwareTranscript {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn into_text(self) -> String {
        self.text
    }

    /// Wraps an already-encoded string, e.g. read back from a manifest.
    pub fn from_encoded(text: String) -> Self {
        EntityAwareTranscript { text }
    }
}

/// Wraps every maximal tagged span with its type's marker pair.
pub fn encode_entity_aware(
    tagged: &TaggedTranscript,
    table: &MarkerTable,
) -> Result<EntityAwareTranscript, MarkerError> {
    let spans = tagged.spans();
    let mut span_iter = spans.iter().peekable();
    let mut parts: Vec<String> = Vec::with_capacity(tagged.len() + 2 * spans.len());
    let mut pending_close: Option<(char, usize)> = None;

    for (i, token) in tagged.tokens().iter().enumerate() {
        if let Some((close, end)) = pending_close {
            if i == end {
                parts.push(close.to_string());
                pending_close = None;
            }
        }
        if let Some(span) = span_iter.peek() {
            if span.start_token == i {
                let (open, close) = table
                    .pair_for(&span.etype)
                    .ok_or_else(|| MarkerError::NoMarkerForType(span.etype.as_str().to_owned()))?;
                parts.push(open.to_string());
                pending_close = Some((close, span.end_token));
                span_iter.next();
            }
        }
        parts.push(token.clone());
    }
    if let Some((close, _)) = pending_close {
        parts.push(close.to_string());
    }

    let text = match tagged.mode() {
        TokenizationMode::Word => parts.join(" "),
        TokenizationMode::Char => parts.concat(),
    };
    Ok(EntityAwareTranscript { text })
}

/// A marker the lenient decoder deleted, reported for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedMarker {
    /// Character index into the input text.
    pub position: usize,
    pub ch: char,
}

/// Decode result: the recovered transcript plus any markers the lenient
/// parser had to discard (always empty under strict parsing).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub transcript: TaggedTranscript,
    pub dropped: Vec<DroppedMarker>,
}

/// Parses marker-annotated text back into tokens and BIO tags.
///
/// Strict mode enforces the full grammar: balanced, non-nested markers whose
/// boundaries fall on token boundaries. Lenient mode deletes offending
/// markers (reporting them) and never fails.
pub fn decode_entity_aware(
    text: &str,
    mode: TokenizationMode,
    strictness: Strictness,
    table: &MarkerTable,
) -> Result<Decoded, DecodeError> {
    let lenient = strictness == Strictness::Lenient;
    let mut dropped = Vec::new();

    // Pass 1: split marker symbols from plain content, tracking character
    // offsets in the plain text.
    let mut plain = String::new();
    let mut plain_chars = 0usize;
    // (start_plain, end_plain, etype, open_input_pos)
    let mut spans: Vec<(usize, usize, EntityType, usize)> = Vec::new();
    let mut open: Option<(usize, EntityType, usize)> = None;

    for (pos, ch) in text.chars().enumerate() {
        match table.classify(ch) {
            Some(MarkerSym::Open(t)) => {
                if open.is_some() {
                    if lenient {
                        dropped.push(DroppedMarker { position: pos, ch });
                    } else {
                        return Err(DecodeError::UnbalancedMarkers { position: pos });
                    }
                } else {
                    open = Some((plain_chars, t.clone(), pos));
                }
            }
            Some(MarkerSym::Close(t)) => match open.take() {
                Some((start, opened_t, open_pos)) if opened_t == *t => {
                    spans.push((start, plain_chars, opened_t, open_pos));
                }
                Some(other) => {
                    if lenient {
                        dropped.push(DroppedMarker { position: pos, ch });
                        open = Some(other);
                    } else {
                        return Err(DecodeError::UnbalancedMarkers { position: pos });
                    }
                }
                None => {
                    if lenient {
                        dropped.push(DroppedMarker { position: pos, ch });
                    } else {
                        return Err(DecodeError::UnbalancedMarkers { position: pos });
                    }
                }
            },
            None => {
                plain.push(ch);
                plain_chars += 1;
            }
        }
    }
    if let Some((_, _, open_pos)) = open {
        if lenient {
            let ch = text.chars().nth(open_pos).unwrap_or('?');
            dropped.push(DroppedMarker {
                position: open_pos,
                ch,
            });
        } else {
            return Err(DecodeError::UnbalancedMarkers { position: open_pos });
        }
    }

    // Pass 2: tokenize the plain text with character ranges and map span
    // offsets onto token indices.
    let ranged = tokenize_with_ranges(&plain, mode);
    let mut tags = vec![BioTag::Outside; ranged.len()];
    let mut claimed = vec![false; ranged.len()];

    for (start, end, etype, open_pos) in spans {
        let mut covered = Vec::new();
        for (i, (_, t_start, t_end)) in ranged.iter().enumerate() {
            if *t_start < end && start < *t_end {
                if !lenient && (*t_start < start || *t_end > end) {
                    return Err(DecodeError::MisalignedMarker { position: open_pos });
                }
                covered.push(i);
            }
        }
        if covered.is_empty() {
            if lenient {
                let ch = text.chars().nth(open_pos).unwrap_or('?');
                dropped.push(DroppedMarker {
                    position: open_pos,
                    ch,
                });
                continue;
            }
            return Err(DecodeError::EmptySpan { position: open_pos });
        }
        if covered.iter().any(|&i| claimed[i]) {
            if lenient {
                covered.retain(|&i| !claimed[i]);
                if covered.is_empty() {
                    let ch = text.chars().nth(open_pos).unwrap_or('?');
                    dropped.push(DroppedMarker {
                        position: open_pos,
                        ch,
                    });
                    continue;
                }
            } else {
                return Err(DecodeError::OverlappingSpans { position: open_pos });
            }
        }
        let mut first = true;
        for &i in &covered {
            claimed[i] = true;
            tags[i] = if first {
                BioTag::Begin(etype.clone())
            } else {
                BioTag::Inside(etype.clone())
            };
            first = false;
        }
    }

    let tokens: Vec<String> = ranged.into_iter().map(|(tok, _, _)| tok).collect();
    let transcript =
        TaggedTranscript::new(tokens, tags, mode).expect("span assignment preserves BIO validity");
    Ok(Decoded { transcript, dropped })
}

/// Tokens plus their [start, end) character offsets.
fn tokenize_with_ranges(text: &str, mode: TokenizationMode) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    match mode {
        TokenizationMode::Word => {
            let mut current = String::new();
            let mut start = 0usize;
            for (i, ch) in text.chars().enumerate() {
                if ch.is_whitespace() {
                    if !current.is_empty() {
                        out.push((std::mem::take(&mut current), start, i));
                    }
                } else {
                    if current.is_empty() {
                        start = i;
                    }
                    current.push(ch);
                }
            }
            if !current.is_empty() {
                let end = text.chars().count();
                out.push((current, start, end));
            }
        }
        TokenizationMode::Char => {
            for (i, ch) in text.chars().enumerate() {
                if !ch.is_whitespace() {
                    out.push((ch.to_string(), i, i + 1));
                }
            }
        }
    }
    out
}
