//! BIO tag sequences and the token/tag transcript pairing.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::entity::EntityType;
use crate::text::{join_tokens, tokenize, TokenizationMode};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BioError {
    #[error("I-{etype} at position {index} lacks a preceding B-{etype} or I-{etype}")]
    InvalidBioSequence { index: usize, etype: String },
    #[error("token/tag length mismatch: {tokens} tokens vs {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("tag string {0:?} is not O, B-<TYPE>, or I-<TYPE>")]
    BadTagString(String),
}

/// One BIO tag: outside, or begin/inside of a typed span.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BioTag {
    Outside,
    Begin(EntityType),
    Inside(EntityType),
}

impl BioTag {
    pub fn etype(&self) -> Option<&EntityType> {
        match self {
            BioTag::Outside => None,
            BioTag::Begin(t) | BioTag::Inside(t) => Some(t),
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::Outside => f.write_str("O"),
            BioTag::Begin(t) => write!(f, "B-{t}"),
            BioTag::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for BioTag {
    type Err = BioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(BioTag::Outside);
        }
        let bad = || BioError::BadTagString(s.to_owned());
        let (prefix, label) = s.split_once('-').ok_or_else(bad)?;
        let etype = EntityType::new(label).map_err(|_| bad())?;
        match prefix {
            "B" => Ok(BioTag::Begin(etype)),
            "I" => Ok(BioTag::Inside(etype)),
            _ => Err(bad()),
        }
    }
}

/// Checks the BIO well-formedness invariant: every I-t follows a B-t or I-t
/// of the same type.
pub fn validate_bio(tags: &[BioTag]) -> Result<(), BioError> {
    let mut prev: Option<&EntityType> = None;
    for (index, tag) in tags.iter().enumerate() {
        match tag {
            BioTag::Inside(t) => {
                if prev != Some(t) {
                    return Err(BioError::InvalidBioSequence {
                        index,
                        etype: t.as_str().to_owned(),
                    });
                }
                prev = Some(t);
            }
            BioTag::Begin(t) => prev = Some(t),
            BioTag::Outside => prev = None,
        }
    }
    Ok(())
}

/// A maximal tagged span: type, token range, and the joined surface text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSpan {
    pub etype: EntityType,
    pub start_token: usize,
    pub end_token: usize,
    pub surface: String,
}

/// Extracts maximal spans from a raw token/tag pair, validating BIO
/// structure along the way. Spans are ordered by start token.
pub fn spans_from_raw<S: AsRef<str>>(
    tokens: &[S],
    tags: &[BioTag],
    mode: TokenizationMode,
) -> Result<Vec<TagSpan>, BioError> {
    if tokens.len() != tags.len() {
        return Err(BioError::LengthMismatch {
            tokens: tokens.len(),
            tags: tags.len(),
        });
    }
    validate_bio(tags)?;
    let mut spans = Vec::new();
    let mut open: Option<(EntityType, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            BioTag::Begin(t) => {
                if let Some((etype, start)) = open.take() {
                    spans.push(make_span(etype, start, i, tokens, mode));
                }
                open = Some((t.clone(), i));
            }
            BioTag::Inside(_) => {}
            BioTag::Outside => {
                if let Some((etype, start)) = open.take() {
                    spans.push(make_span(etype, start, i, tokens, mode));
                }
            }
        }
    }
    if let Some((etype, start)) = open {
        spans.push(make_span(etype, start, tokens.len(), tokens, mode));
    }
    Ok(spans)
}

fn make_span<S: AsRef<str>>(
    etype: EntityType,
    start: usize,
    end: usize,
    tokens: &[S],
    mode: TokenizationMode,
) -> TagSpan {
    TagSpan {
        etype,
        start_token: start,
        end_token: end,
        surface: join_tokens(&tokens[start..end], mode),
    }
}

/// A transcript with aligned BIO tags. Always BIO-valid; `text` is the
/// canonical join of the tokens under the mode's rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedTranscript {
    text: String,
    tokens: Vec<String>,
    tags: Vec<BioTag>,
    mode: TokenizationMode,
}

impl TaggedTranscript {
    /// Builds a transcript from tokens and tags, validating lengths and BIO
    /// structure. The stored text is derived from the tokens.
    pub fn new(
        tokens: Vec<String>,
        tags: Vec<BioTag>,
        mode: TokenizationMode,
    ) -> Result<Self, BioError> {
        if tokens.len() != tags.len() {
            return Err(BioError::LengthMismatch {
                tokens: tokens.len(),
                tags: tags.len(),
            });
        }
        validate_bio(&tags)?;
        let text = join_tokens(&tokens, mode);
        Ok(TaggedTranscript {
            text,
            tokens,
            tags,
            mode,
        })
    }

    /// Tokenizes `text` and tags every token O.
    pub fn untagged(text: &str, mode: TokenizationMode) -> Self {
        let tokens = tokenize(text, mode);
        let tags = vec![BioTag::Outside; tokens.len()];
        TaggedTranscript::new(tokens, tags, mode).expect("all-O tags are valid")
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tags(&self) -> &[BioTag] {
        &self.tags
    }

    pub fn mode(&self) -> TokenizationMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Maximal tagged spans in start order. Cannot fail: the transcript is
    /// BIO-valid by construction.
    pub fn spans(&self) -> Vec<TagSpan> {
        spans_from_raw(&self.tokens, &self.tags, self.mode).expect("validated at construction")
    }
}
