//! Entity sampling, candidate generation, and candidate validation.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::backends::{BackendError, TextGenerator};
use crate::entity::{Entity, Ned};
use crate::prompts::{build_generation_prompt, GenerationTemplates};
use crate::rng::derive_rng;
use crate::text::{casefold, contains_marker_chars, normalize_text, tokenize, TokenizationMode};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("cannot sample from an empty dictionary")]
    EmptyNed,
    #[error("no acceptable candidate after {attempts} attempts: {rejections:?}")]
    GenerationExhausted {
        attempts: u32,
        rejections: Vec<(String, RejectReason)>,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Entity sampling configuration.
#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub seed: u64,
    /// Probability of sampling one entity; two are sampled otherwise.
    pub p_single: f64,
    /// Inserted into the prompt's `{domain}` slot.
    pub domain: String,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            seed: 0,
            p_single: 0.5,
            domain: String::new(),
        }
    }
}

/// Length and retry bounds for generated sentences. Lengths count tokens
/// under the active tokenization mode: words in word mode, characters in
/// char mode.
#[derive(Debug, Clone, Copy)]
pub struct GenerationConstraints {
    pub min_words: usize,
    pub max_words: usize,
    /// Additional generation attempts after the first rejected candidate.
    pub max_retries: u32,
}

impl Default for GenerationConstraints {
    fn default() -> Self {
        GenerationConstraints {
            min_words: 20,
            max_words: 100,
            max_retries: 3,
        }
    }
}

impl GenerationConstraints {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_words == 0 || self.min_words >= self.max_words {
            return Err(format!(
                "length bounds must satisfy 0 < min < max, got {}..{}",
                self.min_words, self.max_words
            ));
        }
        Ok(())
    }
}

/// Samples one or two entities for a record, uniformly and without
/// replacement. Deterministic given (seed, record_id); a single-entity
/// dictionary falls back to size one with a logged diagnostic.
pub fn sample_entities(
    ned: &Ned,
    config: &SampleConfig,
    record_id: u64,
) -> Result<Vec<Entity>, GenerateError> {
    if ned.is_empty() {
        return Err(GenerateError::EmptyNed);
    }
    let mut rng = derive_rng(config.seed, record_id, "sample");
    let mut size = if rng.gen_bool(config.p_single.clamp(0.0, 1.0)) {
        1
    } else {
        2
    };
    if size > ned.len() {
        log::debug!(
            "record {record_id}: dictionary has {} entities, falling back to size 1",
            ned.len()
        );
        size = ned.len();
    }
    let entities: Vec<Entity> = rand::seq::index::sample(&mut rng, ned.len(), size)
        .into_iter()
        .map(|i| ned.entries()[i].entity.clone())
        .collect();
    Ok(entities)
}

/// Machine-readable rejection reasons from [`validate_candidate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    MarkerChars,
    TooShort { tokens: usize },
    TooLong { tokens: usize },
    MissingEntity { surface: String },
}

/// Validation outcome for a candidate sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Accept,
    Reject(RejectReason),
}

impl Validation {
    pub fn is_accept(&self) -> bool {
        matches!(self, Validation::Accept)
    }
}

/// Accepts a candidate iff it is marker-free, its token count lies in
/// `[min_words, max_words]`, and every sampled entity surface occurs on
/// token boundaries (casefolded in word mode, exact in char mode).
pub fn validate_candidate(
    text: &str,
    entities: &[Entity],
    constraints: &GenerationConstraints,
    mode: TokenizationMode,
) -> Validation {
    if contains_marker_chars(text) {
        return Validation::Reject(RejectReason::MarkerChars);
    }
    let normalized = normalize_text(text);
    let tokens = tokenize(&normalized, mode);
    if tokens.len() < constraints.min_words {
        return Validation::Reject(RejectReason::TooShort {
            tokens: tokens.len(),
        });
    }
    if tokens.len() > constraints.max_words {
        return Validation::Reject(RejectReason::TooLong {
            tokens: tokens.len(),
        });
    }
    let haystack = match_tokens(&tokens, mode);
    for entity in entities {
        let needle = surface_tokens(entity, mode);
        if find_subsequence(&haystack, &needle).is_empty() {
            return Validation::Reject(RejectReason::MissingEntity {
                surface: entity.surface().to_owned(),
            });
        }
    }
    Validation::Accept
}

/// Tokens in match form: casefolded in word mode, exact in char mode.
pub(crate) fn match_tokens(tokens: &[String], mode: TokenizationMode) -> Vec<String> {
    match mode {
        TokenizationMode::Word => tokens.iter().map(|t| casefold(t)).collect(),
        TokenizationMode::Char => tokens.to_vec(),
    }
}

/// An entity surface tokenized in match form under `mode`.
pub(crate) fn surface_tokens(entity: &Entity, mode: TokenizationMode) -> Vec<String> {
    let tokens = tokenize(entity.surface(), mode);
    match_tokens(&tokens, mode)
}

/// All start offsets where `needle` occurs as a contiguous token run.
pub(crate) fn find_subsequence(haystack: &[String], needle: &[String]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len())
        .filter(|&start| haystack[start..start + needle.len()] == *needle)
        .collect()
}

/// Asks the backend for a sentence containing `entities`, validating each
/// candidate and retrying with the identical prompt until one passes or the
/// retry budget is exhausted.
pub fn generate_sentence(
    entities: &[Entity],
    domain: &str,
    templates: &GenerationTemplates,
    backend: &dyn TextGenerator,
    constraints: &GenerationConstraints,
    mode: TokenizationMode,
    record_id: u64,
) -> Result<String, GenerateError> {
    let prompt = build_generation_prompt(entities, domain, templates);
    let attempts = constraints.max_retries + 1;
    let mut rejections = Vec::new();
    for _ in 0..attempts {
        let candidate = backend.generate(&prompt, record_id)?;
        match validate_candidate(&candidate, entities, constraints, mode) {
            Validation::Accept => return Ok(normalize_text(&candidate)),
            Validation::Reject(reason) => rejections.push((candidate, reason)),
        }
    }
    Err(GenerateError::GenerationExhausted {
        attempts,
        rejections,
    })
}
