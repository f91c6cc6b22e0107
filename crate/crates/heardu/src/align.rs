//! Lexical alignment: locate entity surfaces in a generated sentence and
//! produce BIO tags plus the marker-encoded training target.
//!
//! All non-overlapping occurrences of every entity are tagged. Overlaps are
//! resolved deterministically: longer surface first, then leftmost, then the
//! entity's position in the input list.

use thiserror::Error;

use crate::entity::Entity;
use crate::generate::{find_subsequence, match_tokens, surface_tokens};
use crate::markers::{encode_entity_aware, EntityAwareTranscript, MarkerError, MarkerTable};
use crate::tags::{BioTag, TaggedTranscript};
use crate::text::{normalize_text, tokenize, TokenizationMode};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("entity {surface:?} has no span after conflict resolution")]
    AlignmentFailed { surface: String },
    #[error("tokenized text is empty")]
    EmptyText,
}

/// One resolved occurrence of an entity in the token stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSpan {
    pub entity: Entity,
    pub start_token: usize,
    /// Exclusive.
    pub end_token: usize,
}

/// Tags all resolved occurrences of `required` entities in `text`.
/// Every required entity must end up with at least one span.
pub fn lexical_align(
    text: &str,
    required: &[Entity],
    mode: TokenizationMode,
) -> Result<TaggedTranscript, AlignError> {
    lexical_align_with_optional(text, required, &[], mode)
}

/// Like [`lexical_align`], but also tags `optional` entities (e.g. the rest
/// of the dictionary) without requiring them to match. Optional entities
/// rank after required ones in the final tie-break.
pub fn lexical_align_with_optional(
    text: &str,
    required: &[Entity],
    optional: &[Entity],
    mode: TokenizationMode,
) -> Result<TaggedTranscript, AlignError> {
    let normalized = normalize_text(text);
    let tokens = tokenize(&normalized, mode);
    if tokens.is_empty() && (!required.is_empty() || !text.trim().is_empty()) {
        return Err(AlignError::EmptyText);
    }
    let haystack = match_tokens(&tokens, mode);

    struct Candidate {
        start: usize,
        len: usize,
        entity_idx: usize,
    }

    let all: Vec<&Entity> = required.iter().chain(optional.iter()).collect();
    let mut candidates = Vec::new();
    for (entity_idx, entity) in all.iter().enumerate() {
        let needle = surface_tokens(entity, mode);
        if needle.is_empty() {
            continue;
        }
        for start in find_subsequence(&haystack, &needle) {
            candidates.push(Candidate {
                start,
                len: needle.len(),
                entity_idx,
            });
        }
    }
    // Longer surface wins, then leftmost, then input order.
    candidates.sort_by(|a, b| {
        b.len
            .cmp(&a.len)
            .then(a.start.cmp(&b.start))
            .then(a.entity_idx.cmp(&b.entity_idx))
    });

    let mut claimed = vec![false; tokens.len()];
    let mut matched = vec![0usize; all.len()];
    let mut spans: Vec<MatchSpan> = Vec::new();
    for c in candidates {
        if claimed[c.start..c.start + c.len].iter().any(|&x| x) {
            continue;
        }
        claimed[c.start..c.start + c.len].iter_mut().for_each(|x| *x = true);
        matched[c.entity_idx] += 1;
        spans.push(MatchSpan {
            entity: all[c.entity_idx].clone(),
            start_token: c.start,
            end_token: c.start + c.len,
        });
    }

    for (i, entity) in required.iter().enumerate() {
        if matched[i] == 0 {
            return Err(AlignError::AlignmentFailed {
                surface: entity.surface().to_owned(),
            });
        }
    }

    let mut tags = vec![BioTag::Outside; tokens.len()];
    for span in &spans {
        tags[span.start_token] = BioTag::Begin(span.entity.etype().clone());
        for tag in tags.iter_mut().take(span.end_token).skip(span.start_token + 1) {
            *tag = BioTag::Inside(span.entity.etype().clone());
        }
    }
    Ok(TaggedTranscript::new(tokens, tags, mode).expect("disjoint spans produce valid BIO"))
}

/// Encodes the aligned transcript into the entity-aware training target.
pub fn make_target(
    tagged: &TaggedTranscript,
    table: &MarkerTable,
) -> Result<EntityAwareTranscript, MarkerError> {
    encode_entity_aware(tagged, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::EntityType;
    use std::str::FromStr;

    fn entity(surface: &str, etype: &str) -> Entity {
        Entity::new(surface, EntityType::new(etype).unwrap()).unwrap()
    }

    fn tags_of(t: &TaggedTranscript) -> Vec<String> {
        t.tags().iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn tags_person_at_sentence_start() {
        let tagged = lexical_align(
            "salva kiir is president",
            &[entity("salva kiir", "PER")],
            TokenizationMode::Word,
        )
        .unwrap();
        assert_eq!(tags_of(&tagged), ["B-PER", "I-PER", "O", "O"]);
    }

    #[test]
    fn tags_every_occurrence() {
        let tagged = lexical_align(
            "paris dawn beats paris dusk",
            &[entity("Paris", "LOC")],
            TokenizationMode::Word,
        )
        .unwrap();
        assert_eq!(tags_of(&tagged), ["B-LOC", "O", "O", "B-LOC", "O"]);
    }

    #[test]
    fn longer_surface_wins_overlap() {
        let tagged = lexical_align(
            "visit new york",
            &[entity("New York", "LOC"), entity("York", "LOC")],
            TokenizationMode::Word,
        );
        // "York" only occurs inside "New York", so it ends up with no span.
        assert_eq!(
            tagged.unwrap_err(),
            AlignError::AlignmentFailed {
                surface: "York".into()
            }
        );

        let tagged = lexical_align(
            "visit new york and york",
            &[entity("New York", "LOC"), entity("York", "LOC")],
            TokenizationMode::Word,
        )
        .unwrap();
        assert_eq!(tags_of(&tagged), ["O", "B-LOC", "I-LOC", "O", "B-LOC"]);
    }

    #[test]
    fn leftmost_wins_among_equal_lengths() {
        // Both entities are single tokens; "a b a" with entities "a"/PER
        // listed first and "b"/LOC second: all occurrences are disjoint.
        let tagged = lexical_align(
            "a b a",
            &[entity("a", "PER"), entity("b", "LOC")],
            TokenizationMode::Word,
        )
        .unwrap();
        assert_eq!(tags_of(&tagged), ["B-PER", "B-LOC", "B-PER"]);
    }

    #[test]
    fn input_order_breaks_exact_ties() {
        // Same surface, different types: the first-listed entity outranks
        // the second at every occurrence, so it claims them all and the
        // second ends up unmatched.
        let result = lexical_align(
            "apple and apple",
            &[entity("apple", "ORG"), entity("apple", "LOC")],
            TokenizationMode::Word,
        );
        assert_eq!(
            result.unwrap_err(),
            AlignError::AlignmentFailed {
                surface: "apple".into()
            }
        );
        // As an optional entity the loser is simply left untagged.
        let tagged = lexical_align_with_optional(
            "apple and apple",
            &[entity("apple", "ORG")],
            &[entity("apple", "LOC")],
            TokenizationMode::Word,
        )
        .unwrap();
        assert_eq!(tags_of(&tagged), ["B-ORG", "O", "B-ORG"]);
    }

    #[test]
    fn char_mode_spans_cover_surface_length() {
        let tagged = lexical_align(
            "张三去北京大学",
            &[entity("张三", "PER"), entity("北京大学", "ORG")],
            TokenizationMode::Char,
        )
        .unwrap();
        assert_eq!(
            tags_of(&tagged),
            ["B-PER", "I-PER", "O", "B-ORG", "I-ORG", "I-ORG", "I-ORG"]
        );
    }

    #[test]
    fn optional_entities_tagged_but_not_required() {
        let tagged = lexical_align_with_optional(
            "salva kiir visited paris",
            &[entity("salva kiir", "PER")],
            &[entity("paris", "LOC"), entity("london", "LOC")],
            TokenizationMode::Word,
        )
        .unwrap();
        assert_eq!(tags_of(&tagged), ["B-PER", "I-PER", "O", "B-LOC"]);
    }

    #[test]
    fn target_delegates_to_marker_encoding() {
        let tagged = lexical_align(
            "salva kiir is president",
            &[entity("salva kiir", "PER")],
            TokenizationMode::Word,
        )
        .unwrap();
        let target = make_target(&tagged, &MarkerTable::default()).unwrap();
        assert_eq!(target.text(), "[ salva kiir ] is president");
    }

    #[test]
    fn word_boundaries_respected() {
        let err = lexical_align(
            "yorkshire is vast",
            &[entity("York", "LOC")],
            TokenizationMode::Word,
        )
        .unwrap_err();
        assert_eq!(
            err,
            AlignError::AlignmentFailed {
                surface: "York".into()
            }
        );
    }

    #[test]
    fn bio_tag_strings_parse_back() {
        // Guards the FromStr path the manifest reader depends on.
        let tagged = lexical_align(
            "salva kiir is president",
            &[entity("salva kiir", "PER")],
            TokenizationMode::Word,
        )
        .unwrap();
        for tag in tagged.tags() {
            assert_eq!(BioTag::from_str(&tag.to_string()).unwrap(), *tag);
        }
    }
}
