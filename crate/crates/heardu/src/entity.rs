//! Typed named entities and the entity dictionary.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{casefold, contains_marker_chars, normalize_text};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EntityError {
    #[error("entity type label must be non-empty uppercase alphanumeric, got {0:?}")]
    BadTypeLabel(String),
    #[error("entity surface is empty after normalization")]
    EmptySurface,
    #[error("entity surface {0:?} contains reserved marker characters")]
    MarkerChars(String),
    #[error("entity type {0:?} is not in the configured type set")]
    UnknownType(String),
}

/// Symbolic entity type label, e.g. `PER`, `LOC`, `ORG`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityType(String);

impl EntityType {
    pub fn new(label: &str) -> Result<Self, EntityError> {
        let label = label.trim();
        let ok = !label.is_empty()
            && label
                .chars()
                .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit());
        if ok {
            Ok(EntityType(label.to_owned()))
        } else {
            Err(EntityError::BadTypeLabel(label.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for EntityType {
    type Error = EntityError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        EntityType::new(&s)
    }
}

impl From<EntityType> for String {
    fn from(t: EntityType) -> String {
        t.0
    }
}

/// The default type set used throughout the pipeline.
pub fn default_type_set() -> Vec<EntityType> {
    ["PER", "LOC", "ORG"]
        .iter()
        .map(|l| EntityType::new(l).expect("builtin labels are valid"))
        .collect()
}

/// A typed entity surface. Construction normalizes the surface (NFC,
/// whitespace collapse) and rejects empty or marker-bearing strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Entity {
    surface: String,
    etype: EntityType,
}

impl Entity {
    pub fn new(surface: &str, etype: EntityType) -> Result<Self, EntityError> {
        let surface = normalize_text(surface);
        if surface.is_empty() {
            return Err(EntityError::EmptySurface);
        }
        if contains_marker_chars(&surface) {
            return Err(EntityError::MarkerChars(surface));
        }
        Ok(Entity { surface, etype })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn etype(&self) -> &EntityType {
        &self.etype
    }

    /// Identity key used for deduplication and seen/unseen partitioning.
    pub fn key(&self) -> (String, String) {
        (casefold(&self.surface), self.etype.as_str().to_owned())
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.surface, self.etype)
    }
}

/// One dictionary entry: an entity plus its occurrence count in the source
/// documents, when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NedEntry {
    pub entity: Entity,
    pub count: Option<u64>,
}

/// Named entity dictionary: unique typed entities, ordered by
/// (type, casefolded surface) so that sampling and file output are
/// deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ned {
    types: Vec<EntityType>,
    entries: Vec<NedEntry>,
}

impl Ned {
    pub fn new(types: Vec<EntityType>) -> Self {
        Ned {
            types,
            entries: Vec::new(),
        }
    }

    /// Builds a dictionary from entries, deduplicating by casefolded
    /// (surface, type) and summing counts. Entities with a type outside
    /// `types` are rejected.
    pub fn from_entries(
        types: Vec<EntityType>,
        entries: impl IntoIterator<Item = NedEntry>,
    ) -> Result<Self, EntityError> {
        let mut ned = Ned::new(types);
        for entry in entries {
            ned.insert(entry)?;
        }
        ned.sort();
        Ok(ned)
    }

    /// Inserts or merges one entry. Counts add; the existing casing wins.
    pub fn insert(&mut self, entry: NedEntry) -> Result<(), EntityError> {
        if !self.types.contains(entry.entity.etype()) {
            return Err(EntityError::UnknownType(
                entry.entity.etype().as_str().to_owned(),
            ));
        }
        let key = entry.entity.key();
        if let Some(existing) = self.entries.iter_mut().find(|e| e.entity.key() == key) {
            existing.count = match (existing.count, entry.count) {
                (Some(a), Some(b)) => Some(a + b),
                (a, b) => a.or(b),
            };
        } else {
            self.entries.push(entry);
        }
        Ok(())
    }

    /// Sorts entries by (type, casefolded surface).
    pub fn sort(&mut self) {
        self.entries
            .sort_by_key(|e| (e.entity.etype().clone(), casefold(e.entity.surface())));
    }

    pub fn types(&self) -> &[EntityType] {
        &self.types
    }

    pub fn entries(&self) -> &[NedEntry] {
        &self.entries
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entries.iter().map(|e| &e.entity)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Per-type entity counts, keyed by type label, including zero rows for
    /// configured types without entities. Deterministically ordered.
    pub fn stats(&self) -> Vec<(String, usize)> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for entry in &self.entries {
            *counts.entry(entry.entity.etype().as_str()).or_default() += 1;
        }
        let mut labels: Vec<&EntityType> = self.types.iter().collect();
        labels.sort();
        labels
            .into_iter()
            .map(|t| (t.as_str().to_owned(), counts.get(t.as_str()).copied().unwrap_or(0)))
            .collect()
    }
}
