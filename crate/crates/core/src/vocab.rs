//! Subword inventory with word-initial / word-internal position classes.

use std::collections::{BTreeSet, HashSet};

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::token::{PositionClass, Subword, DEFAULT_MARKER};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocab {
    entries: IndexSet<Subword>,
    initial: HashSet<String>,
    internal: HashSet<String>,
    marker: String,
    max_len: usize,
}

impl Default for SubwordVocab {
    fn default() -> Self {
        SubwordVocab::new(DEFAULT_MARKER)
    }
}

impl SubwordVocab {
    pub fn new(marker: impl Into<String>) -> Self {
        SubwordVocab {
            entries: IndexSet::new(),
            initial: HashSet::new(),
            internal: HashSet::new(),
            marker: marker.into(),
            max_len: 0,
        }
    }

    /// Returns false if the entry was already present. Empty surfaces are rejected.
    pub fn insert(&mut self, surface: &str, class: PositionClass) -> bool {
        if surface.is_empty() {
            return false;
        }
        if !self.entries.insert(Subword::new(surface, class)) {
            return false;
        }
        match class {
            PositionClass::Initial => self.initial.insert(surface.to_owned()),
            PositionClass::Internal => self.internal.insert(surface.to_owned()),
        };
        self.max_len = self.max_len.max(surface.chars().count());
        true
    }

    /// Inserts `surface` in both position classes.
    pub fn insert_both(&mut self, surface: &str) {
        self.insert(surface, PositionClass::Initial);
        self.insert(surface, PositionClass::Internal);
    }

    pub fn contains(&self, surface: &str, class: PositionClass) -> bool {
        match class {
            PositionClass::Initial => self.initial.contains(surface),
            PositionClass::Internal => self.internal.contains(surface),
        }
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    /// Longest surface length, in characters.
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Subword> {
        self.entries.iter()
    }

    pub fn count_class(&self, class: PositionClass) -> usize {
        match class {
            PositionClass::Initial => self.initial.len(),
            PositionClass::Internal => self.internal.len(),
        }
    }

    /// All characters that occur in any surface.
    pub fn alphabet(&self) -> BTreeSet<char> {
        self.entries
            .iter()
            .flat_map(|e| e.surface.chars())
            .collect()
    }

    /// Checks that every character of the vocabulary is itself an initial entry.
    pub fn validate(&self) -> Result<()> {
        let mut buf = [0u8; 4];
        for ch in self.alphabet() {
            if !self.initial.contains(&*ch.encode_utf8(&mut buf)) {
                return Err(Error::InvalidModel(format!(
                    "character {ch:?} is not an initial vocabulary entry"
                )));
            }
        }
        Ok(())
    }

    /// Parses one token per line; lines starting with the marker are internal.
    /// A line consisting of the marker alone is the initial entry of that surface.
    pub fn parse(text: &str, marker: &str) -> Result<SubwordVocab> {
        if marker.is_empty() {
            return Err(Error::InvalidArgument("marker must be non-empty".into()));
        }
        let mut vocab = SubwordVocab::new(marker);
        for (i, line) in text.lines().enumerate() {
            let bad = |reason: &str| Error::Format {
                what: "vocab file",
                line: i + 1,
                reason: reason.to_owned(),
            };
            if line.is_empty() {
                return Err(bad("empty line"));
            }
            if line.chars().any(char::is_whitespace) {
                return Err(bad("token contains whitespace"));
            }
            let (surface, class) = match line.strip_prefix(marker) {
                Some(rest) if !rest.is_empty() => (rest, PositionClass::Internal),
                _ => (line, PositionClass::Initial),
            };
            if !vocab.insert(surface, class) {
                return Err(bad("duplicate entry"));
            }
        }
        vocab.validate()?;
        Ok(vocab)
    }

    /// Inverse of [`SubwordVocab::parse`], in insertion order.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.render(&self.marker));
            out.push('\n');
        }
        out
    }
}
