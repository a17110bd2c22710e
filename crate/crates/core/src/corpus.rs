//! Whitespace pre-tokenization and word frequency counting.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Word frequencies of a corpus together with its character alphabet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordCounts {
    entries: BTreeMap<String, u64>,
    alphabet: BTreeSet<char>,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Appended to every word before counting, e.g. `"</w>"`. Off by default.
    pub end_of_word: Option<String>,
}

impl WordCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `count` occurrences of `word`. Empty words and zero counts are ignored.
    ///
    /// Panics if `word` contains whitespace.
    pub fn add(&mut self, word: &str, count: u64) {
        if word.is_empty() || count == 0 {
            return;
        }
        assert!(
            !word.chars().any(char::is_whitespace),
            "word {word:?} contains whitespace"
        );
        self.alphabet.extend(word.chars());
        *self.entries.entry(word.to_owned()).or_insert(0) += count;
    }

    pub fn merge(mut self, other: WordCounts) -> WordCounts {
        let (mut big, small) = if self.entries.len() >= other.entries.len() {
            (std::mem::take(&mut self), other)
        } else {
            (other, self)
        };
        for (w, c) in small.entries {
            *big.entries.entry(w).or_insert(0) += c;
        }
        big.alphabet.extend(small.alphabet);
        big
    }

    pub fn get(&self, word: &str) -> u64 {
        self.entries.get(word).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(w, &c)| (w.as_str(), c))
    }

    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }

    /// Number of distinct words.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of word occurrences.
    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    fn add_line(&mut self, line: &str, opts: &IngestOptions) {
        for word in line.split_whitespace() {
            match &opts.end_of_word {
                Some(suffix) => self.add(&format!("{word}{suffix}"), 1),
                None => self.add(word, 1),
            }
        }
    }
}

impl<'a> FromIterator<&'a str> for WordCounts {
    fn from_iter<T: IntoIterator<Item = &'a str>>(iter: T) -> Self {
        let mut counts = WordCounts::new();
        for w in iter {
            counts.add(w, 1);
        }
        counts
    }
}

/// Counts whitespace-separated words of a UTF-8 stream.
pub fn ingest<R: BufRead>(reader: R) -> Result<WordCounts> {
    ingest_with(reader, &IngestOptions::default())
}

pub fn ingest_with<R: BufRead>(mut reader: R, opts: &IngestOptions) -> Result<WordCounts> {
    check_suffix(opts)?;
    let mut counts = WordCounts::new();
    let mut buf = Vec::new();
    let mut offset = 0usize;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        let line = std::str::from_utf8(&buf).map_err(|e| Error::Utf8 {
            offset: offset + e.valid_up_to(),
        })?;
        counts.add_line(line, opts);
        offset += n;
    }
    Ok(counts)
}

/// Same result as [`ingest`], counting lines on the rayon pool.
pub fn ingest_parallel(bytes: &[u8], opts: &IngestOptions) -> Result<WordCounts> {
    check_suffix(opts)?;
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Utf8 {
        offset: e.valid_up_to(),
    })?;
    Ok(text
        .par_lines()
        .fold(WordCounts::new, |mut acc, line| {
            acc.add_line(line, opts);
            acc
        })
        .reduce(WordCounts::new, WordCounts::merge))
}

fn check_suffix(opts: &IngestOptions) -> Result<()> {
    match &opts.end_of_word {
        Some(s) if s.is_empty() || s.chars().any(char::is_whitespace) => Err(
            Error::InvalidArgument(format!("end-of-word suffix {s:?} must be non-empty and whitespace-free")),
        ),
        _ => Ok(()),
    }
}
