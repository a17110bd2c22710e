use std::io;

use num_bigint::BigUint;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Utf8 { offset: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("cannot tokenize {word:?}: character {ch:?} is not covered by the vocabulary")]
    Untokenizable { word: String, ch: char },

    #[error("cannot tokenize {word:?}: no segmentation into vocabulary entries exists")]
    NoSegmentation { word: String },

    #[error("word is empty")]
    EmptyWord,

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("word {word:?} has {len} characters; exhaustive enumeration is limited to {limit}")]
    WordTooLong { word: String, len: usize, limit: usize },

    #[error("lattice has {count} paths, more than the enumeration limit {limit}")]
    TooManyPaths { count: BigUint, limit: usize },

    #[error("rejection sampler gave up after {0} rejected proposals")]
    RejectionLimit(u64),

    #[error("malformed {what} at line {line}: {reason}")]
    Format {
        what: &'static str,
        line: usize,
        reason: String,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lemma precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}
