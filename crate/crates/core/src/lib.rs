//! Subword tokenizers with stochastic variants and tools to measure the
//! distributions they induce.
//!
//! * [`bpe`]: BPE training, deterministic encoding and BPE-dropout.
//! * [`maxmatch`]: greedy longest-match encoding and MaxMatch-dropout.
//! * [`lattice`]: the lattice of all tokenizations of a word, with biased,
//!   rejection-corrected and exact uniform path samplers.
//! * [`regularizer`]: per-word stochastic tokenization of sentences and corpora.
//! * [`analysis`]: empirical distributions, diversity curves and efficiency metrics.

pub mod analysis;
pub mod bpe;
pub mod corpus;
mod error;
pub mod lattice;
pub mod maxmatch;
pub mod regularizer;
mod report;
pub mod seed;
mod token;
pub mod vocab;

pub use bpe::{exact_bpe_dropout_dist, train_bpe, BpeModel, CoinPolicy, MergeList};
pub use corpus::{ingest, WordCounts};
pub use error::{Error, Result};
pub use lattice::{SampledPath, TokenizationLattice};
pub use maxmatch::{derive_marked_vocab, exact_maxmatch_dropout_dist, maxmatch_encode, maxmatch_encode_deterministic};
pub use report::{DistributionReport, ReportKind, ReportRow};
pub use token::{PositionClass, Subword, Tokenization, DEFAULT_MARKER};
pub use vocab::SubwordVocab;
