//! Stochastic word-level tokenization of sentences and corpora.
//!
//! Each word is tokenized independently. In [`SamplingMode::Uniform`] a word
//! is replaced, with probability `rate`, by a uniform sample over all of its
//! lattice paths (which may coincide with the canonical tokenization), and
//! otherwise by the deterministic base tokenization. In
//! [`SamplingMode::Dropout`] the base scheme's dropout encoder is used with
//! `rate` as its dropout probability.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::sync::{Arc, RwLock};

use rand::Rng;
use rayon::prelude::*;

use crate::bpe::{BpeModel, CoinPolicy};
use crate::error::{check_probability, Error, Result};
use crate::lattice::TokenizationLattice;
use crate::maxmatch::{derive_marked_vocab, maxmatch_encode, maxmatch_encode_deterministic};
use crate::seed::{derive_rng, DEFAULT_SEED};
use crate::token::{Tokenization, DEFAULT_MARKER};
use crate::vocab::SubwordVocab;

const CACHE_CAPACITY: usize = 1 << 18;
const BATCH_LINES: usize = 2048;

#[derive(Debug, Clone)]
pub enum BaseTokenizer {
    Bpe(Arc<BpeModel>),
    MaxMatch(Arc<SubwordVocab>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    #[default]
    Deterministic,
    Dropout,
    Uniform,
}

/// How uniform mode draws a lattice path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UniformSampler {
    /// Suffix-count walk, no rejection.
    #[default]
    Exact,
    /// Biased walk with rejection.
    Rejection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

/// Which side(s) of a parallel corpus receive stochastic tokenization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scope {
    Source,
    Target,
    #[default]
    Both,
}

impl Scope {
    pub fn applies_to(self, side: Side) -> bool {
        matches!(
            (self, side),
            (Scope::Both, _) | (Scope::Source, Side::Source) | (Scope::Target, Side::Target)
        )
    }
}

#[derive(Debug, Clone)]
pub struct StochasticTokenizerConfig {
    pub base: BaseTokenizer,
    pub mode: SamplingMode,
    pub rate: f64,
    pub seed: u64,
    pub scope: Scope,
    pub sampler: UniformSampler,
    pub coin_policy: CoinPolicy,
    /// Marker for BPE output; MaxMatch uses its vocabulary's marker.
    pub marker: String,
}

impl StochasticTokenizerConfig {
    pub fn new(base: BaseTokenizer) -> Self {
        StochasticTokenizerConfig {
            base,
            mode: SamplingMode::Deterministic,
            rate: 0.0,
            seed: DEFAULT_SEED,
            scope: Scope::Both,
            sampler: UniformSampler::Exact,
            coin_policy: CoinPolicy::Persistent,
            marker: DEFAULT_MARKER.to_owned(),
        }
    }

    pub fn with_mode(mut self, mode: SamplingMode, rate: f64) -> Self {
        self.mode = mode;
        self.rate = rate;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordOutcome {
    pub tokenization: Tokenization,
    /// The stochastic branch was taken.
    pub sampled: bool,
    pub canonical: bool,
}

#[derive(Debug)]
struct CacheEntry {
    canonical: Tokenization,
    lattice: Option<Arc<TokenizationLattice>>,
}

#[derive(Debug)]
pub struct StochasticTokenizer {
    config: StochasticTokenizerConfig,
    lattice_vocab: Arc<SubwordVocab>,
    cache: RwLock<HashMap<String, Arc<CacheEntry>>>,
}

impl StochasticTokenizer {
    pub fn new(config: StochasticTokenizerConfig) -> Result<Self> {
        check_probability(config.rate)?;
        let lattice_vocab = match &config.base {
            BaseTokenizer::Bpe(model) => Arc::new(derive_marked_vocab(model, &config.marker)),
            BaseTokenizer::MaxMatch(vocab) => {
                vocab.validate()?;
                Arc::clone(vocab)
            }
        };
        Ok(StochasticTokenizer {
            config,
            lattice_vocab,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &StochasticTokenizerConfig {
        &self.config
    }

    pub fn marker(&self) -> &str {
        self.lattice_vocab.marker()
    }

    /// Vocabulary whose lattices uniform mode samples from.
    pub fn lattice_vocab(&self) -> &SubwordVocab {
        &self.lattice_vocab
    }

    fn entry(&self, word: &str) -> Result<Arc<CacheEntry>> {
        if let Some(e) = self.cache.read().unwrap().get(word) {
            if e.lattice.is_some() || self.config.mode != SamplingMode::Uniform {
                return Ok(Arc::clone(e));
            }
        }
        let canonical = match &self.config.base {
            BaseTokenizer::Bpe(model) => model.encode(word)?,
            BaseTokenizer::MaxMatch(vocab) => maxmatch_encode_deterministic(word, vocab)?,
        };
        let lattice = if self.config.mode == SamplingMode::Uniform {
            Some(Arc::new(TokenizationLattice::build(word, &self.lattice_vocab)?))
        } else {
            None
        };
        let entry = Arc::new(CacheEntry { canonical, lattice });
        let mut cache = self.cache.write().unwrap();
        if cache.len() < CACHE_CAPACITY {
            cache.insert(word.to_owned(), Arc::clone(&entry));
        }
        Ok(entry)
    }

    pub fn canonical(&self, word: &str) -> Result<Tokenization> {
        Ok(self.entry(word)?.canonical.clone())
    }

    /// Cached lattice of `word` over the sampling vocabulary.
    pub fn lattice(&self, word: &str) -> Result<Arc<TokenizationLattice>> {
        match &self.entry(word)?.lattice {
            Some(l) => Ok(Arc::clone(l)),
            None => Ok(Arc::new(TokenizationLattice::build(word, &self.lattice_vocab)?)),
        }
    }

    /// Tokenizes one word with the configured mode.
    pub fn tokenize_word<R: Rng + ?Sized>(&self, word: &str, rng: &mut R) -> Result<WordOutcome> {
        self.tokenize_word_as(word, self.config.mode, rng)
    }

    fn tokenize_word_as<R: Rng + ?Sized>(&self, word: &str, mode: SamplingMode, rng: &mut R) -> Result<WordOutcome> {
        let entry = self.entry(word)?;
        let rate = self.config.rate;
        let (tokenization, sampled) = match mode {
            SamplingMode::Deterministic => (entry.canonical.clone(), false),
            _ if rate == 0.0 => (entry.canonical.clone(), false),
            SamplingMode::Dropout => {
                let t = match &self.config.base {
                    BaseTokenizer::Bpe(model) => {
                        model.encode_dropout_with(word, rate, self.config.coin_policy, rng)?
                    }
                    BaseTokenizer::MaxMatch(vocab) => maxmatch_encode(word, vocab, rate, rng)?,
                };
                (t, true)
            }
            SamplingMode::Uniform => {
                if rate == 1.0 || rng.gen::<f64>() < rate {
                    let lattice = entry.lattice.as_ref().expect("uniform mode caches lattices");
                    let t = match self.config.sampler {
                        UniformSampler::Exact => lattice.exact_uniform_sample(rng),
                        UniformSampler::Rejection => lattice.unbiased_sample(rng)?.tokenization,
                    };
                    (t, true)
                } else {
                    (entry.canonical.clone(), false)
                }
            }
        };
        let canonical = tokenization == entry.canonical;
        Ok(WordOutcome {
            tokenization,
            sampled,
            canonical,
        })
    }

    /// Tokenizes a pre-split sentence, drawing from a single RNG in word order.
    pub fn tokenize_sentence<R: Rng + ?Sized>(&self, words: &[&str], rng: &mut R) -> Result<Vec<Tokenization>> {
        words
            .iter()
            .map(|w| {
                self.tokenize_word(w, rng)
                    .map(|o| o.tokenization)
                    .map_err(|e| word_error(w, e))
            })
            .collect()
    }

    /// Per-word RNG for position `(line, word)` of a corpus side.
    pub fn word_rng(&self, side: Side, line: u64, word: u64) -> crate::seed::TokRng {
        derive_rng(self.config.seed, &[side as u64, line, word])
    }

    /// Tokenizes one corpus line with per-word derived seeds.
    pub fn tokenize_line(&self, line: &str, line_index: u64, side: Side) -> LineResult {
        let mode = if self.config.scope.applies_to(side) {
            self.config.mode
        } else {
            SamplingMode::Deterministic
        };
        let mut out = Vec::new();
        let mut stats = LineStats::default();
        let mut errors = Vec::new();
        for (k, word) in line.split_whitespace().enumerate() {
            let mut rng = self.word_rng(side, line_index, k as u64);
            match self.tokenize_word_as(word, mode, &mut rng) {
                Ok(o) => {
                    stats.words += 1;
                    stats.sampled += o.sampled as u64;
                    stats.non_canonical += !o.canonical as u64;
                    out.extend(o.tokenization.render(self.marker()));
                }
                Err(e) => errors.push((word.to_owned(), e.to_string())),
            }
        }
        if errors.is_empty() {
            Ok((out, stats))
        } else {
            Err(errors)
        }
    }

    /// Streams `input` to `output` line by line; `workers` threads tokenize
    /// each batch and lines are written in input order. Output is identical
    /// for any worker count.
    pub fn tokenize_corpus<R: BufRead, W: Write>(
        &self,
        input: R,
        mut output: W,
        side: Side,
        workers: usize,
    ) -> Result<CorpusSummary> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut summary = CorpusSummary::default();
        let mut lines = input.lines();
        let mut next_index = 0u64;
        loop {
            let batch: Vec<String> = lines.by_ref().take(BATCH_LINES).collect::<std::io::Result<_>>()?;
            if batch.is_empty() {
                break;
            }
            let start = next_index;
            next_index += batch.len() as u64;
            let results: Vec<LineResult> = pool.install(|| {
                batch
                    .par_iter()
                    .enumerate()
                    .map(|(k, l)| self.tokenize_line(l, start + k as u64, side))
                    .collect()
            });
            for (k, r) in results.into_iter().enumerate() {
                summary.lines += 1;
                match r {
                    Ok((tokens, stats)) => {
                        summary.words += stats.words;
                        summary.sampled_words += stats.sampled;
                        summary.non_canonical_words += stats.non_canonical;
                        summary.tokens += tokens.len() as u64;
                        for t in &tokens {
                            *summary.token_counts.entry(t.clone()).or_insert(0) += 1;
                        }
                        writeln!(output, "{}", tokens.join(" "))?;
                    }
                    Err(errs) => {
                        for (word, message) in errs {
                            summary.errors.push(LineError {
                                line: start as usize + k + 1,
                                word,
                                message,
                            });
                        }
                        writeln!(output)?;
                    }
                }
            }
        }
        output.flush()?;
        Ok(summary)
    }
}

fn word_error(word: &str, e: Error) -> Error {
    match e {
        e @ (Error::Untokenizable { .. } | Error::NoSegmentation { .. }) => e,
        other => Error::InvalidArgument(format!("word {word:?}: {other}")),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LineStats {
    pub words: u64,
    pub sampled: u64,
    pub non_canonical: u64,
}

/// Rendered tokens and counters, or the failing words with messages.
pub type LineResult = std::result::Result<(Vec<String>, LineStats), Vec<(String, String)>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    /// 1-based.
    pub line: usize,
    pub word: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusSummary {
    pub lines: u64,
    pub words: u64,
    pub tokens: u64,
    pub sampled_words: u64,
    pub non_canonical_words: u64,
    pub token_counts: BTreeMap<String, u64>,
    pub errors: Vec<LineError>,
}

impl CorpusSummary {
    pub fn types(&self) -> usize {
        self.token_counts.len()
    }
}
