//! Greedy longest-match (WordPiece-style) encoding with optional dropout.

use std::collections::BTreeMap;

use rand::Rng;

use crate::bpe::{BpeModel, EXACT_WORD_LIMIT};
use crate::error::{check_probability, Error, Result};
use crate::report::{DistributionReport, ReportKind};
use crate::token::{PositionClass, Subword, Tokenization};
use crate::vocab::SubwordVocab;

/// Lengths `j` such that `chars[i..i + j]` is an entry of the class admissible at `i`.
fn hits(chars: &[char], i: usize, vocab: &SubwordVocab) -> Vec<usize> {
    let class = PositionClass::at(i);
    let mut s = String::new();
    let mut out = Vec::new();
    for j in 1..=vocab.max_len().min(chars.len() - i) {
        s.push(chars[i + j - 1]);
        if vocab.contains(&s, class) {
            out.push(j);
        }
    }
    out
}

/// Builds the subword for `chars[i..i + len]`. A length-1 fallback must
/// itself be in the vocabulary.
fn emit(word: &str, chars: &[char], i: usize, len: usize, vocab: &SubwordVocab) -> Result<Subword> {
    let class = PositionClass::at(i);
    let surface: String = chars[i..i + len].iter().collect();
    if len == 1 && !vocab.contains(&surface, class) {
        return Err(Error::Untokenizable {
            word: word.to_owned(),
            ch: chars[i],
        });
    }
    Ok(Subword::new(surface, class))
}

fn run<F: FnMut() -> bool>(word: &str, vocab: &SubwordVocab, mut coin: F) -> Result<Tokenization> {
    if word.is_empty() {
        return Err(Error::EmptyWord);
    }
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let mut len = 1;
        for j in hits(&chars, i, vocab) {
            if coin() {
                len = j;
            }
        }
        out.push(emit(word, &chars, i, len, vocab)?);
        i += len;
    }
    Ok(out.into())
}

/// Deterministic greedy longest match.
pub fn maxmatch_encode_deterministic(word: &str, vocab: &SubwordVocab) -> Result<Tokenization> {
    run(word, vocab, || true)
}

/// MaxMatch-dropout: every dictionary hit is kept with probability `1 - p`
/// and the longest kept hit wins; with no hit kept the single character is
/// emitted. Coins are drawn in increasing match length at each position.
pub fn maxmatch_encode<R: Rng + ?Sized>(
    word: &str,
    vocab: &SubwordVocab,
    p: f64,
    rng: &mut R,
) -> Result<Tokenization> {
    check_probability(p)?;
    if p == 0.0 {
        run(word, vocab, || true)
    } else if p == 1.0 {
        run(word, vocab, || false)
    } else {
        run(word, vocab, || rng.gen::<f64>() > p)
    }
}

/// Exact output distribution of MaxMatch-dropout by branching on every coin.
pub fn exact_maxmatch_dropout_dist(word: &str, vocab: &SubwordVocab, p: f64) -> Result<DistributionReport> {
    check_probability(p)?;
    let chars: Vec<char> = word.chars().collect();
    if chars.len() > EXACT_WORD_LIMIT {
        return Err(Error::WordTooLong {
            word: word.to_owned(),
            len: chars.len(),
            limit: EXACT_WORD_LIMIT,
        });
    }
    let canonical = maxmatch_encode_deterministic(word, vocab)?;
    let mut acc = BTreeMap::new();
    let mut prefix = Vec::new();
    explore(word, &chars, 0, vocab, p, 1.0, &mut prefix, &mut acc)?;
    Ok(DistributionReport::new(word, acc, ReportKind::Exact, canonical))
}

#[allow(clippy::too_many_arguments)]
fn explore(
    word: &str,
    chars: &[char],
    i: usize,
    vocab: &SubwordVocab,
    p: f64,
    prob: f64,
    prefix: &mut Vec<Subword>,
    acc: &mut BTreeMap<Tokenization, f64>,
) -> Result<()> {
    if i == chars.len() {
        *acc.entry(Tokenization::from(prefix.clone())).or_insert(0.0) += prob;
        return Ok(());
    }
    let mut by_len = BTreeMap::new();
    length_choices(&hits(chars, i, vocab), 0, 1, prob, p, &mut by_len);
    for (len, q) in by_len {
        prefix.push(emit(word, chars, i, len, vocab)?);
        explore(word, chars, i + len, vocab, p, q, prefix, acc)?;
        prefix.pop();
    }
    Ok(())
}

/// Enumerates coin assignments over `hits`; each selects the longest kept
/// hit, or length 1 when none is kept.
fn length_choices(hits: &[usize], k: usize, chosen: usize, prob: f64, p: f64, out: &mut BTreeMap<usize, f64>) {
    if prob == 0.0 {
        return;
    }
    if k == hits.len() {
        *out.entry(chosen).or_insert(0.0) += prob;
        return;
    }
    length_choices(hits, k + 1, hits[k], prob * (1.0 - p), p, out);
    length_choices(hits, k + 1, chosen, prob * p, p, out);
}

/// Marked vocabulary from a BPE model: every token in both position classes.
pub fn derive_marked_vocab(model: &BpeModel, marker: &str) -> SubwordVocab {
    let mut vocab = SubwordVocab::new(marker);
    for class in [PositionClass::Initial, PositionClass::Internal] {
        for token in model.vocab() {
            vocab.insert(token, class);
        }
    }
    vocab
}
