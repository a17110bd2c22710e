use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::BpeModel;
use crate::error::{check_probability, Error, Result};
use crate::report::{DistributionReport, ReportKind};
use crate::token::Tokenization;

/// Longest word accepted by the exhaustive dropout oracles.
pub const EXACT_WORD_LIMIT: usize = 12;

/// When dropout coins are drawn for a merge candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoinPolicy {
    /// One coin per adjacent pair occurrence, drawn when the pair first
    /// appears and kept until one of its two symbols is merged away.
    #[default]
    Persistent,
    /// Fresh coins for every candidate in every round.
    Resample,
}

#[derive(Debug, Clone)]
struct Sym {
    text: String,
    start: usize,
    end: usize,
}

/// Identifies an adjacent pair occurrence by its character boundaries.
type PairKey = (usize, usize, usize);

fn key(left: &Sym, right: &Sym) -> PairKey {
    (left.start, left.end, right.end)
}

impl BpeModel {
    fn symbols(&self, word: &str) -> Result<Vec<Sym>> {
        if word.is_empty() {
            return Err(Error::EmptyWord);
        }
        word.chars()
            .enumerate()
            .map(|(i, ch)| {
                if self.alphabet.contains(&ch) {
                    Ok(Sym {
                        text: ch.to_string(),
                        start: i,
                        end: i + 1,
                    })
                } else {
                    Err(Error::Untokenizable {
                        word: word.to_owned(),
                        ch,
                    })
                }
            })
            .collect()
    }

    /// Lowest-rank merge among candidates whose coin says they survive.
    fn best_candidate(&self, syms: &[Sym], coins: &HashMap<PairKey, bool>) -> Option<usize> {
        syms.windows(2)
            .filter(|w| coins.get(&key(&w[0], &w[1])).copied().unwrap_or(false))
            .filter_map(|w| self.merges.rank(&w[0].text, &w[1].text))
            .min()
    }

    /// Merges every surviving occurrence of the merge at `rank`, left to right.
    fn apply(&self, syms: Vec<Sym>, rank: usize, coins: &HashMap<PairKey, bool>) -> Vec<Sym> {
        let mut out: Vec<Sym> = Vec::with_capacity(syms.len());
        let mut iter = syms.into_iter().peekable();
        while let Some(s) = iter.next() {
            let merge = iter.peek().is_some_and(|n| {
                coins.get(&key(&s, n)).copied().unwrap_or(false)
                    && self.merges.rank(&s.text, &n.text) == Some(rank)
            });
            if merge {
                let n = iter.next().unwrap();
                out.push(Sym {
                    text: s.text + &n.text,
                    start: s.start,
                    end: n.end,
                });
            } else {
                out.push(s);
            }
        }
        out
    }

    /// Candidate pairs (present in the merge list) whose coin is not yet drawn.
    fn undecided(&self, syms: &[Sym], coins: &HashMap<PairKey, bool>) -> Vec<PairKey> {
        syms.windows(2)
            .filter(|w| self.merges.rank(&w[0].text, &w[1].text).is_some())
            .map(|w| key(&w[0], &w[1]))
            .filter(|k| !coins.contains_key(k))
            .collect()
    }

    fn run<F: FnMut() -> bool>(&self, mut syms: Vec<Sym>, policy: CoinPolicy, mut coin: F) -> Tokenization {
        let mut coins = HashMap::new();
        loop {
            if policy == CoinPolicy::Resample {
                coins.clear();
            }
            for k in self.undecided(&syms, &coins) {
                coins.insert(k, coin());
            }
            let Some(rank) = self.best_candidate(&syms, &coins) else {
                break;
            };
            syms = self.apply(syms, rank, &coins);
        }
        Tokenization::from_surfaces(syms.into_iter().map(|s| s.text))
    }

    /// Deterministic BPE: applies merges by priority until none applies.
    pub fn encode(&self, word: &str) -> Result<Tokenization> {
        let syms = self.symbols(word)?;
        Ok(self.run(syms, CoinPolicy::Persistent, || true))
    }

    /// BPE-dropout with persistent per-pair coins.
    pub fn encode_dropout<R: Rng + ?Sized>(&self, word: &str, p: f64, rng: &mut R) -> Result<Tokenization> {
        self.encode_dropout_with(word, p, CoinPolicy::Persistent, rng)
    }

    /// BPE-dropout: each merge candidate is discarded with probability `p`.
    ///
    /// `p = 0` never touches `rng` and equals [`BpeModel::encode`]; `p = 1`
    /// returns the character sequence.
    pub fn encode_dropout_with<R: Rng + ?Sized>(
        &self,
        word: &str,
        p: f64,
        policy: CoinPolicy,
        rng: &mut R,
    ) -> Result<Tokenization> {
        check_probability(p)?;
        let syms = self.symbols(word)?;
        Ok(if p == 0.0 {
            self.run(syms, policy, || true)
        } else if p == 1.0 {
            self.run(syms, policy, || false)
        } else {
            self.run(syms, policy, || rng.gen::<f64>() > p)
        })
    }
}

/// Exact output distribution of BPE-dropout, by branching on every coin.
pub fn exact_bpe_dropout_dist(
    word: &str,
    model: &BpeModel,
    p: f64,
    policy: CoinPolicy,
) -> Result<DistributionReport> {
    check_probability(p)?;
    let len = word.chars().count();
    if len > EXACT_WORD_LIMIT {
        return Err(Error::WordTooLong {
            word: word.to_owned(),
            len,
            limit: EXACT_WORD_LIMIT,
        });
    }
    let syms = model.symbols(word)?;
    let mut acc = BTreeMap::new();
    explore(model, syms, HashMap::new(), 1.0, p, policy, &mut acc);
    let canonical = model.encode(word)?;
    Ok(DistributionReport::new(word, acc, ReportKind::Exact, canonical))
}

fn explore(
    model: &BpeModel,
    syms: Vec<Sym>,
    mut coins: HashMap<PairKey, bool>,
    prob: f64,
    p: f64,
    policy: CoinPolicy,
    acc: &mut BTreeMap<Tokenization, f64>,
) {
    if let Some(&k) = model.undecided(&syms, &coins).first() {
        for (survives, weight) in [(true, 1.0 - p), (false, p)] {
            if weight > 0.0 {
                let mut branch = coins.clone();
                branch.insert(k, survives);
                explore(model, syms.clone(), branch, prob * weight, p, policy, acc);
            }
        }
        return;
    }
    match model.best_candidate(&syms, &coins) {
        None => {
            let t = Tokenization::from_surfaces(syms.into_iter().map(|s| s.text));
            *acc.entry(t).or_insert(0.0) += prob;
        }
        Some(rank) => {
            let next = model.apply(syms, rank, &coins);
            if policy == CoinPolicy::Resample {
                coins.clear();
            }
            explore(model, next, coins, prob, p, policy, acc);
        }
    }
}
