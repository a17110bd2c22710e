use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet};

use super::{BpeModel, MergeList};
use crate::corpus::WordCounts;
use crate::error::{Error, Result};

type Pair = (u32, u32);

/// Learns up to `target_merges` merges from word frequencies.
///
/// Each round merges the adjacent pair with the highest count weighted by word
/// frequency; ties go to the lexicographically smallest `(left, right)`.
/// Training stops early once every word is a single symbol.
///
/// Pair counts are maintained incrementally: a merge only revisits the words
/// that contain the merged pair.
pub fn train_bpe(counts: &WordCounts, target_merges: usize) -> Result<BpeModel> {
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut state = TrainState::default();
    for (w, c) in counts.iter() {
        let syms: Vec<u32> = w.chars().map(|ch| state.intern(ch.to_string())).collect();
        let index = state.words.len();
        for pair in syms.windows(2) {
            state.adjust((pair[0], pair[1]), c as i64);
            state.occurs.entry((pair[0], pair[1])).or_default().insert(index);
        }
        state.words.push((syms, c));
    }

    let mut merges = MergeList::new();
    for _ in 0..target_merges {
        let Some((_, left, right)) = state.ranked.first().cloned() else {
            break;
        };
        let pair = (state.ids[&left], state.ids[&right]);
        let merged = state.intern(format!("{left}{right}"));
        state.apply_merge(pair, merged);
        merges.push(left, right);
    }

    BpeModel::new(counts.alphabet().iter().copied(), merges)
}

#[derive(Default)]
struct TrainState {
    symbols: Vec<String>,
    ids: HashMap<String, u32>,
    words: Vec<(Vec<u32>, u64)>,
    pair_counts: HashMap<Pair, u64>,
    /// Words that contained each pair when it was last counted; may be stale.
    occurs: HashMap<Pair, HashSet<usize>>,
    /// Pairs with a positive count, best first.
    ranked: BTreeSet<(Reverse<u64>, String, String)>,
}

impl TrainState {
    fn intern(&mut self, s: String) -> u32 {
        if let Some(&id) = self.ids.get(&s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(s.clone());
        self.ids.insert(s, id);
        id
    }

    fn rank_key(&self, pair: Pair, count: u64) -> (Reverse<u64>, String, String) {
        (
            Reverse(count),
            self.symbols[pair.0 as usize].clone(),
            self.symbols[pair.1 as usize].clone(),
        )
    }

    fn adjust(&mut self, pair: Pair, delta: i64) {
        let old = self.pair_counts.get(&pair).copied().unwrap_or(0);
        let new = (old as i64 + delta) as u64;
        if old > 0 {
            let key = self.rank_key(pair, old);
            self.ranked.remove(&key);
        }
        if new > 0 {
            let key = self.rank_key(pair, new);
            self.ranked.insert(key);
            self.pair_counts.insert(pair, new);
        } else {
            self.pair_counts.remove(&pair);
        }
    }

    fn apply_merge(&mut self, pair: Pair, merged: u32) {
        let Some(candidates) = self.occurs.remove(&pair) else {
            return;
        };
        let mut candidates: Vec<usize> = candidates.into_iter().collect();
        candidates.sort_unstable();
        let mut deltas: HashMap<Pair, i64> = HashMap::new();
        for index in candidates {
            let (syms, c) = &self.words[index];
            let c = *c as i64;
            let replaced = merge_pair(syms, pair, merged);
            if replaced.len() == syms.len() {
                continue;
            }
            for w in syms.windows(2) {
                *deltas.entry((w[0], w[1])).or_insert(0) -= c;
            }
            for w in replaced.windows(2) {
                *deltas.entry((w[0], w[1])).or_insert(0) += c;
                self.occurs.entry((w[0], w[1])).or_default().insert(index);
            }
            self.words[index].0 = replaced;
        }
        for (p, d) in deltas {
            if d != 0 {
                self.adjust(p, d);
            }
        }
    }
}

/// Replaces every occurrence of `pair` left to right with `merged`.
fn merge_pair(syms: &[u32], pair: Pair, merged: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && (syms[i], syms[i + 1]) == pair {
            out.push(merged);
            i += 2;
        } else {
            out.push(syms[i]);
            i += 1;
        }
    }
    out
}
