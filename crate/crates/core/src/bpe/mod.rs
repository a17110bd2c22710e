//! Byte-pair encoding: training, deterministic and dropout inference.

mod encode;
mod train;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use indexmap::IndexSet;

use crate::error::{Error, Result};

pub use encode::{exact_bpe_dropout_dist, CoinPolicy, EXACT_WORD_LIMIT};
pub use train::train_bpe;

pub const VOCAB_FILE: &str = "vocab.txt";
pub const MERGES_FILE: &str = "merges.txt";

/// Ordered merge sequence; earlier merges have higher priority.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeList {
    pairs: Vec<(String, String)>,
    ranks: HashMap<String, HashMap<String, usize>>,
}

impl MergeList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a merge. Returns false if the pair is already present.
    pub fn push(&mut self, left: impl Into<String>, right: impl Into<String>) -> bool {
        let (left, right) = (left.into(), right.into());
        let rank = self.pairs.len();
        let by_right = self.ranks.entry(left.clone()).or_default();
        if by_right.contains_key(&right) {
            return false;
        }
        by_right.insert(right.clone(), rank);
        self.pairs.push((left, right));
        true
    }

    /// Priority of `(left, right)`; lower is applied first.
    pub fn rank(&self, left: &str, right: &str) -> Option<usize> {
        self.ranks.get(left)?.get(right).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(l, r)| (l.as_str(), r.as_str()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn parse(text: &str) -> Result<MergeList> {
        let mut merges = MergeList::new();
        for (i, line) in text.lines().enumerate() {
            let bad = |reason: &str| Error::Format {
                what: "merges file",
                line: i + 1,
                reason: reason.to_owned(),
            };
            let mut parts = line.split(' ');
            let (Some(l), Some(r), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected \"left right\""));
            };
            if l.is_empty() || r.is_empty() {
                return Err(bad("empty token"));
            }
            if !merges.push(l, r) {
                return Err(bad("duplicate merge"));
            }
        }
        Ok(merges)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (l, r) in self.iter() {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

/// A trained or loaded BPE tokenizer: alphabet, merges and resulting vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    alphabet: BTreeSet<char>,
    merges: MergeList,
    vocab: IndexSet<String>,
}

impl BpeModel {
    /// Builds a model, checking that every merge side is a character or an
    /// earlier merge product.
    pub fn new(alphabet: impl IntoIterator<Item = char>, merges: MergeList) -> Result<BpeModel> {
        let alphabet: BTreeSet<char> = alphabet.into_iter().collect();
        let mut vocab: IndexSet<String> = alphabet.iter().map(|c| c.to_string()).collect();
        for (i, (l, r)) in merges.iter().enumerate() {
            for side in [l, r] {
                if !vocab.contains(side) {
                    return Err(Error::InvalidModel(format!(
                        "merge {} ({l} {r}) uses {side:?}, which is neither a character nor an earlier product",
                        i + 1
                    )));
                }
            }
            vocab.insert(format!("{l}{r}"));
        }
        Ok(BpeModel {
            alphabet,
            merges,
            vocab,
        })
    }

    /// Parses vocab and merges file contents. The vocab must equal
    /// alphabet ∪ merge products; its line order is kept.
    pub fn from_files_text(vocab_text: &str, merges_text: &str) -> Result<BpeModel> {
        let merges = MergeList::parse(merges_text)?;
        let mut vocab = IndexSet::new();
        let mut alphabet = BTreeSet::new();
        for (i, line) in vocab_text.lines().enumerate() {
            if line.is_empty() || line.chars().any(char::is_whitespace) {
                return Err(Error::Format {
                    what: "vocab file",
                    line: i + 1,
                    reason: "empty token or whitespace".into(),
                });
            }
            let mut chars = line.chars();
            if let (Some(c), None) = (chars.next(), chars.next()) {
                alphabet.insert(c);
            }
            if !vocab.insert(line.to_owned()) {
                return Err(Error::Format {
                    what: "vocab file",
                    line: i + 1,
                    reason: "duplicate token".into(),
                });
            }
        }
        let mut model = BpeModel::new(alphabet, merges)?;
        let derived: BTreeSet<&String> = model.vocab.iter().collect();
        let given: BTreeSet<&String> = vocab.iter().collect();
        if derived != given {
            let extra: Vec<_> = given.difference(&derived).take(3).collect();
            return Err(Error::InvalidModel(format!(
                "vocab does not match alphabet plus merge products (e.g. {extra:?})"
            )));
        }
        model.vocab = vocab;
        Ok(model)
    }

    pub fn load(dir: &Path) -> Result<BpeModel> {
        let vocab = fs::read_to_string(dir.join(VOCAB_FILE))?;
        let merges = fs::read_to_string(dir.join(MERGES_FILE))?;
        BpeModel::from_files_text(&vocab, &merges)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(VOCAB_FILE), self.vocab_file_string())?;
        fs::write(dir.join(MERGES_FILE), self.merges.to_file_string())?;
        Ok(())
    }

    pub fn vocab_file_string(&self) -> String {
        let mut out = String::new();
        for t in &self.vocab {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }

    pub fn merges(&self) -> &MergeList {
        &self.merges
    }

    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.vocab.iter().map(String::as_str)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains(token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lemma_merges() -> MergeList {
        let mut m = MergeList::new();
        m.push("a", "b");
        m.push("b", "b");
        m.push("b", "c");
        m
    }

    #[test]
    fn vocab_is_alphabet_plus_products() {
        let model = BpeModel::new("abc".chars(), lemma_merges()).unwrap();
        let v: Vec<_> = model.vocab().collect();
        assert_eq!(v, ["a", "b", "c", "ab", "bb", "bc"]);
    }

    #[test]
    fn rejects_unreachable_merge() {
        let mut m = MergeList::new();
        m.push("ab", "c");
        assert!(BpeModel::new("abc".chars(), m).is_err());
    }

    #[test]
    fn files_round_trip() {
        let model = BpeModel::new("abc".chars(), lemma_merges()).unwrap();
        let vocab = model.vocab_file_string();
        let merges = model.merges().to_file_string();
        assert_eq!(merges, "a b\nb b\nb c\n");
        let back = BpeModel::from_files_text(&vocab, &merges).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.vocab_file_string(), vocab);
    }

    #[test]
    fn rejects_inconsistent_files() {
        assert!(BpeModel::from_files_text("a\nb\nabc\n", "a b\n").is_err());
        assert!(BpeModel::from_files_text("a\nb\nab\n", "a b\na b\n").is_err());
        assert!(BpeModel::from_files_text("a\nb\nab\n", "a b c\n").is_err());
    }
}
