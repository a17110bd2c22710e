//! Measurements over tokenization distributions: empirical tables, diversity
//! curves, Shannon efficiency of per-word distributions, Rényi efficiency of
//! tokenized corpora and the non-uniformity checks for dropout tokenizers.

use std::collections::{BTreeMap, HashSet};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;

use crate::bpe::{exact_bpe_dropout_dist, BpeModel, CoinPolicy};
use crate::error::{Error, Result};
use crate::lattice::TokenizationLattice;
use crate::maxmatch::{derive_marked_vocab, exact_maxmatch_dropout_dist};
use crate::report::{DistributionReport, ReportKind};
use crate::seed::{derive_rng, rng_from_seed, TokRng};
use crate::token::{PositionClass, Tokenization};
use crate::vocab::SubwordVocab;

pub use crate::report::{write_reports, ReportRow};

/// Zero rows for unobserved paths are added only below this many paths.
pub const DEFAULT_REPORT_LIMIT: usize = 10_000;

/// Threshold on `max - min` probability above which a distribution is non-uniform.
pub const UNIFORMITY_EPSILON: f64 = 1e-9;

/// Draws `n` samples from `sample` with one RNG seeded by `seed`.
pub fn empirical_distribution<F>(
    word: &str,
    canonical: Tokenization,
    n: u64,
    seed: u64,
    mut sample: F,
) -> Result<DistributionReport>
where
    F: FnMut(&mut TokRng) -> Result<Tokenization>,
{
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut counts: BTreeMap<Tokenization, u64> = BTreeMap::new();
    for _ in 0..n {
        *counts.entry(sample(&mut rng)?).or_insert(0) += 1;
    }
    let rows = counts.into_iter().map(|(t, c)| (t, c as f64 / n as f64));
    Ok(DistributionReport::new(
        word,
        rows,
        ReportKind::Empirical { samples: n, seed },
        canonical,
    ))
}

/// Adds zero rows for every lattice path when there are at most `limit` paths.
pub fn pad_unobserved(report: &mut DistributionReport, lattice: &TokenizationLattice, limit: usize) {
    if let Ok(paths) = lattice.enumerate_paths(limit) {
        report.pad_with(paths);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub samples: u64,
    pub mean_unique: f64,
}

/// Mean number of distinct tokenizations among `n` samples, for each `n` in
/// `grid`, averaged over `repeats` independently seeded runs.
pub fn unique_count_curve<F>(grid: &[u64], repeats: u64, seed: u64, sample: F) -> Result<Vec<CurvePoint>>
where
    F: Fn(&mut TokRng) -> Result<Tokenization> + Sync,
{
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("sample grid must be ascending".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    grid.iter()
        .enumerate()
        .map(|(gi, &n)| {
            let uniques = (0..repeats)
                .into_par_iter()
                .map(|r| {
                    let mut rng = derive_rng(seed, &[gi as u64, r]);
                    let mut seen = HashSet::new();
                    for _ in 0..n {
                        seen.insert(sample(&mut rng)?);
                    }
                    Ok(seen.len() as u64)
                })
                .collect::<Result<Vec<u64>>>()?;
            Ok(CurvePoint {
                samples: n,
                mean_unique: uniques.iter().sum::<u64>() as f64 / repeats as f64,
            })
        })
        .collect()
}

/// Expected distinct outcomes after `n` uniform draws from `t` outcomes.
pub fn coupon_collector_expectation(t: f64, n: u64) -> f64 {
    t * (1.0 - (1.0 - 1.0 / t).powf(n as f64))
}

fn shannon_bits(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Shannon entropy of the non-canonical part of `report`, renormalized, over
/// `log2(T - 1)` where `T` is the word's lattice path count.
///
/// Zero non-canonical mass gives 0. With `T = 2` the single non-canonical
/// tokenization is trivially uniform and gives 1 when it has mass.
pub fn shannon_efficiency_excluding_canonical(report: &DistributionReport, paths: &BigUint) -> Result<f64> {
    let two = BigUint::from(2u32);
    if paths < &two {
        return Err(Error::InvalidArgument(format!(
            "efficiency needs at least 2 tokenizations, word has {paths}"
        )));
    }
    let rest: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.tokenization != report.canonical)
        .map(|r| r.probability)
        .collect();
    let mass: f64 = rest.iter().sum();
    if mass <= 0.0 {
        return Ok(0.0);
    }
    let others = paths - BigUint::one();
    if others.is_one() {
        return Ok(1.0);
    }
    let h = shannon_bits(rest.iter().map(|p| p / mass));
    Ok(h / big_log2(&others))
}

fn big_log2(x: &BigUint) -> f64 {
    match x.to_f64() {
        Some(f) if f.is_finite() => f.log2(),
        _ => {
            // Keep the top 64 bits.
            let shift = x.bits().saturating_sub(64);
            (x >> shift).to_f64().unwrap().log2() + shift as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyReport {
    pub alpha: f64,
    pub vocab_size: usize,
    /// Rényi entropy of order `alpha`, in bits.
    pub entropy: f64,
    /// `entropy / log2(vocab_size)`.
    pub efficiency: f64,
}

/// Rényi entropy of order `alpha` in bits. `alpha = 1` is Shannon entropy and
/// `alpha = 0` the log of the support size.
pub fn renyi_entropy(probs: &[f64], alpha: f64) -> f64 {
    if alpha == 1.0 {
        shannon_bits(probs.iter().copied())
    } else if alpha == 0.0 {
        (probs.iter().filter(|&&p| p > 0.0).count() as f64).log2()
    } else {
        let s: f64 = probs.iter().filter(|&&p| p > 0.0).map(|p| p.powf(alpha)).sum();
        s.log2() / (1.0 - alpha)
    }
}

/// Rényi efficiency of a unigram token distribution given by `counts`.
pub fn renyi_efficiency<I>(counts: I, vocab_size: usize, alpha: f64) -> Result<EfficiencyReport>
where
    I: IntoIterator<Item = u64>,
{
    if vocab_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "vocabulary size must be at least 2, got {vocab_size}"
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let counts: Vec<u64> = counts.into_iter().collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("token counts are empty".into()));
    }
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let entropy = renyi_entropy(&probs, alpha);
    Ok(EfficiencyReport {
        alpha,
        vocab_size,
        entropy,
        efficiency: entropy / (vocab_size as f64).log2(),
    })
}

/// A constructed tokenizer and word for the dropout non-uniformity checks.
#[derive(Debug, Clone)]
pub enum LemmaInstance {
    /// Merges `(a,b) > (b,b) > (b,c)`, none of `abb`, `bbc`, `abbc` in the
    /// vocabulary; the word is `abbc`.
    Bpe {
        model: BpeModel,
        word: String,
        policy: CoinPolicy,
    },
    /// Single characters in the vocabulary and a multi-character entry that
    /// is a proper prefix of another entry `z`; the word is `z`.
    MaxMatch { vocab: SubwordVocab, word: String },
}

impl LemmaInstance {
    /// The BPE instance with merges `[(a,b), (b,b), (b,c)]` and word `abbc`.
    pub fn default_bpe() -> LemmaInstance {
        let mut merges = crate::bpe::MergeList::new();
        merges.push("a", "b");
        merges.push("b", "b");
        merges.push("b", "c");
        LemmaInstance::Bpe {
            model: BpeModel::new("abc".chars(), merges).expect("valid merges"),
            word: "abbc".into(),
            policy: CoinPolicy::Persistent,
        }
    }

    /// The MaxMatch instance with vocabulary `{a, b, ab, abb}` in both
    /// classes and word `abb` (`v = ab`, `z = abb`).
    pub fn default_maxmatch() -> LemmaInstance {
        let mut vocab = SubwordVocab::default();
        for s in ["a", "b", "ab", "abb"] {
            vocab.insert_both(s);
        }
        LemmaInstance::MaxMatch {
            vocab,
            word: "abb".into(),
        }
    }

    pub fn word(&self) -> &str {
        match self {
            LemmaInstance::Bpe { word, .. } | LemmaInstance::MaxMatch { word, .. } => word,
        }
    }

    pub fn exact(&self, p: f64) -> Result<DistributionReport> {
        match self {
            LemmaInstance::Bpe { model, word, policy } => exact_bpe_dropout_dist(word, model, p, *policy),
            LemmaInstance::MaxMatch { vocab, word } => exact_maxmatch_dropout_dist(word, vocab, p),
        }
    }

    pub fn lattice(&self) -> Result<TokenizationLattice> {
        match self {
            LemmaInstance::Bpe { model, word, .. } => {
                TokenizationLattice::build(word, &derive_marked_vocab(model, crate::token::DEFAULT_MARKER))
            }
            LemmaInstance::MaxMatch { vocab, word } => TokenizationLattice::build(word, vocab),
        }
    }

    /// Checks the lemma's hypotheses, naming the first clause that fails.
    pub fn check_preconditions(&self) -> Result<()> {
        let fail = |s: String| Err(Error::Precondition(s));
        match self {
            LemmaInstance::Bpe { model, word, .. } => {
                let c: Vec<char> = word.chars().collect();
                if c.len() != 4 || c[1] != c[2] {
                    return fail(format!("word {word:?} is not of the form abbc"));
                }
                let (a, b, cc) = (c[0].to_string(), c[1].to_string(), c[3].to_string());
                let merges = model.merges();
                let ranks = [(&a, &b), (&b, &b), (&b, &cc)].map(|(l, r)| merges.rank(l, r));
                let names = [format!("({a},{b})"), format!("({b},{b})"), format!("({b},{cc})")];
                for (r, n) in ranks.iter().zip(&names) {
                    if r.is_none() {
                        return fail(format!("merge {n} is not in the merge list"));
                    }
                }
                if !(ranks[0] < ranks[1] && ranks[1] < ranks[2]) {
                    return fail(format!("merges are not ordered {} > {} > {}", names[0], names[1], names[2]));
                }
                for t in [format!("{a}{b}{b}"), format!("{b}{b}{cc}"), word.clone()] {
                    if model.contains(&t) {
                        return fail(format!("{t} is in the vocabulary"));
                    }
                }
                Ok(())
            }
            LemmaInstance::MaxMatch { vocab, word } => {
                let mut buf = [0u8; 4];
                for ch in word.chars() {
                    let s = ch.encode_utf8(&mut buf);
                    for class in [PositionClass::Initial, PositionClass::Internal] {
                        if !vocab.contains(s, class) {
                            return fail(format!("character {ch:?} is not a {} entry", class.as_str()));
                        }
                    }
                }
                if !vocab.contains(word, PositionClass::Initial) {
                    return fail(format!("{word} is not an initial vocabulary entry"));
                }
                let chars: Vec<char> = word.chars().collect();
                let has_prefix = (2..chars.len()).any(|k| {
                    let v: String = chars[..k].iter().collect();
                    vocab.contains(&v, PositionClass::Initial)
                });
                if !has_prefix {
                    return fail(format!(
                        "no multi-character entry is a proper prefix of {word}"
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaVerdict {
    /// `max - min > 1e-9` at every grid point.
    NonUniform,
    /// Uniform at one or more grid points.
    UniformSomewhere,
    /// The word has a single tokenization; outside the lemma's scope.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub p: f64,
    pub outcomes: usize,
    pub max: f64,
    pub min: f64,
    pub canonical_probability: f64,
}

impl GridPoint {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub verdict: LemmaVerdict,
    pub paths: BigUint,
    pub points: Vec<GridPoint>,
}

/// Evaluates the exact dropout distribution at each `p` and reports whether
/// it is non-uniform over all tokenizations of the word at every point.
pub fn lemma_grid_check(instance: &LemmaInstance, grid: &[f64]) -> Result<LemmaReport> {
    let lattice = instance.lattice()?;
    let paths = lattice.count_paths();
    if paths.is_one() {
        return Ok(LemmaReport {
            verdict: LemmaVerdict::Degenerate,
            paths,
            points: Vec::new(),
        });
    }
    instance.check_preconditions()?;
    let all_paths = lattice.enumerate_paths(DEFAULT_REPORT_LIMIT)?;
    let mut points = Vec::with_capacity(grid.len());
    for &p in grid {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("grid point {p} is not in (0, 1)")));
        }
        let mut report = instance.exact(p)?;
        report.pad_with(all_paths.iter().cloned());
        let probs = report.rows.iter().map(|r| r.probability);
        points.push(GridPoint {
            p,
            outcomes: report.rows.iter().filter(|r| r.probability > 0.0).count(),
            max: probs.clone().fold(f64::MIN, f64::max),
            min: probs.fold(f64::MAX, f64::min),
            canonical_probability: report.probability(&report.canonical),
        });
    }
    let verdict = if points.iter().all(|g| g.spread() > UNIFORMITY_EPSILON) {
        LemmaVerdict::NonUniform
    } else {
        LemmaVerdict::UniformSomewhere
    };
    Ok(LemmaReport { verdict, paths, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &[&str]) -> Tokenization {
        Tokenization::from_surfaces(s.iter().copied())
    }

    #[test]
    fn renyi_examples() {
        let r = renyi_efficiency(vec![5; 16], 16, 1.0).unwrap();
        assert!((r.efficiency - 1.0).abs() < 1e-12);
        let r = renyi_efficiency([1, 1], 4, 1.0).unwrap();
        assert!((r.efficiency - 0.5).abs() < 1e-12);
        // -log2(1/16 + 9/16)
        let r = renyi_efficiency([1, 3], 4, 2.0).unwrap();
        assert!((r.entropy - 0.678_071_905_112_638).abs() < 1e-12);
        assert!((r.efficiency - 0.339_035_952_556_319).abs() < 1e-12);
    }

    #[test]
    fn renyi_errors() {
        assert!(renyi_efficiency([1, 2], 1, 1.0).is_err());
        assert!(renyi_efficiency(Vec::new(), 4, 1.0).is_err());
        assert!(renyi_efficiency([1], 4, -1.0).is_err());
    }

    #[test]
    fn renyi_order_zero_counts_support() {
        let r = renyi_efficiency([1, 2, 0, 5], 16, 0.0).unwrap();
        assert!((r.entropy - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn shannon_efficiency_cases() {
        let canon = t(&["ab"]);
        let uniform = DistributionReport::new(
            "ab",
            [(t(&["ab"]), 1.0 / 3.0), (t(&["a", "b"]), 1.0 / 3.0), (t(&["x"]), 1.0 / 3.0)],
            ReportKind::Exact,
            canon.clone(),
        );
        let e = shannon_efficiency_excluding_canonical(&uniform, &BigUint::from(3u32)).unwrap();
        assert!((e - 1.0).abs() < 1e-12);

        let point = DistributionReport::new("ab", [(canon.clone(), 1.0)], ReportKind::Exact, canon.clone());
        assert_eq!(shannon_efficiency_excluding_canonical(&point, &BigUint::from(3u32)).unwrap(), 0.0);
        assert!(shannon_efficiency_excluding_canonical(&point, &BigUint::one()).is_err());
    }

    #[test]
    fn big_log2_matches_float() {
        let x = BigUint::from(3u32).pow(900);
        assert!((big_log2(&x) - 900.0 * 3f64.log2()).abs() < 1e-6);
    }

    #[test]
    fn coupon_collector() {
        assert!((coupon_collector_expectation(6.0, 6) - 3.990_612_139_917_695).abs() < 1e-12);
        assert_eq!(coupon_collector_expectation(1.0, 10), 1.0);
    }

    #[test]
    fn preconditions_name_failing_clause() {
        let mut merges = crate::bpe::MergeList::new();
        merges.push("b", "b");
        merges.push("a", "b");
        merges.push("b", "c");
        let inst = LemmaInstance::Bpe {
            model: BpeModel::new("abc".chars(), merges).unwrap(),
            word: "abbc".into(),
            policy: CoinPolicy::Persistent,
        };
        let err = lemma_grid_check(&inst, &[0.5]).unwrap_err().to_string();
        assert!(err.contains("not ordered"), "{err}");

        let mut vocab = SubwordVocab::default();
        for s in ["a", "b", "abb"] {
            vocab.insert_both(s);
        }
        let inst = LemmaInstance::MaxMatch {
            vocab,
            word: "abb".into(),
        };
        let err = lemma_grid_check(&inst, &[0.5]).unwrap_err().to_string();
        assert!(err.contains("proper prefix"), "{err}");
    }

    #[test]
    fn degenerate_word() {
        let mut vocab = SubwordVocab::default();
        vocab.insert_both("a");
        let inst = LemmaInstance::MaxMatch {
            vocab,
            word: "aaa".into(),
        };
        let r = lemma_grid_check(&inst, &[0.5]).unwrap();
        assert_eq!(r.verdict, LemmaVerdict::Degenerate);
    }
}
