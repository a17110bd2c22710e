//! Tokenization lattices and path samplers.
//!
//! The lattice of a word `w` has one node per character boundary `0..=|w|`
//! and an edge `i -> j` for every vocabulary entry whose surface is
//! `w[i..j]` and whose position class is admissible at `i` (initial iff
//! `i == 0`). This is the composition of the linear automaton spelling `w`
//! with the character-to-subword transducer of the vocabulary, built
//! directly. Nodes not on a complete path are pruned, so every walk from
//! node 0 reaches node `|w|`.

use std::fmt::Write as _;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::token::{PositionClass, Subword, Tokenization};
use crate::vocab::SubwordVocab;

/// Default cap on rejected proposals in [`TokenizationLattice::unbiased_sample`].
pub const DEFAULT_MAX_REJECTIONS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeEdge {
    pub from: usize,
    pub to: usize,
    pub subword: Subword,
}

#[derive(Debug, Clone)]
pub struct TokenizationLattice {
    word: String,
    /// Out-edges per node, sorted by target. Empty for the final node and pruned nodes.
    out: Vec<Vec<LatticeEdge>>,
    /// Number of paths from each node to the final node.
    suffix: Vec<BigUint>,
    /// `suffix` as u64 when the total path count fits.
    suffix_small: Option<Vec<u64>>,
}

/// A path drawn by [`TokenizationLattice::biased_sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub tokenization: Tokenization,
    /// Product of `1 / out_degree` over the visited non-final nodes.
    pub proposal_probability: f64,
    /// Visited nodes, from 0 to the final node inclusive.
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasedSample {
    pub tokenization: Tokenization,
    /// Proposals drawn, including the accepted one.
    pub attempts: u64,
}

impl TokenizationLattice {
    pub fn build(word: &str, vocab: &SubwordVocab) -> Result<TokenizationLattice> {
        let chars: Vec<char> = word.chars().collect();
        let n = chars.len();
        if n == 0 {
            return Err(Error::EmptyWord);
        }

        let mut out: Vec<Vec<LatticeEdge>> = vec![Vec::new(); n + 1];
        for (i, edges) in out.iter_mut().enumerate().take(n) {
            let class = PositionClass::at(i);
            let mut s = String::new();
            for j in i + 1..=(i + vocab.max_len()).min(n) {
                s.push(chars[j - 1]);
                if vocab.contains(&s, class) {
                    edges.push(LatticeEdge {
                        from: i,
                        to: j,
                        subword: Subword::new(s.clone(), class),
                    });
                }
            }
        }

        let mut reachable = vec![false; n + 1];
        reachable[0] = true;
        for i in 0..n {
            if reachable[i] {
                for e in &out[i] {
                    reachable[e.to] = true;
                }
            }
        }
        for (i, edges) in out.iter_mut().enumerate() {
            if !reachable[i] {
                edges.clear();
            }
        }

        let suffix = suffix_counts(&out, n);
        if suffix[0].is_zero() {
            return Err(Error::NoSegmentation {
                word: word.to_owned(),
            });
        }
        for edges in &mut out {
            edges.retain(|e| !suffix[e.to].is_zero());
        }
        let suffix = suffix_counts(&out, n);
        let suffix_small = suffix[0]
            .to_u64()
            .map(|_| suffix.iter().map(|c| c.to_u64().unwrap()).collect());

        Ok(TokenizationLattice {
            word: word.to_owned(),
            out,
            suffix,
            suffix_small,
        })
    }

    pub fn word(&self) -> &str {
        &self.word
    }

    /// Index of the final node, i.e. the word length in characters.
    pub fn final_node(&self) -> usize {
        self.out.len() - 1
    }

    pub fn out_edges(&self, node: usize) -> &[LatticeEdge] {
        &self.out[node]
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out[node].len()
    }

    pub fn edges(&self) -> impl Iterator<Item = &LatticeEdge> {
        self.out.iter().flatten()
    }

    /// Non-final nodes that lie on some complete path.
    pub fn live_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.final_node()).filter(|&i| !self.out[i].is_empty())
    }

    /// Number of source-to-sink paths, i.e. of distinct tokenizations.
    pub fn count_paths(&self) -> BigUint {
        self.suffix[0].clone()
    }

    pub fn suffix_count(&self, node: usize) -> &BigUint {
        &self.suffix[node]
    }

    /// All tokenizations, ordered lexicographically by edge choice (shorter
    /// subwords first). Refuses when there are more than `limit`.
    pub fn enumerate_paths(&self, limit: usize) -> Result<Vec<Tokenization>> {
        let count = self.count_paths();
        if count > BigUint::from(limit) {
            return Err(Error::TooManyPaths { count, limit });
        }
        let mut paths = Vec::with_capacity(limit.min(count.to_usize().unwrap_or(limit)));
        let mut prefix = Vec::new();
        self.enumerate_from(0, &mut prefix, &mut paths);
        Ok(paths)
    }

    fn enumerate_from(&self, node: usize, prefix: &mut Vec<Subword>, out: &mut Vec<Tokenization>) {
        if node == self.final_node() {
            out.push(prefix.clone().into());
            return;
        }
        for e in &self.out[node] {
            prefix.push(e.subword.clone());
            self.enumerate_from(e.to, prefix, out);
            prefix.pop();
        }
    }

    /// Random walk choosing each out-edge uniformly.
    pub fn biased_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledPath {
        let mut node = 0;
        let mut prob = 1.0;
        let mut subwords = Vec::new();
        let mut nodes = vec![0];
        while node != self.final_node() {
            let edges = &self.out[node];
            let e = &edges[rng.gen_range(0..edges.len())];
            prob /= edges.len() as f64;
            subwords.push(e.subword.clone());
            node = e.to;
            nodes.push(node);
        }
        SampledPath {
            tokenization: subwords.into(),
            proposal_probability: prob,
            nodes,
        }
    }

    /// Product of `1 / out_degree` over all live non-final nodes. Every
    /// path's proposal probability is at least this.
    pub fn p_min(&self) -> f64 {
        self.live_nodes()
            .map(|i| 1.0 / self.out_degree(i) as f64)
            .product()
    }

    /// `1 / p_min` as an exact integer.
    pub fn p_min_denominator(&self) -> BigUint {
        self.live_nodes()
            .map(|i| BigUint::from(self.out_degree(i)))
            .product()
    }

    /// `1 / proposal_probability` of a path given by its visited nodes.
    pub fn proposal_denominator(&self, nodes: &[usize]) -> BigUint {
        nodes
            .iter()
            .filter(|&&i| i != self.final_node())
            .map(|&i| BigUint::from(self.out_degree(i)))
            .product()
    }

    /// `p_min / proposal_probability`: the product of `1 / out_degree` over
    /// live nodes the path does not visit.
    fn acceptance_ratio(&self, nodes: &[usize]) -> f64 {
        let mut visited = nodes.iter().peekable();
        let mut ratio = 1.0;
        for i in self.live_nodes() {
            while visited.next_if(|&&v| v < i).is_some() {}
            if visited.next_if_eq(&&i).is_none() {
                ratio /= self.out_degree(i) as f64;
            }
        }
        ratio
    }

    /// Rejection sampler over [`Self::biased_sample`]; the result is uniform
    /// over all tokenizations.
    pub fn unbiased_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<UnbiasedSample> {
        self.unbiased_sample_with_limit(rng, DEFAULT_MAX_REJECTIONS)
    }

    pub fn unbiased_sample_with_limit<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_rejections: u64,
    ) -> Result<UnbiasedSample> {
        let mut attempts = 0;
        loop {
            let path = self.biased_sample(rng);
            attempts += 1;
            if rng.gen::<f64>() < self.acceptance_ratio(&path.nodes) {
                return Ok(UnbiasedSample {
                    tokenization: path.tokenization,
                    attempts,
                });
            }
            if attempts > max_rejections {
                return Err(Error::RejectionLimit(max_rejections));
            }
        }
    }

    /// Uniform sample without rejection: draws a path index below the path
    /// count and unranks it with [`Self::path_at`].
    pub fn exact_uniform_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Tokenization {
        match &self.suffix_small {
            Some(small) => self.unrank_small(rng.gen_range(0..small[0]), small),
            None => self.unrank(rng.gen_biguint_below(&self.suffix[0])),
        }
    }

    /// The `index`-th path in [`Self::enumerate_paths`] order, or `None` if
    /// `index >= count_paths()`. At each node the edge is chosen by
    /// subtracting the suffix counts of the preceding edges' targets.
    pub fn path_at(&self, index: &BigUint) -> Option<Tokenization> {
        if index >= &self.suffix[0] {
            return None;
        }
        Some(match (&self.suffix_small, index.to_u64()) {
            (Some(small), Some(i)) => self.unrank_small(i, small),
            _ => self.unrank(index.clone()),
        })
    }

    fn unrank_small(&self, mut r: u64, small: &[u64]) -> Tokenization {
        let mut subwords = Vec::new();
        let mut node = 0;
        while node != self.final_node() {
            let mut chosen = None;
            for e in &self.out[node] {
                let c = small[e.to];
                if r < c {
                    chosen = Some(e);
                    break;
                }
                r -= c;
            }
            let e = chosen.expect("index below suffix count");
            subwords.push(e.subword.clone());
            node = e.to;
        }
        subwords.into()
    }

    fn unrank(&self, mut r: BigUint) -> Tokenization {
        let mut subwords = Vec::new();
        let mut node = 0;
        while node != self.final_node() {
            let mut chosen = None;
            for e in &self.out[node] {
                let c = &self.suffix[e.to];
                if &r < c {
                    chosen = Some(e);
                    break;
                }
                r -= c;
            }
            let e = chosen.expect("index below suffix count");
            subwords.push(e.subword.clone());
            node = e.to;
        }
        subwords.into()
    }

    /// Visited nodes of `t` if it is a path of this lattice.
    pub fn path_nodes(&self, t: &Tokenization) -> Option<Vec<usize>> {
        let mut node = 0;
        let mut nodes = vec![0];
        for sw in t.subwords() {
            let e = self.out.get(node)?.iter().find(|e| &e.subword == sw)?;
            node = e.to;
            nodes.push(node);
        }
        (node == self.final_node()).then_some(nodes)
    }

    /// Debug dump: two header lines, then `from to surface class` per edge.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# word: {}", self.word).unwrap();
        writeln!(s, "# paths: {}", self.count_paths()).unwrap();
        for e in self.edges() {
            writeln!(s, "{} {} {} {}", e.from, e.to, e.subword.surface, e.subword.class.as_str()).unwrap();
        }
        s
    }
}

fn suffix_counts(out: &[Vec<LatticeEdge>], n: usize) -> Vec<BigUint> {
    let mut counts = vec![BigUint::zero(); n + 1];
    counts[n] = BigUint::one();
    for i in (0..n).rev() {
        let mut c = BigUint::zero();
        for e in &out[i] {
            c += &counts[e.to];
        }
        counts[i] = c;
    }
    counts
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn fig2() -> SubwordVocab {
        SubwordVocab::parse("a\nb\nc\nab\n#a\n#b\n#c\n#ab\n#bc\n", "#").unwrap()
    }

    fn ababc() -> TokenizationLattice {
        TokenizationLattice::build("ababc", &fig2()).unwrap()
    }

    #[test]
    fn fig2_structure() {
        let l = ababc();
        assert_eq!(l.count_paths(), BigUint::from(6u32));
        let degrees: Vec<_> = (0..=5).map(|i| l.out_degree(i)).collect();
        assert_eq!(degrees, [2, 1, 2, 2, 1, 0]);
        let suffix: Vec<_> = (0..=5).map(|i| l.suffix_count(i).to_u64().unwrap()).collect();
        assert_eq!(suffix, [6, 3, 3, 2, 1, 1]);
        assert!((l.p_min() - 0.125).abs() < 1e-15);
        assert_eq!(l.p_min_denominator(), BigUint::from(8u32));
    }

    #[test]
    fn enumeration_order_and_guard() {
        let l = ababc();
        let paths: Vec<_> = l
            .enumerate_paths(10)
            .unwrap()
            .iter()
            .map(|t| t.to_marked_string("#"))
            .collect();
        assert_eq!(
            paths,
            [
                "a #b #a #b #c",
                "a #b #a #bc",
                "a #b #ab #c",
                "ab #a #b #c",
                "ab #a #bc",
                "ab #ab #c",
            ]
        );
        match l.enumerate_paths(1) {
            Err(Error::TooManyPaths { count, .. }) => assert_eq!(count, BigUint::from(6u32)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn proposal_and_acceptance() {
        let l = ababc();
        let t = Tokenization::from_surfaces(["a", "b", "ab", "c"]);
        let nodes = l.path_nodes(&t).unwrap();
        assert_eq!(nodes, [0, 1, 2, 4, 5]);
        assert_eq!(l.proposal_denominator(&nodes), BigUint::from(4u32));
        assert!((l.acceptance_ratio(&nodes) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_path() {
        let l = TokenizationLattice::build("a", &fig2()).unwrap();
        assert_eq!(l.count_paths(), BigUint::one());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = l.biased_sample(&mut rng);
        assert_eq!(s.proposal_probability, 1.0);
        let u = l.unbiased_sample(&mut rng).unwrap();
        assert_eq!(u.attempts, 1);
        assert_eq!(l.exact_uniform_sample(&mut rng), s.tokenization);
    }

    #[test]
    fn prunes_dead_nodes() {
        let v = SubwordVocab::parse("a\nb\n#b\n#bb\n", "#").unwrap();
        let l = TokenizationLattice::build("abb", &v).unwrap();
        assert_eq!(l.count_paths(), BigUint::from(2u32));

        let v = SubwordVocab::parse("a\nb\n#a\n", "#").unwrap();
        assert!(matches!(
            TokenizationLattice::build("ab", &v),
            Err(Error::NoSegmentation { .. })
        ));
    }

    #[test]
    fn two_char_word() {
        let v = SubwordVocab::parse("a\nb\n#a\n#b\n", "#").unwrap();
        let l = TokenizationLattice::build("ab", &v).unwrap();
        assert_eq!(l.count_paths(), BigUint::one());
        let v = SubwordVocab::parse("a\nb\n#a\n#b\nab\n", "#").unwrap();
        let l = TokenizationLattice::build("ab", &v).unwrap();
        assert_eq!(l.count_paths(), BigUint::from(2u32));
    }

    #[test]
    fn big_counts_do_not_overflow() {
        let mut v = SubwordVocab::default();
        v.insert_both("a");
        v.insert_both("aa");
        // Fibonacci(201) paths for 200 characters.
        let l = TokenizationLattice::build(&"a".repeat(200), &v).unwrap();
        assert!(l.count_paths().to_u64().is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = l.exact_uniform_sample(&mut rng);
        assert_eq!(t.word().len(), 200);
        assert!(l.path_nodes(&t).is_some());
    }

    #[test]
    fn unranking_is_a_bijection() {
        let l = ababc();
        let listed = l.enumerate_paths(10).unwrap();
        let unranked: Vec<_> = (0..6u32).map(|i| l.path_at(&BigUint::from(i)).unwrap()).collect();
        assert_eq!(unranked, listed);
        assert!(l.path_at(&BigUint::from(6u32)).is_none());
    }

    #[test]
    fn dump_format() {
        let l = TokenizationLattice::build("ab", &fig2()).unwrap();
        assert_eq!(l.dump(), "# word: ab\n# paths: 2\n0 1 a initial\n0 2 ab initial\n1 2 b internal\n");
    }
}
