//! End-to-end acceptance checks. Runs as a plain binary so the one-line
//! verdict per criterion is always printed; exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::Parser;
use latticetok::analysis::{
    coupon_collector_expectation, empirical_distribution, lemma_grid_check, renyi_efficiency, unique_count_curve,
    LemmaInstance, LemmaVerdict,
};
use latticetok::bpe::{CoinPolicy, MergeList};
use latticetok::regularizer::{BaseTokenizer, SamplingMode, StochasticTokenizer, StochasticTokenizerConfig};
use latticetok::seed::rng_from_seed;
use latticetok::{
    derive_marked_vocab, exact_bpe_dropout_dist, exact_maxmatch_dropout_dist, maxmatch_encode,
    maxmatch_encode_deterministic, train_bpe, BpeModel, PositionClass, SubwordVocab, Tokenization,
    TokenizationLattice, WordCounts,
};
use latticetok_cli::{run, Cli};
use num_bigint::BigUint;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn t(s: &[&str]) -> Tokenization {
    Tokenization::from_surfaces(s.iter().copied())
}

fn lemma_bpe() -> BpeModel {
    let mut m = MergeList::new();
    m.push("a", "b");
    m.push("b", "b");
    m.push("b", "c");
    BpeModel::new("abc".chars(), m).unwrap()
}

fn closed_form(p: f64) -> [(Tokenization, f64); 5] {
    let q = 1.0 - p;
    [
        (t(&["a", "b", "b", "c"]), p.powi(3)),
        (t(&["a", "b", "bc"]), p * p * q),
        (t(&["a", "bb", "c"]), p * q),
        (t(&["ab", "b", "c"]), q * p),
        (t(&["ab", "bc"]), q * q),
    ]
}

fn six_path_lattice() -> TokenizationLattice {
    let vocab = SubwordVocab::parse("a\nb\nc\nab\n#a\n#b\n#c\n#ab\n#bc\n", "#").unwrap();
    TokenizationLattice::build("ababc", &vocab).unwrap()
}

fn tv<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let keys: BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
        / 2.0
}

fn frequencies(samples: impl IntoIterator<Item = Tokenization>) -> BTreeMap<Tokenization, f64> {
    let mut counts: BTreeMap<Tokenization, u64> = BTreeMap::new();
    let mut n = 0u64;
    for s in samples {
        *counts.entry(s).or_default() += 1;
        n += 1;
    }
    counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect()
}

fn within_time(started: Instant, limit: Duration, detail: String) -> Outcome {
    let took = started.elapsed();
    ensure(took < limit, format!("{detail}; {:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs()))
}

fn lemma1_exactness() -> Outcome {
    let start = Instant::now();
    let model = lemma_bpe();
    let mut worst = 0.0f64;
    for p in [0.1, 0.3, 0.5] {
        let r = exact_bpe_dropout_dist("abbc", &model, p, CoinPolicy::Persistent).map_err(|e| e.to_string())?;
        if r.rows.len() != 5 {
            return Err(format!("p={p}: {} outcomes", r.rows.len()));
        }
        for (tok, q) in closed_form(p) {
            worst = worst.max((r.probability(&tok) - q).abs());
        }
    }
    if worst >= 1e-12 {
        return Err(format!("max error {worst:e}"));
    }
    within_time(start, Duration::from_secs(1), format!("max error {worst:.1e}"))
}

/// Independent MaxMatch-dropout distribution: one coin per (position,
/// length) slot, enumerated exhaustively.
fn maxmatch_coin_table(word: &str, vocab: &SubwordVocab, p: f64) -> BTreeMap<Tokenization, f64> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let slots: Vec<(usize, usize)> = (0..n).flat_map(|i| (1..=n - i).map(move |j| (i, j))).collect();
    let mut acc = BTreeMap::new();
    for mask in 0u32..(1 << slots.len()) {
        let keep: HashMap<(usize, usize), bool> =
            slots.iter().enumerate().map(|(b, &s)| (s, mask >> b & 1 == 1)).collect();
        let prob: f64 = keep.values().map(|&k| if k { 1.0 - p } else { p }).product();
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            let class = if i == 0 { PositionClass::Initial } else { PositionClass::Internal };
            let mut best = 1;
            for j in 1..=n - i {
                let s: String = chars[i..i + j].iter().collect();
                if vocab.contains(&s, class) && keep[&(i, j)] {
                    best = j;
                }
            }
            out.push(chars[i..i + best].iter().collect::<String>());
            i += best;
        }
        *acc.entry(Tokenization::from_surfaces(out)).or_insert(0.0) += prob;
    }
    acc
}

fn lemma2_non_uniformity() -> Outcome {
    let inst = LemmaInstance::default_maxmatch();
    let grid: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let report = lemma_grid_check(&inst, &grid).map_err(|e| e.to_string())?;
    if report.verdict != LemmaVerdict::NonUniform || report.points.len() != grid.len() {
        return Err(format!("verdict {:?} over {} points", report.verdict, report.points.len()));
    }
    let LemmaInstance::MaxMatch { vocab, word } = &inst else { unreachable!() };
    let mut worst = 0.0f64;
    for pt in &report.points {
        let exact = exact_maxmatch_dropout_dist(word, vocab, pt.p).map_err(|e| e.to_string())?;
        let oracle = maxmatch_coin_table(word, vocab, pt.p);
        // The canonical `abb` is the longest hit, so only its own coin matters.
        let closed = 1.0 - pt.p;
        worst = worst
            .max((pt.canonical_probability - closed).abs())
            .max((exact.probability(&exact.canonical) - closed).abs())
            .max((oracle[&exact.canonical] - closed).abs());
        for (tok, q) in &oracle {
            worst = worst.max((exact.probability(tok) - q).abs());
        }
    }
    let min_spread = report.points.iter().map(|p| p.spread()).fold(f64::INFINITY, f64::min);
    ensure(
        worst < 1e-12,
        format!("non-uniform at all 19 points (min spread {min_spread:.3}); canonical error {worst:.1e}"),
    )
}

fn sampler_uniformity() -> Outcome {
    let start = Instant::now();
    let l = six_path_lattice();
    let n = 60_000;
    let mut rng = rng_from_seed(2024);
    let emp = frequencies((0..n).map(|_| l.unbiased_sample(&mut rng).unwrap().tokenization));
    let paths = l.enumerate_paths(100).map_err(|e| e.to_string())?;
    let uniform: BTreeMap<Tokenization, f64> = paths.iter().map(|p| (p.clone(), 1.0 / 6.0)).collect();
    let d = tv(&emp, &uniform);
    if paths.len() != 6 || d >= 0.02 {
        return Err(format!("{} paths, TV {d:.4}", paths.len()));
    }
    // The exact sampler draws an index below 6 and unranks it; a bijection
    // from indices to paths makes every path exactly 1/6.
    let unranked: BTreeSet<Tokenization> = (0..6u32).filter_map(|i| l.path_at(&BigUint::from(i))).collect();
    if unranked.len() != 6 || unranked != paths.iter().cloned().collect() {
        return Err("path indices do not biject onto the paths".into());
    }
    within_time(start, Duration::from_secs(5), format!("TV {d:.4} at N={n}; exact sampler is a bijection"))
}

fn random_vocab<R: Rng>(rng: &mut R, alphabet: &[char], entries: usize, max_len: usize) -> SubwordVocab {
    let mut v = SubwordVocab::default();
    for _ in 0..entries {
        let len = rng.gen_range(1..=max_len);
        let s: String = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        match rng.gen_range(0..3) {
            0 => v.insert(&s, PositionClass::Initial),
            1 => v.insert(&s, PositionClass::Internal),
            _ => {
                v.insert_both(&s);
                true
            }
        };
    }
    v
}

fn random_word<R: Rng>(rng: &mut R, alphabet: &[char], max_len: usize) -> String {
    let len = rng.gen_range(1..=max_len);
    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

fn rejection_correctness() -> Outcome {
    let mut rng = rng_from_seed(4);
    let alphabet = ['a', 'b'];
    let (mut lattices, mut worst_tv, mut checked_paths) = (0, 0.0f64, 0usize);
    while lattices < 100 {
        let mut vocab = random_vocab(&mut rng, &alphabet, 8, 3);
        for c in ["a", "b"] {
            vocab.insert_both(c);
        }
        let word = random_word(&mut rng, &alphabet, 7);
        let l = TokenizationLattice::build(&word, &vocab).map_err(|e| e.to_string())?;
        let paths = l.enumerate_paths(16);
        let Ok(paths) = paths else { continue };
        lattices += 1;
        let p_min = l.p_min_denominator();
        for path in &paths {
            let nodes = l.path_nodes(path).ok_or("path not in lattice")?;
            let proposal = l.proposal_denominator(&nodes);
            // p_min = 1/p_min, proposal = 1/proposal.
            if proposal > p_min {
                return Err(format!("{word}: p_min 1/{p_min} exceeds proposal 1/{proposal}"));
            }
            checked_paths += 1;
        }
        let n = 20_000;
        let a = frequencies((0..n).map(|_| l.unbiased_sample(&mut rng).unwrap().tokenization));
        let b = frequencies((0..n).map(|_| l.exact_uniform_sample(&mut rng)));
        let d = tv(&a, &b);
        worst_tv = worst_tv.max(d);
        if d >= 0.03 {
            return Err(format!("{word}: {} paths, TV {d:.4}", paths.len()));
        }
    }
    Ok(format!("{checked_paths} paths bounded by p_min; max TV {worst_tv:.4} at N=20000"))
}

fn naive_count(chars: &[char], i: usize, vocab: &SubwordVocab) -> u64 {
    if i == chars.len() {
        return 1;
    }
    let class = if i == 0 { PositionClass::Initial } else { PositionClass::Internal };
    (i + 1..=chars.len())
        .filter(|&j| vocab.contains(&chars[i..j].iter().collect::<String>(), class))
        .map(|j| naive_count(chars, j, vocab))
        .sum()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = rng_from_seed(5);
    let alphabet = ['a', 'b', 'c'];
    let (mut mismatches, mut total_paths, mut empty) = (0, 0u64, 0);
    for _ in 0..200 {
        let entries = rng.gen_range(1..=15);
        let mut vocab = random_vocab(&mut rng, &alphabet, entries, 3);
        if rng.gen_bool(0.7) {
            for c in ["a", "b", "c"] {
                vocab.insert_both(c);
            }
        }
        // Keep every instance within the 15-entry bound.
        while vocab.len() > 15 {
            vocab = random_vocab(&mut rng, &alphabet, entries.min(5), 3);
        }
        let word = random_word(&mut rng, &alphabet, 10);
        let chars: Vec<char> = word.chars().collect();
        let naive = naive_count(&chars, 0, &vocab);
        match TokenizationLattice::build(&word, &vocab) {
            Ok(l) => {
                let listed = l.enumerate_paths(1 << 20).map_err(|e| e.to_string())?.len() as u64;
                if l.count_paths() != BigUint::from(naive) || listed != naive {
                    mismatches += 1;
                }
                total_paths += naive;
            }
            Err(_) => {
                empty += 1;
                if naive != 0 {
                    mismatches += 1;
                }
            }
        }
    }
    ensure(
        mismatches == 0,
        format!("200 instances, {mismatches} mismatches ({total_paths} paths, {empty} unsegmentable)"),
    )
}

fn degenerate_dropout() -> Outcome {
    let mut rng = rng_from_seed(6);
    let alphabet: Vec<char> = "abcdefgh".chars().collect();
    let words: Vec<String> = (0..1000).map(|_| random_word(&mut rng, &alphabet, 9)).collect();
    let counts: WordCounts = words.iter().map(String::as_str).collect();
    let model = train_bpe(&counts, 60).map_err(|e| e.to_string())?;
    let vocab = derive_marked_vocab(&model, "#");
    let render = |t: &Tokenization| t.to_marked_string("#");
    let (mut bpe_out, mut bpe_det, mut mm_out, mut mm_det) = (String::new(), String::new(), String::new(), String::new());
    let mut all_chars = true;
    for w in &words {
        let det = model.encode(w).map_err(|e| e.to_string())?;
        bpe_det += &render(&det);
        bpe_out += &render(&model.encode_dropout(w, 0.0, &mut rng).map_err(|e| e.to_string())?);
        mm_det += &render(&maxmatch_encode_deterministic(w, &vocab).map_err(|e| e.to_string())?);
        mm_out += &render(&maxmatch_encode(w, &vocab, 0.0, &mut rng).map_err(|e| e.to_string())?);
        let ones = model.encode_dropout(w, 1.0, &mut rng).map_err(|e| e.to_string())?;
        all_chars &= ones.len() == w.chars().count() && ones.word() == *w;
    }
    ensure(
        bpe_out == bpe_det && mm_out == mm_det && all_chars,
        format!(
            "1000 words: bpe p=0 identical {}, maxmatch p=0 identical {}, bpe p=1 characters {all_chars}",
            bpe_out == bpe_det,
            mm_out == mm_det
        ),
    )
}

fn empirical_convergence() -> Outcome {
    let model = lemma_bpe();
    let canonical = model.encode("abbc").map_err(|e| e.to_string())?;
    let n = 1_000_000;
    let r = empirical_distribution("abbc", canonical, n, 7, |rng| model.encode_dropout("abbc", 0.1, rng))
        .map_err(|e| e.to_string())?;
    let worst = closed_form(0.1)
        .iter()
        .map(|(tok, q)| (r.probability(tok) - q).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 0.003 && r.rows.len() == 5, format!("N={n}: max deviation {worst:.5}"))
}

fn diversity_separation() -> Outcome {
    let mut merges = MergeList::new();
    merges.push("a", "b");
    merges.push("b", "a");
    merges.push("ab", "ab");
    let model = Arc::new(BpeModel::new("ab".chars(), merges).map_err(|e| e.to_string())?);
    let word = "abababab";
    let tokenizer = |mode, rate| {
        StochasticTokenizer::new(
            StochasticTokenizerConfig::new(BaseTokenizer::Bpe(Arc::clone(&model))).with_mode(mode, rate),
        )
    };
    let uniform = tokenizer(SamplingMode::Uniform, 1.0).map_err(|e| e.to_string())?;
    let dropout = tokenizer(SamplingMode::Dropout, 0.1).map_err(|e| e.to_string())?;
    let paths = uniform.lattice(word).map_err(|e| e.to_string())?.count_paths();
    let t_paths: f64 = paths.to_string().parse().unwrap();
    if t_paths < 20.0 {
        return Err(format!("only {paths} paths"));
    }
    let grid = [1, 5, 10, 20, 50, 100];
    let curve = |tok: &StochasticTokenizer, seed| {
        unique_count_curve(&grid, 50, seed, |rng| Ok(tok.tokenize_word(word, rng)?.tokenization))
    };
    let u = curve(&uniform, 8).map_err(|e| e.to_string())?;
    let d = curve(&dropout, 8).map_err(|e| e.to_string())?;
    let (u100, d100) = (u.last().unwrap().mean_unique, d.last().unwrap().mean_unique);
    if u100 <= d100 {
        return Err(format!("uniform {u100} vs dropout {d100} at N=100"));
    }
    let worst = u
        .iter()
        .map(|pt| {
            let e = coupon_collector_expectation(t_paths, pt.samples);
            (pt.mean_unique - e).abs() / e
        })
        .fold(0.0, f64::max);
    ensure(
        worst <= 0.05,
        format!("T={paths}: N=100 unique {u100:.2} (uniform) > {d100:.2} (dropout); curve within {:.2}%", 100.0 * worst),
    )
}

fn efficiency_metric() -> Outcome {
    let eff = |counts: &[u64], v, a| renyi_efficiency(counts.iter().copied(), v, a).unwrap().efficiency;
    let full8 = eff(&[3; 8], 8, 1.0);
    let full32 = eff(&[7; 32], 32, 1.0);
    let full10 = eff(&[2; 10], 10, 1.0);
    let half = eff(&[5, 5], 4, 1.0);
    let skewed = [40, 10, 7, 3, 1, 1, 22];
    let gap = [0.999, 1.001]
        .iter()
        .map(|&a| (eff(&skewed, 64, a) - eff(&skewed, 64, 1.0)).abs())
        .fold(0.0, f64::max);
    ensure(
        full8 == 1.0 && full32 == 1.0 && (full10 - 1.0).abs() < 1e-12 && half == 0.5 && gap < 1e-3,
        format!("uniform {full8}, {full32}, {full10}; two-of-four {half}; continuity gap {gap:.1e}"),
    )
}

fn reproducibility() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let mut rng = rng_from_seed(10);
    let alphabet: Vec<char> = "abcdefghijklmnop".chars().collect();
    let corpus: String = (0..10_000)
        .map(|_| {
            let n = rng.gen_range(3..12);
            let words: Vec<String> = (0..n).map(|_| random_word(&mut rng, &alphabet, 10)).collect();
            words.join(" ") + "\n"
        })
        .collect();
    std::fs::write(path("corpus.txt"), &corpus).map_err(|e| e.to_string())?;
    let invoke = |args: &[&str]| -> Result<(), String> {
        let cli = Cli::try_parse_from(std::iter::once("latticetok").chain(args.iter().copied()))
            .map_err(|e| e.to_string())?;
        run(&cli, &mut Vec::new(), &mut Vec::new()).map_err(|e| e.to_string())
    };
    invoke(&["train", "--corpus", &path("corpus.txt"), "--merges", "300", "--output", &path("model")])?;
    let mut runs = 0;
    for (mode, rate) in [("dropout", "0.1"), ("uniform", "0.5")] {
        let mut outputs = Vec::new();
        for (i, workers) in ["1", "4", "1", "3"].iter().enumerate() {
            let out = path(&format!("{mode}-{i}.txt"));
            invoke(&[
                "tokenize", "--input", &path("corpus.txt"), "--output", &out, "--model", &path("model"),
                "--mode", mode, "--rate", rate, "--seed", "42", "--workers", workers,
            ])?;
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
            runs += 1;
        }
        if outputs.iter().any(|o| o != &outputs[0]) {
            return Err(format!("{mode}: outputs differ across runs or worker counts"));
        }
        if String::from_utf8_lossy(&outputs[0]).lines().count() != 10_000 {
            return Err(format!("{mode}: output is not line-aligned"));
        }
    }
    within_time(
        start,
        Duration::from_secs(30),
        format!("{runs} runs over 10000 lines, workers 1/3/4: byte-identical"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("dropout closed forms on abbc", lemma1_exactness),
        ("MaxMatch-dropout non-uniformity", lemma2_non_uniformity),
        ("uniform samplers on ababc", sampler_uniformity),
        ("rejection correctness on random lattices", rejection_correctness),
        ("path counting oracles", oracle_equivalence),
        ("degenerate dropout rates", degenerate_dropout),
        ("empirical vs exact convergence", empirical_convergence),
        ("diversity separation", diversity_separation),
        ("Renyi efficiency", efficiency_metric),
        ("corpus reproducibility", reproducibility),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (verdict, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {verdict} {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
