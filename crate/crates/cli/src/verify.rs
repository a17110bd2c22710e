use std::collections::BTreeMap;
use std::io::Write;

use latticetok::analysis::{
    coupon_collector_expectation, empirical_distribution, lemma_grid_check, renyi_efficiency, unique_count_curve,
    LemmaInstance, LemmaVerdict,
};
use latticetok::bpe::CoinPolicy;
use latticetok::regularizer::BaseTokenizer;
use latticetok::seed::{derive_seed, rng_from_seed};
use latticetok::{
    exact_bpe_dropout_dist, exact_maxmatch_dropout_dist, maxmatch_encode_deterministic, BpeModel, SubwordVocab,
    Tokenization, TokenizationLattice,
};
use num_bigint::BigUint;

use crate::{CliError, CliResult, VerifyArgs};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(u64) -> Result<String, String>;

/// The word `ababc` over the vocabulary with six lattice paths.
const SIX_PATH_VOCAB: &str = "a\nb\nc\nab\n#a\n#b\n#c\n#ab\n#bc\n";

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let seed = args.seed.resolve(err)?;
    // Load before running anything so a bad model fails fast.
    let model = args.model.load_optional()?;
    let mut outcomes = run_checks(seed);
    if let Some(base) = model {
        outcomes.push(model_check(&base));
    }
    writeln!(out, "{:<28} {:<6} detail", "check", "result")?;
    for o in &outcomes {
        writeln!(out, "{:<28} {:<6} {}", o.name, if o.passed { "PASS" } else { "FAIL" }, o.detail)?;
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("failed checks: {}", failed.join(", "))))
    }
}

/// Runs every built-in check; the result depends only on `seed`.
pub fn run_checks(seed: u64) -> Vec<CheckOutcome> {
    let checks: [(&'static str, Check); 9] = [
        ("bpe-dropout-closed-form", bpe_closed_form),
        ("bpe-dropout-non-uniform", bpe_non_uniform),
        ("maxmatch-dropout-non-uniform", maxmatch_non_uniform),
        ("lattice-path-count", lattice_counts),
        ("exact-uniform-bijection", exact_uniform_bijection),
        ("rejection-uniformity", rejection_uniformity),
        ("dropout-sampling-convergence", dropout_convergence),
        ("uniform-unique-curve", unique_curve),
        ("renyi-efficiency", renyi),
    ];
    checks
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let (passed, detail) = match check(derive_seed(seed, &[i as u64])) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome { name, passed, detail }
        })
        .collect()
}

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lemma_bpe() -> BpeModel {
    match LemmaInstance::default_bpe() {
        LemmaInstance::Bpe { model, .. } => model,
        LemmaInstance::MaxMatch { .. } => unreachable!(),
    }
}

fn six_paths() -> TokenizationLattice {
    let vocab = SubwordVocab::parse(SIX_PATH_VOCAB, "#").expect("built-in vocabulary");
    TokenizationLattice::build("ababc", &vocab).expect("built-in lattice")
}

fn tokens(s: &[&str]) -> Tokenization {
    Tokenization::from_surfaces(s.iter().copied())
}

fn closed_form(p: f64) -> [(Tokenization, f64); 5] {
    let q = 1.0 - p;
    [
        (tokens(&["a", "b", "b", "c"]), p * p * p),
        (tokens(&["a", "b", "bc"]), p * p * q),
        (tokens(&["a", "bb", "c"]), p * q),
        (tokens(&["ab", "b", "c"]), q * p),
        (tokens(&["ab", "bc"]), q * q),
    ]
}

fn bpe_closed_form(_: u64) -> Result<String, String> {
    let model = lemma_bpe();
    let mut worst = 0.0f64;
    for p in [0.1, 0.3, 0.5] {
        let r = exact_bpe_dropout_dist("abbc", &model, p, CoinPolicy::Persistent).map_err(|e| e.to_string())?;
        if r.rows.len() != 5 {
            return Err(format!("{} outcomes at p={p}, expected 5", r.rows.len()));
        }
        for (t, expected) in closed_form(p) {
            worst = worst.max((r.probability(&t) - expected).abs());
        }
    }
    ensure(worst < 1e-12, format!("abbc, p in {{0.1, 0.3, 0.5}}: max error {worst:.1e}"))
}

fn grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

fn bpe_non_uniform(_: u64) -> Result<String, String> {
    let r = lemma_grid_check(&LemmaInstance::default_bpe(), &grid()).map_err(|e| e.to_string())?;
    let min_spread = r.points.iter().map(|p| p.spread()).fold(f64::INFINITY, f64::min);
    ensure(
        r.verdict == LemmaVerdict::NonUniform,
        format!("abbc, {} paths, min spread {min_spread:.3e} over p = 0.05..0.95", r.paths),
    )
}

fn maxmatch_non_uniform(_: u64) -> Result<String, String> {
    let inst = LemmaInstance::default_maxmatch();
    let r = lemma_grid_check(&inst, &grid()).map_err(|e| e.to_string())?;
    let LemmaInstance::MaxMatch { vocab, word } = &inst else { unreachable!() };
    let mut worst = 0.0f64;
    for pt in &r.points {
        let exact = exact_maxmatch_dropout_dist(word, vocab, pt.p).map_err(|e| e.to_string())?;
        let canonical = exact.probability(&exact.canonical);
        worst = worst
            .max((pt.canonical_probability - (1.0 - pt.p)).abs())
            .max((canonical - pt.canonical_probability).abs());
    }
    ensure(
        r.verdict == LemmaVerdict::NonUniform && worst < 1e-12,
        format!("{word}, {} paths, canonical = 1-p within {worst:.1e}", r.paths),
    )
}

fn lattice_counts(_: u64) -> Result<String, String> {
    let l = six_paths();
    let listed = l.enumerate_paths(100).map_err(|e| e.to_string())?.len();
    let p_min = l.p_min_denominator();
    ensure(
        l.count_paths() == BigUint::from(6u32) && listed == 6 && p_min == BigUint::from(8u32),
        format!("ababc: count {}, enumerated {listed}, p_min 1/{p_min}", l.count_paths()),
    )
}

fn exact_uniform_bijection(_: u64) -> Result<String, String> {
    // Every path index maps to a distinct path, so each has probability 1/T exactly.
    let l = six_paths();
    let listed = l.enumerate_paths(100).map_err(|e| e.to_string())?;
    let unranked: Vec<Tokenization> = (0..listed.len())
        .filter_map(|i| l.path_at(&BigUint::from(i)))
        .collect();
    let mut sorted = unranked.clone();
    sorted.sort();
    sorted.dedup();
    ensure(
        unranked == listed && sorted.len() == listed.len() && l.path_at(&BigUint::from(listed.len())).is_none(),
        format!("ababc: {} indices onto {} distinct paths", unranked.len(), sorted.len()),
    )
}

fn rejection_uniformity(seed: u64) -> Result<String, String> {
    let l = six_paths();
    let n = 60_000u32;
    let mut rng = rng_from_seed(seed);
    let mut counts: BTreeMap<Tokenization, u32> = BTreeMap::new();
    let mut attempts = 0u64;
    for _ in 0..n {
        let s = l.unbiased_sample(&mut rng).map_err(|e| e.to_string())?;
        attempts += s.attempts;
        *counts.entry(s.tokenization).or_default() += 1;
    }
    let tv = total_variation_from_uniform(&counts, 6, n);
    ensure(
        tv < 0.02,
        format!("ababc, N={n}: TV {tv:.4}, mean attempts {:.3}", attempts as f64 / n as f64),
    )
}

fn total_variation_from_uniform(counts: &BTreeMap<Tokenization, u32>, t: usize, n: u32) -> f64 {
    let u = 1.0 / t as f64;
    let seen: f64 = counts.values().map(|&c| (c as f64 / n as f64 - u).abs()).sum();
    (seen + (t - counts.len()) as f64 * u) / 2.0
}

fn dropout_convergence(seed: u64) -> Result<String, String> {
    let model = lemma_bpe();
    let n = 200_000;
    let canonical = model.encode("abbc").map_err(|e| e.to_string())?;
    let r = empirical_distribution("abbc", canonical, n, seed, |rng| model.encode_dropout("abbc", 0.1, rng))
        .map_err(|e| e.to_string())?;
    let worst = closed_form(0.1)
        .iter()
        .map(|(t, q)| (r.probability(t) - q).abs())
        .fold(0.0, f64::max);
    ensure(worst < 0.003, format!("abbc, p=0.1, N={n}: max deviation {worst:.4}"))
}

fn unique_curve(seed: u64) -> Result<String, String> {
    let l = six_paths();
    let curve = unique_count_curve(&[6], 200, seed, |rng| Ok(l.exact_uniform_sample(rng))).map_err(|e| e.to_string())?;
    let expected = coupon_collector_expectation(6.0, 6);
    let got = curve[0].mean_unique;
    ensure(
        (got - expected).abs() < 0.15,
        format!("T=6, N=6: mean unique {got:.3} vs {expected:.3}"),
    )
}

fn renyi(_: u64) -> Result<String, String> {
    let e = |counts: &[u64], v, a| renyi_efficiency(counts.iter().copied(), v, a).map(|r| r.efficiency);
    let full = e(&[5; 8], 8, 1.0).map_err(|e| e.to_string())?;
    let half = e(&[1, 1], 4, 1.0).map_err(|e| e.to_string())?;
    let skewed = [9, 3, 1, 1, 6];
    let at_one = e(&skewed, 16, 1.0).map_err(|e| e.to_string())?;
    let gap = [0.999, 1.001]
        .iter()
        .map(|&a| (e(&skewed, 16, a).unwrap_or(f64::NAN) - at_one).abs())
        .fold(0.0, f64::max);
    ensure(
        full == 1.0 && half == 0.5 && gap < 1e-3,
        format!("uniform {full}, two-of-four {half}, gap at alpha=1 {gap:.1e}"),
    )
}

/// A loaded tokenizer survives a save/parse round trip and tokenizes its
/// own entries losslessly.
fn model_check(base: &BaseTokenizer) -> CheckOutcome {
    let result = match base {
        BaseTokenizer::Bpe(model) => (|| {
            let reparsed = BpeModel::from_files_text(&model.vocab_file_string(), &model.merges().to_file_string())
                .map_err(|e| e.to_string())?;
            if &reparsed != model.as_ref() {
                return Err("model changes under a file round trip".to_owned());
            }
            for entry in model.vocab() {
                let t = model.encode(entry).map_err(|e| e.to_string())?;
                if t.word() != entry {
                    return Err(format!("{entry:?} is not reproduced by its tokenization"));
                }
            }
            Ok(format!(
                "{} entries, {} merges round-trip",
                model.vocab_size(),
                model.merges().len()
            ))
        })(),
        BaseTokenizer::MaxMatch(vocab) => (|| {
            let reparsed =
                SubwordVocab::parse(&vocab.to_file_string(), vocab.marker()).map_err(|e| e.to_string())?;
            if &reparsed != vocab.as_ref() {
                return Err("vocabulary changes under a file round trip".to_owned());
            }
            for entry in vocab.iter().filter(|s| s.class == latticetok::PositionClass::Initial) {
                let t = maxmatch_encode_deterministic(&entry.surface, vocab).map_err(|e| e.to_string())?;
                if t.word() != entry.surface {
                    return Err(format!("{:?} is not reproduced by its tokenization", entry.surface));
                }
            }
            Ok(format!("{} entries round-trip", vocab.len()))
        })(),
    };
    let (passed, detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckOutcome {
        name: "model-round-trip",
        passed,
        detail,
    }
}
