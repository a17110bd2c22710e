use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use latticetok::analysis::{
    coupon_collector_expectation, empirical_distribution, pad_unobserved, renyi_efficiency,
    shannon_efficiency_excluding_canonical, unique_count_curve, write_reports, CurvePoint, DEFAULT_REPORT_LIMIT,
};
use latticetok::regularizer::{BaseTokenizer, SamplingMode, StochasticTokenizer};
use latticetok::seed::{derive_seed, rng_from_seed};
use latticetok::{
    exact_bpe_dropout_dist, exact_maxmatch_dropout_dist, DistributionReport, ReportKind, Tokenization,
    TokenizationLattice,
};
use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::{
    build_tokenizer, open_input, with_output, AnalyzeArgs, CliError, CliResult, EfficiencyArgs, Mode, ModeArgs,
    PathSampler, SampleArgs,
};

/// Stream offsets for the per-word seeds of reports and curves.
const REPORT_STREAM: u64 = 0;
const CURVE_STREAM: u64 = 1;

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    if args.samples == 0 && !args.exact {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    if args.curve.is_some() && (args.grid.is_empty() || args.grid.windows(2).any(|w| w[0] > w[1])) {
        return Err(CliError::Usage("--grid must be a non-empty ascending list".into()));
    }
    let seed = args.seed.resolve(err)?;
    let tok = build_tokenizer(&args.model, &args.mode, seed)?;
    let words = read_words(args)?;

    let mut reports = Vec::new();
    let mut curves: Vec<(String, f64, Vec<CurvePoint>)> = Vec::new();
    let mut efficiencies: Vec<(String, BigUint, Option<f64>)> = Vec::new();
    let mut failures = Vec::new();
    for (i, word) in words.iter().enumerate() {
        let result = (|| -> CliResult<()> {
            let report = if args.exact {
                exact_report(&tok, word)?
            } else {
                empirical_report(&tok, word, args.samples, derive_seed(seed, &[REPORT_STREAM, i as u64]))?
            };
            if args.efficiency.is_some() {
                let paths = tok.lattice(word)?.count_paths();
                let e = if paths >= BigUint::from(2u32) {
                    Some(shannon_efficiency_excluding_canonical(&report, &paths)?)
                } else {
                    None
                };
                efficiencies.push((word.clone(), paths, e));
            }
            if args.curve.is_some() {
                let paths = tok.lattice(word)?.count_paths().to_f64().unwrap_or(f64::INFINITY);
                let curve = unique_count_curve(
                    &args.grid,
                    args.repeats,
                    derive_seed(seed, &[CURVE_STREAM, i as u64]),
                    |rng| Ok(tok.tokenize_word(word, rng)?.tokenization),
                )?;
                curves.push((word.clone(), paths, curve));
            }
            reports.push(report);
            Ok(())
        })();
        if let Err(e) = result {
            failures.push((word.clone(), e));
        }
    }

    let marker = tok.marker().to_owned();
    with_output(&args.report, out, |w| Ok(write_reports(w, &reports, args.format.delimiter(), &marker)?))?;
    if let Some(path) = &args.curve {
        with_output(path, out, |w| write_curves(w, &curves, args.format.delimiter()))?;
    }
    if let Some(path) = &args.efficiency {
        with_output(path, out, |w| write_efficiencies(w, &efficiencies, args.format.delimiter()))?;
    }
    if failures.is_empty() {
        return Ok(());
    }
    for (word, e) in &failures {
        writeln!(err, "{word}: {e}")?;
    }
    Err(CliError::Failed(format!("{} word(s) could not be analyzed", failures.len())))
}

fn read_words(args: &AnalyzeArgs) -> CliResult<Vec<String>> {
    if let Some(w) = &args.word {
        return Ok(vec![w.clone()]);
    }
    let path = args.wordlist.as_ref().expect("clap requires --word or --wordlist");
    let mut words = Vec::new();
    for line in open_input(path)?.lines() {
        let line = line?;
        let w = line.trim();
        if !w.is_empty() {
            words.push(w.to_owned());
        }
    }
    Ok(words)
}

/// Exact distribution of the configured mode for one word.
fn exact_report(tok: &StochasticTokenizer, word: &str) -> CliResult<DistributionReport> {
    let cfg = tok.config();
    let canonical = tok.canonical(word)?;
    let rate = cfg.rate;
    let report = match cfg.mode {
        SamplingMode::Deterministic => {
            DistributionReport::new(word, [(canonical.clone(), 1.0)], ReportKind::Exact, canonical)
        }
        SamplingMode::Dropout => match &cfg.base {
            BaseTokenizer::Bpe(model) => exact_bpe_dropout_dist(word, model, rate, cfg.coin_policy)?,
            BaseTokenizer::MaxMatch(vocab) => exact_maxmatch_dropout_dist(word, vocab, rate)?,
        },
        SamplingMode::Uniform => {
            // Canonical with probability 1 - rate, otherwise a uniform path.
            let lattice = tok.lattice(word)?;
            let paths = lattice.enumerate_paths(DEFAULT_REPORT_LIMIT)?;
            let each = rate / paths.len() as f64;
            let mut rows: BTreeMap<Tokenization, f64> = paths.into_iter().map(|p| (p, each)).collect();
            *rows.entry(canonical.clone()).or_insert(0.0) += 1.0 - rate;
            DistributionReport::new(word, rows, ReportKind::Exact, canonical)
        }
    };
    Ok(report)
}

fn empirical_report(tok: &StochasticTokenizer, word: &str, n: u64, seed: u64) -> CliResult<DistributionReport> {
    let canonical = tok.canonical(word)?;
    let mut report = empirical_distribution(word, canonical, n, seed, |rng| {
        Ok(tok.tokenize_word(word, rng)?.tokenization)
    })?;
    if tok.config().mode != SamplingMode::Deterministic {
        pad_unobserved(&mut report, &*tok.lattice(word)?, DEFAULT_REPORT_LIMIT);
    }
    Ok(report)
}

fn write_curves(w: &mut dyn Write, curves: &[(String, f64, Vec<CurvePoint>)], delimiter: u8) -> CliResult<()> {
    let mut csv = csv::WriterBuilder::new().delimiter(delimiter).from_writer(w);
    csv.write_record(["word", "samples", "mean_unique", "uniform_expectation"])?;
    for (word, paths, points) in curves {
        for p in points {
            csv.write_record([
                word.clone(),
                p.samples.to_string(),
                p.mean_unique.to_string(),
                coupon_collector_expectation(*paths, p.samples).to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn write_efficiencies(w: &mut dyn Write, rows: &[(String, BigUint, Option<f64>)], delimiter: u8) -> CliResult<()> {
    let mut csv = csv::WriterBuilder::new().delimiter(delimiter).from_writer(w);
    csv.write_record(["word", "paths", "shannon_efficiency"])?;
    for (word, paths, e) in rows {
        csv.write_record([word.clone(), paths.to_string(), e.map(|e| e.to_string()).unwrap_or_default()])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn cmd_sample(args: &SampleArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let seed = args.seed.resolve(err)?;
    let deterministic = ModeArgs {
        mode: Mode::Deterministic,
        rate: None,
        sampler: crate::SamplerArg::Exact,
        coin_policy: crate::CoinPolicyArg::Persistent,
    };
    let tok = build_tokenizer(&args.model, &deterministic, seed)?;
    let lattice = TokenizationLattice::build(&args.word, tok.lattice_vocab())?;
    if args.dump {
        write!(out, "{}", lattice.dump())?;
    }
    let marker = tok.marker().to_owned();
    let mut rng = rng_from_seed(seed);
    for _ in 0..args.samples {
        let t = match args.sampler {
            PathSampler::Exact => lattice.exact_uniform_sample(&mut rng),
            PathSampler::Rejection => lattice.unbiased_sample(&mut rng)?.tokenization,
            PathSampler::Biased => lattice.biased_sample(&mut rng).tokenization,
        };
        writeln!(out, "{}", t.to_marked_string(&marker))?;
    }
    Ok(())
}

pub fn cmd_efficiency(args: &EfficiencyArgs, out: &mut dyn Write, _err: &mut dyn Write) -> CliResult<()> {
    let vocab_size = match (args.vocab_size, args.model.load_optional()?) {
        (Some(n), _) => n,
        (None, Some(BaseTokenizer::Bpe(model))) => latticetok::derive_marked_vocab(&model, &args.model.marker).len(),
        (None, Some(BaseTokenizer::MaxMatch(vocab))) => vocab.len(),
        (None, None) => {
            return Err(CliError::Usage("pass --vocab-size, --model or --vocab".into()));
        }
    };
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for line in open_input(&args.input)?.lines() {
        for t in line?.split_whitespace() {
            *counts.entry(t.to_owned()).or_insert(0) += 1;
        }
    }
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["alpha", "vocab_size", "entropy", "efficiency"])?;
    for &alpha in &args.alpha {
        let r = renyi_efficiency(counts.values().copied(), vocab_size, alpha)?;
        csv.write_record([
            r.alpha.to_string(),
            r.vocab_size.to_string(),
            r.entropy.to_string(),
            r.efficiency.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
