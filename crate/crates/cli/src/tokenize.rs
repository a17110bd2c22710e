use std::io::Write;

use latticetok::regularizer::{CorpusSummary, StochasticTokenizer};

use crate::{build_config, open_input, with_output, CliError, CliResult, TokenizeArgs};

pub fn cmd_tokenize(args: &TokenizeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    if args.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let seed = args.seed.resolve(err)?;
    let mut config = build_config(&args.model, &args.mode, seed)?;
    config.scope = args.scope.into();
    let tok = StochasticTokenizer::new(config)?;
    let input = open_input(&args.input)?;
    let summary = with_output(&args.output, out, |w| {
        Ok(tok.tokenize_corpus(input, w, args.side.into(), args.workers)?)
    })?;
    write_summary(&summary, err)?;
    if summary.errors.is_empty() {
        return Ok(());
    }
    for e in &summary.errors {
        writeln!(err, "line {}: {}", e.line, e.message)?;
    }
    let mut lines: Vec<usize> = summary.errors.iter().map(|e| e.line).collect();
    lines.dedup();
    Err(CliError::Failed(format!(
        "{} word(s) on {} line(s) could not be tokenized",
        summary.errors.len(),
        lines.len()
    )))
}

fn write_summary(s: &CorpusSummary, err: &mut dyn Write) -> CliResult<()> {
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    writeln!(err, "lines: {}", s.lines)?;
    writeln!(err, "words: {}", s.words)?;
    writeln!(err, "tokens: {} ({:.3} per word)", s.tokens, ratio(s.tokens, s.words))?;
    writeln!(err, "token types: {}", s.types())?;
    writeln!(err, "sampled words: {}", s.sampled_words)?;
    writeln!(
        err,
        "non-canonical words: {} ({:.2}%)",
        s.non_canonical_words,
        100.0 * ratio(s.non_canonical_words, s.words)
    )?;
    Ok(())
}
