use std::io::Write;

use latticetok::corpus::{ingest_with, IngestOptions};
use latticetok::train_bpe;

use crate::{open_input, CliError, CliResult, TrainArgs};

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write, _err: &mut dyn Write) -> CliResult<()> {
    let opts = IngestOptions {
        end_of_word: args.end_of_word.clone(),
    };
    let counts = ingest_with(open_input(&args.corpus)?, &opts).map_err(|source| CliError::Load {
        path: args.corpus.clone(),
        source,
    })?;
    let model = train_bpe(&counts, args.merges)?;
    model.save(&args.output).map_err(|source| CliError::Load {
        path: args.output.clone(),
        source,
    })?;
    writeln!(out, "vocab size: {}", model.vocab_size())?;
    writeln!(out, "merges: {}", model.merges().len())?;
    if model.merges().len() < args.merges {
        writeln!(
            out,
            "stopped early: no adjacent pair left after {} merges",
            model.merges().len()
        )?;
    }
    Ok(())
}
