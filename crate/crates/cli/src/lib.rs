//! Command implementations behind the `latticetok` binary.
//!
//! Each `cmd_*` function writes its primary output to `out` (or to the file
//! named by its flags) and diagnostics to `err`, and returns a [`CliError`]
//! whose [`CliError::exit_code`] is 1 for domain failures and 2 for
//! inconsistent flags.

mod analyze;
mod args;
mod error;
mod tokenize;
mod train;
mod verify;

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use latticetok::regularizer::{BaseTokenizer, SamplingMode, StochasticTokenizer, StochasticTokenizerConfig};
use latticetok::{BpeModel, SubwordVocab};

pub use analyze::{cmd_analyze, cmd_efficiency, cmd_sample};
pub use args::*;
pub use error::{CliError, CliResult};
pub use tokenize::cmd_tokenize;
pub use train::cmd_train;
pub use verify::{cmd_verify, run_checks, CheckOutcome};

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, out, err),
        Command::Tokenize(a) => cmd_tokenize(a, out, err),
        Command::Sample(a) => cmd_sample(a, out, err),
        Command::Analyze(a) => cmd_analyze(a, out, err),
        Command::Efficiency(a) => cmd_efficiency(a, out, err),
        Command::Verify(a) => cmd_verify(a, out, err),
    }
}

impl ModelArgs {
    /// `None` when neither `--model` nor `--vocab` was given.
    pub fn load_optional(&self) -> CliResult<Option<BaseTokenizer>> {
        let scheme = match (self.scheme, &self.model, &self.vocab) {
            (_, Some(_), Some(_)) => {
                return Err(CliError::Usage("--model and --vocab are mutually exclusive".into()))
            }
            (None, None, None) => return Ok(None),
            (Some(_), None, None) => {
                return Err(CliError::Usage("--scheme needs --model or --vocab".into()))
            }
            (Some(Scheme::Bpe), None, Some(_)) => {
                return Err(CliError::Usage("the bpe scheme needs --model, not --vocab".into()))
            }
            (Some(s), _, _) => s,
            (None, Some(_), None) => Scheme::Bpe,
            (None, None, Some(_)) => Scheme::Maxmatch,
        };
        if self.marker.is_empty() || self.marker.chars().any(char::is_whitespace) {
            return Err(CliError::Usage(format!("invalid marker {:?}", self.marker)));
        }
        let base = match (&self.model, &self.vocab) {
            (Some(dir), _) => {
                let model = Arc::new(BpeModel::load(dir).map_err(|source| CliError::Load {
                    path: dir.clone(),
                    source,
                })?);
                match scheme {
                    Scheme::Bpe => BaseTokenizer::Bpe(model),
                    Scheme::Maxmatch => {
                        BaseTokenizer::MaxMatch(Arc::new(latticetok::derive_marked_vocab(&model, &self.marker)))
                    }
                }
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(path).map_err(|source| CliError::File {
                    path: path.clone(),
                    source,
                })?;
                let load_err = |source| CliError::Load {
                    path: path.clone(),
                    source,
                };
                let vocab = SubwordVocab::parse(&text, &self.marker).map_err(load_err)?;
                vocab.validate().map_err(load_err)?;
                BaseTokenizer::MaxMatch(Arc::new(vocab))
            }
            (None, None) => unreachable!(),
        };
        Ok(Some(base))
    }

    pub fn load(&self) -> CliResult<BaseTokenizer> {
        self.load_optional()?
            .ok_or_else(|| CliError::Usage("a tokenizer is required: pass --model or --vocab".into()))
    }
}

impl ModeArgs {
    /// Checks that the rate is present exactly when the mode samples.
    pub fn resolve(&self) -> CliResult<(SamplingMode, f64)> {
        let rate = match (self.mode, self.rate) {
            (Mode::Deterministic, Some(_)) => {
                return Err(CliError::Usage("--rate only applies to dropout and uniform modes".into()))
            }
            (Mode::Deterministic, None) => 0.0,
            (m, None) => {
                return Err(CliError::Usage(format!(
                    "--mode {} requires --rate",
                    if m == Mode::Dropout { "dropout" } else { "uniform" }
                )))
            }
            (_, Some(r)) => r,
        };
        if !(0.0..=1.0).contains(&rate) {
            return Err(CliError::Usage(format!("--rate must be within [0, 1], got {rate}")));
        }
        Ok((self.mode.into(), rate))
    }
}

impl SeedArgs {
    pub fn resolve(&self, err: &mut dyn Write) -> CliResult<u64> {
        if self.entropy_seed {
            let seed = rand::random::<u64>();
            writeln!(err, "seed: {seed:#x}")?;
            Ok(seed)
        } else {
            Ok(self.seed)
        }
    }
}

pub(crate) fn build_tokenizer(model: &ModelArgs, mode: &ModeArgs, seed: u64) -> CliResult<StochasticTokenizer> {
    Ok(StochasticTokenizer::new(build_config(model, mode, seed)?)?)
}

pub(crate) fn build_config(model: &ModelArgs, mode: &ModeArgs, seed: u64) -> CliResult<StochasticTokenizerConfig> {
    let base = model.load()?;
    let (sampling, rate) = mode.resolve()?;
    let mut config = StochasticTokenizerConfig::new(base)
        .with_mode(sampling, rate)
        .with_seed(seed);
    config.sampler = mode.sampler.into();
    config.coin_policy = mode.coin_policy.into();
    config.marker = model.marker.clone();
    Ok(config)
}

pub(crate) fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

pub(crate) fn open_input(path: &Path) -> CliResult<Box<dyn BufRead>> {
    if is_stdio(path) {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).map_err(|source| CliError::File {
        path: path.to_owned(),
        source,
    })?;
    Ok(Box::new(BufReader::new(f)))
}

/// Runs `write` against `out` for `-`, or against a buffered file otherwise.
pub(crate) fn with_output<T>(
    path: &Path,
    out: &mut dyn Write,
    write: impl FnOnce(&mut dyn Write) -> CliResult<T>,
) -> CliResult<T> {
    if is_stdio(path) {
        return write(out);
    }
    let file_err = |source| CliError::File {
        path: PathBuf::from(path),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(file_err)?);
    let value = write(&mut w)?;
    w.flush().map_err(file_err)?;
    Ok(value)
}
