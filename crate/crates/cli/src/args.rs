use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latticetok::bpe::CoinPolicy;
use latticetok::regularizer::{SamplingMode, Scope, Side, UniformSampler};
use latticetok::seed::DEFAULT_SEED;

/// Subword tokenizers with deterministic, dropout and uniform-lattice sampling.
///
/// Every flag can also be set through an environment variable named
/// `LATTICETOK_<FLAG>` (upper case, dashes as underscores), e.g.
/// `LATTICETOK_SEED=7`.
#[derive(Debug, Parser)]
#[command(name = "latticetok", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a BPE model on a whitespace-tokenized corpus.
    Train(TrainArgs),
    /// Tokenize a corpus line by line.
    Tokenize(TokenizeArgs),
    /// Draw tokenizations of one word from its lattice.
    Sample(SampleArgs),
    /// Report tokenization distributions of words.
    Analyze(AnalyzeArgs),
    /// Rényi efficiency of the unigram distribution of a tokenized corpus.
    Efficiency(EfficiencyArgs),
    /// Run the built-in exactness and uniformity checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Bpe,
    Maxmatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Deterministic,
    Dropout,
    Uniform,
}

impl From<Mode> for SamplingMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Deterministic => SamplingMode::Deterministic,
            Mode::Dropout => SamplingMode::Dropout,
            Mode::Uniform => SamplingMode::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Exact,
    Rejection,
}

impl From<SamplerArg> for UniformSampler {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Exact => UniformSampler::Exact,
            SamplerArg::Rejection => UniformSampler::Rejection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathSampler {
    Exact,
    Rejection,
    /// Uniform out-edge choice at every node (not uniform over paths).
    Biased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoinPolicyArg {
    Persistent,
    Resample,
}

impl From<CoinPolicyArg> for CoinPolicy {
    fn from(c: CoinPolicyArg) -> Self {
        match c {
            CoinPolicyArg::Persistent => CoinPolicy::Persistent,
            CoinPolicyArg::Resample => CoinPolicy::Resample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Source,
    Target,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Source => Side::Source,
            SideArg::Target => Side::Target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Source,
    Target,
    Both,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Source => Scope::Source,
            ScopeArg::Target => Scope::Target,
            ScopeArg::Both => Scope::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Tsv,
}

impl Format {
    pub fn delimiter(self) -> u8 {
        match self {
            Format::Csv => b',',
            Format::Tsv => b'\t',
        }
    }
}

/// Where the tokenizer comes from. BPE needs `--model`; MaxMatch takes a
/// marked vocabulary file via `--vocab`, or derives one from a BPE `--model`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Defaults to `bpe` with `--model` and `maxmatch` with `--vocab`.
    #[arg(long, value_enum, env = "LATTICETOK_SCHEME")]
    pub scheme: Option<Scheme>,
    /// BPE model directory containing vocab.txt and merges.txt.
    #[arg(long, env = "LATTICETOK_MODEL")]
    pub model: Option<PathBuf>,
    /// Marked subword vocabulary file, one entry per line.
    #[arg(long, env = "LATTICETOK_VOCAB")]
    pub vocab: Option<PathBuf>,
    /// Prefix marking word-internal subwords.
    #[arg(long, default_value = "#", env = "LATTICETOK_MARKER")]
    pub marker: String,
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    /// Master seed; decimal or 0x-prefixed hex.
    #[arg(long, value_parser = parse_seed, default_value_t = DEFAULT_SEED, env = "LATTICETOK_SEED")]
    pub seed: u64,
    /// Draw the master seed from system entropy instead (printed to stderr).
    #[arg(long, conflicts_with = "seed", env = "LATTICETOK_ENTROPY_SEED")]
    pub entropy_seed: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ModeArgs {
    #[arg(long, value_enum, default_value = "deterministic", env = "LATTICETOK_MODE")]
    pub mode: Mode,
    /// Dropout probability, or the share of words sampled in uniform mode.
    /// Required by the stochastic modes and rejected by deterministic mode.
    #[arg(long, env = "LATTICETOK_RATE")]
    pub rate: Option<f64>,
    /// Path sampler for uniform mode.
    #[arg(long, value_enum, default_value = "exact", env = "LATTICETOK_SAMPLER")]
    pub sampler: SamplerArg,
    /// How BPE-dropout coins behave across merge rounds.
    #[arg(long, value_enum, default_value = "persistent", env = "LATTICETOK_COIN_POLICY")]
    pub coin_policy: CoinPolicyArg,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Corpus file, or `-` for standard input.
    #[arg(long, env = "LATTICETOK_CORPUS")]
    pub corpus: PathBuf,
    /// Number of merges to learn.
    #[arg(long, env = "LATTICETOK_MERGES")]
    pub merges: usize,
    /// Output model directory.
    #[arg(long, env = "LATTICETOK_OUTPUT")]
    pub output: PathBuf,
    /// Suffix appended to every word before training.
    #[arg(long, env = "LATTICETOK_END_OF_WORD")]
    pub end_of_word: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TokenizeArgs {
    /// Input text, or `-` for standard input.
    #[arg(long, default_value = "-", env = "LATTICETOK_INPUT")]
    pub input: PathBuf,
    /// Output file, or `-` for standard output.
    #[arg(long, default_value = "-", env = "LATTICETOK_OUTPUT")]
    pub output: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Worker threads; the output does not depend on this.
    #[arg(long, default_value_t = 1, env = "LATTICETOK_WORKERS")]
    pub workers: usize,
    /// Which side of a parallel corpus this file is.
    #[arg(long, value_enum, default_value = "source", env = "LATTICETOK_SIDE")]
    pub side: SideArg,
    /// Sides that receive stochastic tokenization; others are deterministic.
    #[arg(long, value_enum, default_value = "both", env = "LATTICETOK_SCOPE")]
    pub scope: ScopeArg,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long, env = "LATTICETOK_WORD")]
    pub word: String,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "exact", env = "LATTICETOK_SAMPLER")]
    pub sampler: PathSampler,
    /// Number of samples.
    #[arg(short = 'n', long, default_value_t = 10, env = "LATTICETOK_SAMPLES")]
    pub samples: u64,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Print the lattice edges before the samples.
    #[arg(long, env = "LATTICETOK_DUMP")]
    pub dump: bool,
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("words").required(true).args(["word", "wordlist"])))]
pub struct AnalyzeArgs {
    #[arg(long, env = "LATTICETOK_WORD")]
    pub word: Option<String>,
    /// File with one word per line.
    #[arg(long, env = "LATTICETOK_WORDLIST")]
    pub wordlist: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub mode: ModeArgs,
    /// Compute exact probabilities instead of sampling.
    #[arg(long, env = "LATTICETOK_EXACT")]
    pub exact: bool,
    /// Samples per word for empirical reports.
    #[arg(short = 'n', long, default_value_t = 10_000, env = "LATTICETOK_SAMPLES")]
    pub samples: u64,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Distribution report, or `-` for standard output.
    #[arg(long, default_value = "-", env = "LATTICETOK_REPORT")]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "csv", env = "LATTICETOK_FORMAT")]
    pub format: Format,
    /// Also write unique-tokenization curves here.
    #[arg(long, env = "LATTICETOK_CURVE")]
    pub curve: Option<PathBuf>,
    /// Sample sizes for the curve, ascending.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 5, 10, 20, 50, 100, 200, 500, 1000], env = "LATTICETOK_GRID")]
    pub grid: Vec<u64>,
    /// Repeats per curve point.
    #[arg(long, default_value_t = 50, env = "LATTICETOK_REPEATS")]
    pub repeats: u64,
    /// Also write per-word Shannon efficiency (canonical excluded) here.
    #[arg(long, env = "LATTICETOK_EFFICIENCY")]
    pub efficiency: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EfficiencyArgs {
    /// Tokenized text, or `-` for standard input.
    #[arg(long, default_value = "-", env = "LATTICETOK_INPUT")]
    pub input: PathBuf,
    /// Rényi orders; may be repeated or comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0f64], env = "LATTICETOK_ALPHA")]
    pub alpha: Vec<f64>,
    /// Vocabulary size; taken from the model when omitted.
    #[arg(long, env = "LATTICETOK_VOCAB_SIZE")]
    pub vocab_size: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Additionally load and check a model or vocabulary.
    #[command(flatten)]
    pub model: ModelArgs,
}

pub fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim().replace('_', "");
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn seeds_accept_hex() {
        assert_eq!(parse_seed("0x5EED_2024"), Ok(DEFAULT_SEED));
        assert_eq!(parse_seed("17"), Ok(17));
        assert!(parse_seed("seventeen").is_err());
    }
}
