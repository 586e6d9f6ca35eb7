//! `talkprofiler` command-line tool.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use talkprofiler::classifier::FeatureSet;
use talkprofiler::cohorts::UnitKind;
use talkprofiler::corpus::Scheme;
use talkprofiler::experiment::DEFAULT_MIN_TOKENS;
use talkprofiler::synth::Signal;

#[derive(Parser)]
#[command(name = "talkprofiler", version, about = "Corpus analytics and speaker-category classification for conversation transcripts")]
#[command(after_help = "Set TALKPROFILER_THREADS to cap the number of worker threads.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a corpus directory, then print a JSON summary.
    Ingest {
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-category speakers, words, turns, average turn length and TTR (CSV).
    Stats {
        corpus: PathBuf,
        #[arg(long, default_value = "gender")]
        by: Scheme,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Characteristic n-grams by Scaled F-score. Prints the top terms of
    /// each category; `--out` receives the full plot data.
    Terms(TermsArgs),
    /// Relative frequencies and ranks of the nine non-lexical features (CSV).
    Nonlex {
        corpus: PathBuf,
        #[arg(long, default_value = "gender")]
        by: Scheme,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Downsample the larger category; writes the kept unit ids.
    Balance {
        #[command(flatten)]
        units: UnitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write train/test and fold id manifests for the balanced units.
    Split {
        #[command(flatten)]
        units: UnitArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write it as JSON.
    Train {
        #[command(flatten)]
        units: UnitArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Train only on the units listed in this id manifest.
        #[arg(long)]
        ids: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score units with a trained model (CSV).
    Predict {
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "speaker")]
        unit: UnitKind,
        #[arg(long)]
        ids: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a trained model (`--model`), replay a config or report
    /// (`--config`), or run a full experiment from flags. Writes a JSON report.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct UnitArgs {
    corpus: PathBuf,
    #[arg(long, default_value = "gender")]
    by: Scheme,
    #[arg(long, default_value = "speaker")]
    unit: UnitKind,
    /// Minimum word tokens for a speaker unit.
    #[arg(long, default_value_t = DEFAULT_MIN_TOKENS)]
    min_tokens: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop turns made only of pauses and overlap marks.
    #[arg(long)]
    drop_empty_turns: bool,
    /// Keep every unit instead of downsampling the larger category.
    #[arg(long)]
    no_balance: bool,
    /// Allow turns of one speaker on both sides of a split.
    #[arg(long)]
    no_speaker_guard: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// k-fold cross-validation.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    folds: Option<u64>,
    /// Holdout test fraction in (0, 1). With `--folds`, CV runs inside the
    /// training part.
    #[arg(long, value_parser = parse_fraction)]
    test_fraction: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "lex+nonlex")]
    features: FeatureSet,
    #[arg(long, default_value_t = 5000)]
    vocab_size: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_epochs: usize,
    /// Remove these stopwords (one per line) from lexical features.
    #[arg(long)]
    stoplist: Option<PathBuf>,
}

#[derive(Args)]
struct TermsArgs {
    corpus: PathBuf,
    #[arg(long, default_value = "gender")]
    by: Scheme,
    #[arg(long, default_value_t = 20)]
    top: usize,
    /// Stopword file, one word per line. Defaults to the bundled English list.
    #[arg(long, conflicts_with = "no_stoplist")]
    stoplist: Option<PathBuf>,
    #[arg(long)]
    no_stoplist: bool,
    /// Drop terms seen fewer times over both categories.
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    /// Count at most this many speakers per category in each conversation.
    #[arg(long)]
    per_conversation: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Plot data CSV (every scored term).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    corpus: Option<PathBuf>,
    #[arg(long, conflicts_with = "config")]
    model: Option<PathBuf>,
    /// Experiment config, or a previous report whose config is replayed.
    #[arg(long)]
    config: Option<PathBuf>,
    /// With `--model`: evaluate only these unit ids.
    #[arg(long, requires = "model")]
    ids: Option<PathBuf>,
    #[arg(long, default_value = "gender")]
    by: Scheme,
    #[arg(long, default_value = "speaker")]
    unit: UnitKind,
    #[arg(long, default_value_t = DEFAULT_MIN_TOKENS)]
    min_tokens: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    drop_empty_turns: bool,
    #[arg(long)]
    no_balance: bool,
    #[arg(long)]
    no_speaker_guard: bool,
    #[command(flatten)]
    eval: EvalArgs,
    #[command(flatten)]
    model_args: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Full spec as JSON; overrides the preset flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "lexical")]
    signal: Signal,
    #[arg(long, default_value = "gender")]
    by: Scheme,
    /// Speakers per category.
    #[arg(long, default_value_t = 200)]
    speakers: usize,
    /// Turns per speaker.
    #[arg(long, default_value_t = 50)]
    turns: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the resolved spec as JSON instead of generating.
    #[arg(long)]
    emit_spec: bool,
    /// Output directory.
    #[arg(long, required_unless_present = "emit_spec")]
    out: Option<PathBuf>,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let f: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if f > 0.0 && f < 1.0 {
        Ok(f)
    } else {
        Err(format!("{f} is not in (0, 1)"))
    }
}

pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    pub fn data(e: impl std::fmt::Display) -> Self {
        Failure::Data(e.to_string())
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("TALKPROFILER_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("TALKPROFILER_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match configure_threads().and_then(|()| commands::dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
