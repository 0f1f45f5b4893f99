use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ngnoise_core::smoothing::DEFAULT_DISCOUNT;
use ngnoise_core::{CorpusMode, Error as CoreError, Estimator};

mod artifact;
mod commands;

use artifact::UsageError;

#[derive(Parser)]
#[command(name = "ngnoise", version, about = "Corpus noising and n-gram smoothing pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a vocabulary from a whitespace-tokenized corpus.
    BuildVocab(BuildVocabArgs),
    /// Count unigrams, bigrams and (optionally) trigrams.
    Count(CountArgs),
    /// Write one noised copy of a corpus per epoch.
    Noise(NoiseArgs),
    /// Compare Monte-Carlo and analytic pseudocounts under unigram noising.
    VerifyEquivalence(VerifyArgs),
    /// Held-out perplexity of a smoothed bigram model.
    EvalPerplexity(EvalArgs),
    /// Mean KL divergence from a smoothed model to a reference distribution.
    KlReport(KlArgs),
    /// Perplexity of several models on held-out positions with unseen n-grams.
    UnseenReport(UnseenArgs),
}

#[derive(Args)]
pub struct BuildVocabArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Keep only tokens seen more than this many times.
    #[arg(long, default_value_t = 0)]
    pub min_count: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Continuous,
    PerLine,
}

impl From<ModeArg> for CorpusMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Continuous => CorpusMode::Continuous,
            ModeArg::PerLine => CorpusMode::PerLine,
        }
    }
}

#[derive(Args)]
pub struct CountArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub max_order: u8,
    #[arg(long, value_enum, default_value = "continuous")]
    pub mode: ModeArg,
    /// Count this many pieces in parallel; the output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub shards: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub counts: PathBuf,
    /// JSON noising configuration (see docs/noise-config.md).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub epochs: u32,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Target-side corpus, vocabulary and counts for parallel-pair mode.
    #[arg(long, requires_all = ["pair_vocab", "pair_counts"])]
    pub pair_corpus: Option<PathBuf>,
    #[arg(long)]
    pub pair_vocab: Option<PathBuf>,
    #[arg(long)]
    pub pair_counts: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Json,
    Tsv,
}

impl ReportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Tsv => "tsv",
        }
    }
}

#[derive(Args)]
pub struct VerifyArgs {
    /// The corpus the counts were built from.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Continuous-mode counts of the corpus.
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 2000)]
    pub n_samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative errors are reported only where the analytic count reaches this.
    #[arg(long, default_value_t = ngnoise_core::verify::DEFAULT_FLOOR)]
    pub floor: f64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    Mle,
    Interpolated,
    #[value(alias = "absolute_discount")]
    AbsoluteDiscount,
    #[value(alias = "kneser_ney")]
    KneserNey,
}

#[derive(Args)]
pub struct EstimatorArgs {
    #[arg(long, value_enum)]
    pub estimator: EstimatorKind,
    /// Interpolation weight on the bigram MLE.
    #[arg(long, default_value_t = 0.75)]
    pub lambda: f64,
    #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
    pub discount: f64,
}

impl EstimatorArgs {
    pub fn estimator(&self) -> Estimator {
        estimator(self.estimator, self.lambda, self.discount)
    }
}

pub fn estimator(kind: EstimatorKind, lambda: f64, discount: f64) -> Estimator {
    match kind {
        EstimatorKind::Mle => Estimator::Mle,
        EstimatorKind::Interpolated => Estimator::Interpolated { lambda },
        EstimatorKind::AbsoluteDiscount => Estimator::AbsoluteDiscount { discount },
        EstimatorKind::KneserNey => Estimator::KneserNey { discount },
    }
}

#[derive(Args)]
pub struct HeldoutArgs {
    /// Training counts.
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub heldout: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: HeldoutArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    /// Comma-separated λ grid; the interpolated λ is fitted on the held-out data.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ReferenceArg {
    Uniform,
    Unigram,
}

#[derive(Args)]
pub struct KlArgs {
    #[command(flatten)]
    pub data: HeldoutArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[arg(long, value_enum, default_value = "unigram")]
    pub reference: ReferenceArg,
    /// Add ε to every observed type and renormalize. Defaults to 1e-10 for
    /// the MLE and to no floor otherwise.
    #[arg(long)]
    pub floor_epsilon: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct UnseenArgs {
    #[command(flatten)]
    pub data: HeldoutArgs,
    #[arg(long, default_value_t = 0.75)]
    pub lambda: f64,
    #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
    pub discount: f64,
    /// Training corpus; when given, a Monte-Carlo unigram-noised estimator is added.
    #[arg(long, requires = "gamma")]
    pub train_corpus: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub n_samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn report_error(kind: &str, code: u8, message: String) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "code": code, "message": message }));
    ExitCode::from(code)
}

fn is_usage(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause.is::<UsageError>()
            || matches!(
                cause.downcast_ref::<CoreError>(),
                Some(CoreError::InvalidConfig(_) | CoreError::InvalidParameter(_))
            )
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report_error("usage", 1, e.render().to_string().trim_end().to_string()),
    };
    let result = match cli.command {
        Command::BuildVocab(a) => commands::build_vocab(&a),
        Command::Count(a) => commands::count(&a),
        Command::Noise(a) => commands::noise(&a),
        Command::VerifyEquivalence(a) => commands::verify_equivalence(&a),
        Command::EvalPerplexity(a) => commands::eval_perplexity(&a),
        Command::KlReport(a) => commands::kl_report(&a),
        Command::UnseenReport(a) => commands::unseen_report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_usage(&e) => report_error("usage", 1, format!("{e:#}")),
        Err(e) => report_error("data", 2, format!("{e:#}")),
    }
}
