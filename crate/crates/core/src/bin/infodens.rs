use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use infodens::ngram::NgramConfig;
use infodens::pipeline::{
    run, AnalysisConfig, MetricSelection, RunConfig, ScoreConfig, ScoreSource, SynthConfig,
    TrainConfig,
};
use infodens::synth::{ScoreSynthConfig, TextSynthConfig};
use infodens::{Error, Factor};

/// Token surprisal, entropy and UID profiling for grouped essay corpora.
///
/// Every flag can also be set through an `INFODENS_<FLAG>` environment
/// variable, e.g. `INFODENS_MAX_TOKENS=200`.
#[derive(Parser)]
#[command(name = "infodens", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the built-in n-gram model on plain-text sentences (one per line).
    Train(TrainArgs),
    /// Score every manifest essay and write exchange JSONL.
    Score(ScoreArgs),
    /// Compute essay metrics, profiles, ANOVA, post-hoc tables and mixed models.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic corpus with known parameters.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Ngram,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupBy {
    L1,
    Proficiency,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Surprisal,
    Entropy,
    Uid,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthMode {
    Scores,
    Texts,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus files, or directories of `.txt` files.
    #[arg(long, required = true, num_args = 1.., env = "INFODENS_CORPUS", value_delimiter = ',')]
    corpus: Vec<PathBuf>,
    #[arg(long, default_value_t = 3, env = "INFODENS_ORDER")]
    order: usize,
    /// Add-k smoothing constant.
    #[arg(long, default_value_t = 0.01, env = "INFODENS_K")]
    k: f64,
    /// Interpolation weights, unigram first, comma separated.
    #[arg(long, value_delimiter = ',', env = "INFODENS_WEIGHTS")]
    weights: Option<Vec<f64>>,
    /// Model file to write.
    #[arg(long, env = "INFODENS_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, env = "INFODENS_MANIFEST")]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "ngram", env = "INFODENS_BACKEND")]
    backend: Backend,
    /// Model file for the n-gram backend.
    #[arg(long, env = "INFODENS_MODEL")]
    model: Option<PathBuf>,
    /// Pre-scored JSONL for the external backend.
    #[arg(long, env = "INFODENS_SCORES")]
    scores: Option<PathBuf>,
    /// Scoring threads; 0 uses every core.
    #[arg(long, default_value_t = 0, env = "INFODENS_WORKERS")]
    workers: usize,
    /// JSONL file to write.
    #[arg(long, env = "INFODENS_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_enum, default_value = "external", env = "INFODENS_BACKEND")]
    backend: Backend,
    /// Scored JSONL (external backend).
    #[arg(long, env = "INFODENS_SCORES")]
    scores: Option<PathBuf>,
    /// Manifest to score in-process (n-gram backend).
    #[arg(long, env = "INFODENS_MANIFEST")]
    manifest: Option<PathBuf>,
    #[arg(long, env = "INFODENS_MODEL")]
    model: Option<PathBuf>,
    /// Leading tokens kept for position profiles and mixed models.
    #[arg(long, default_value_t = 300, env = "INFODENS_MAX_TOKENS")]
    max_tokens: usize,
    #[arg(long, value_enum, default_value = "l1", env = "INFODENS_GROUP_BY")]
    group_by: GroupBy,
    #[arg(long, value_enum, default_value = "all", env = "INFODENS_METRIC")]
    metric: Metric,
    /// Odd moving-average width for profiles; 1 keeps raw means.
    #[arg(long, default_value_t = 1, env = "INFODENS_WINDOW")]
    window: usize,
    /// Family-wise significance level for post-hoc flags.
    #[arg(long, default_value_t = 0.05, env = "INFODENS_ALPHA")]
    alpha: f64,
    #[arg(long, default_value_t = 0, env = "INFODENS_WORKERS")]
    workers: usize,
    /// Output directory.
    #[arg(long, env = "INFODENS_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "scores", env = "INFODENS_MODE")]
    mode: SynthMode,
    #[arg(long, default_value_t = 7, env = "INFODENS_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 15, env = "INFODENS_ESSAYS_PER_GROUP")]
    essays_per_group: usize,
    /// Output directory.
    #[arg(long, env = "INFODENS_OUT")]
    out: PathBuf,
}

fn config(command: Command) -> Result<RunConfig, Error> {
    Ok(match command {
        Command::Train(a) => {
            let mut ngram = NgramConfig::new(a.order, a.k);
            if let Some(w) = a.weights {
                ngram = ngram.with_weights(w);
            }
            RunConfig::Train(TrainConfig {
                corpus: a.corpus,
                ngram,
                out: a.out,
            })
        }
        Command::Score(a) => {
            let (model, external) = match a.backend {
                Backend::Ngram => (Some(a.model.ok_or_else(|| missing("--model"))?), None),
                Backend::External => (None, Some(a.scores.ok_or_else(|| missing("--scores"))?)),
            };
            RunConfig::Score(ScoreConfig {
                manifest: a.manifest,
                model,
                external,
                workers: a.workers,
                out: a.out,
            })
        }
        Command::Analyze(a) => {
            let source = match a.backend {
                Backend::External => ScoreSource::External {
                    scores: a.scores.ok_or_else(|| missing("--scores"))?,
                },
                Backend::Ngram => ScoreSource::Ngram {
                    manifest: a.manifest.ok_or_else(|| missing("--manifest"))?,
                    model: a.model.ok_or_else(|| missing("--model"))?,
                },
            };
            let mut c = AnalysisConfig::new(source);
            c.max_tokens = a.max_tokens;
            c.group_by = match a.group_by {
                GroupBy::L1 => Factor::L1,
                GroupBy::Proficiency => Factor::Proficiency,
            };
            c.metric = match a.metric {
                Metric::Surprisal => MetricSelection::Surprisal,
                Metric::Entropy => MetricSelection::Entropy,
                Metric::Uid => MetricSelection::Uid,
                Metric::All => MetricSelection::All,
            };
            c.window = a.window;
            c.alpha = a.alpha;
            c.workers = a.workers;
            RunConfig::Analyze(c, a.out)
        }
        Command::Synth(a) => {
            let synth = match a.mode {
                SynthMode::Scores => SynthConfig::Scores(ScoreSynthConfig {
                    seed: a.seed,
                    essays_per_group: a.essays_per_group,
                    ..Default::default()
                }),
                SynthMode::Texts => SynthConfig::Texts(TextSynthConfig {
                    seed: a.seed,
                    essays_per_group: a.essays_per_group,
                    ..Default::default()
                }),
            };
            RunConfig::Synth(synth, a.out)
        }
    })
}

fn missing(flag: &str) -> Error {
    Error::Config(format!("{flag} is required for this backend"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match config(cli.command).and_then(|c| run(&c)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
