//! `structprobe`: treebank statistics, oracle embeddings, probe training,
//! tree decoding, evaluation and paired comparisons from the command line.
//!
//! Exit status is 0 on success, 1 on input or data errors and 2 on usage
//! errors.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use structprobe::probes::{LayerSelector, Residual};

use crate::error::{error_json, CliError};

#[derive(Parser)]
#[command(name = "structprobe", version, about = "Structural probes for dependency syntax")]
struct Cli {
    /// Print errors as a JSON object on stderr
    #[arg(long, global = true)]
    json_errors: bool,

    /// Worker threads for per-sentence work (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shape statistics of a CoNLL-U treebank
    Stats(StatsArgs),
    /// Oracle embeddings that encode the gold trees, as SPE1
    Synth(SynthArgs),
    /// Train distance and depth probes
    Train(TrainArgs),
    /// Decode trees from embeddings with trained probes
    Decode(DecodeArgs),
    /// Score predicted trees against gold
    Eval(EvalArgs),
    /// Paired comparison of two per-sentence score files
    Compare(CompareArgs),
}

#[derive(Args)]
struct StatsArgs {
    /// CoNLL-U treebank
    treebank: PathBuf,
    /// Keep only the first N sentences
    #[arg(long)]
    max_sentences: Option<usize>,
    /// Write the JSON here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write per-sentence tree heights as CSV (sent_id,value)
    #[arg(long)]
    heights: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// CoNLL-U treebank
    treebank: PathBuf,
    /// SPE1 output file
    #[arg(long, short)]
    output: PathBuf,
    /// Embedding dimension (default: longest sentence minus one)
    #[arg(long)]
    dim: Option<usize>,
    /// Standard deviation of Gaussian noise added per component
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_sentences: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DepthResidual {
    Absolute,
    Squared,
}

impl From<DepthResidual> for Residual {
    fn from(r: DepthResidual) -> Self {
        match r {
            DepthResidual::Absolute => Residual::Absolute,
            DepthResidual::Squared => Residual::Squared,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training treebank (CoNLL-U)
    #[arg(long)]
    treebank: PathBuf,
    /// Training embeddings (SPE1), aligned with the treebank
    #[arg(long)]
    embeddings: PathBuf,
    /// Dev treebank; without it the last --dev-fraction of the training data is held out
    #[arg(long, requires = "dev_embeddings")]
    dev_treebank: Option<PathBuf>,
    #[arg(long, requires = "dev_treebank")]
    dev_embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1, conflicts_with = "dev_treebank")]
    dev_fraction: f64,
    /// Probe parameters output (JSON)
    #[arg(long, short)]
    output: PathBuf,
    /// Loss curve output (CSV: layer,epoch,split,metric,value)
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Embedding layer index, or "mix" for a learned layer average
    #[arg(long, default_value = "0")]
    layer: LayerSelector,
    /// Probe rank (default: embedding dimension)
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    batch_size: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, value_enum, default_value_t = DepthResidual::Absolute)]
    depth_residual: DepthResidual,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_sentences: Option<usize>,
}

#[derive(Args)]
struct DecodeArgs {
    /// Probe parameters (JSON)
    #[arg(long)]
    params: PathBuf,
    /// Embeddings (SPE1)
    #[arg(long)]
    embeddings: PathBuf,
    /// Treebank supplying forms and tags for the output; heads are replaced
    #[arg(long)]
    treebank: Option<PathBuf>,
    /// Predicted CoNLL-U output
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long)]
    max_sentences: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold CoNLL-U
    #[arg(long)]
    gold: PathBuf,
    /// Predicted CoNLL-U, sentence-aligned with gold
    #[arg(long)]
    pred: PathBuf,
    /// Leave PUNCT tokens out of every metric
    #[arg(long)]
    exclude_punct: bool,
    /// Write the JSON report here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Flat CSV report (metric,key,field,value)
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-sentence UAS (sent_id,value), the input of `compare`
    #[arg(long)]
    sentence_scores: Option<PathBuf>,
    #[arg(long)]
    max_sentences: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// Scores of the first system (CSV: sent_id,value)
    #[arg(long)]
    a: PathBuf,
    /// Scores of the second system, same items in the same order
    #[arg(long)]
    b: PathBuf,
    /// Per-item covariate correlated with b - a (CSV: sent_id,value)
    #[arg(long)]
    covariate: Option<PathBuf>,
    /// Subtracted from the covariate item by item, e.g. UD heights when
    /// --covariate holds SUD heights
    #[arg(long, requires = "covariate")]
    covariate_base: Option<PathBuf>,
    /// Write the JSON here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start worker threads: {e}")))?;
    match cli.command {
        Command::Stats(args) => commands::stats(args),
        Command::Synth(args) => commands::synth(args),
        Command::Train(args) => commands::train(args),
        Command::Decode(args) => commands::decode(args, &pool),
        Command::Eval(args) => commands::eval(args, &pool),
        Command::Compare(args) => commands::compare(args),
    }
}

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if json_errors {
                let message = e.render().to_string().trim().to_owned();
                eprintln!("{}", error_json("usage", message, 2));
            } else {
                let _ = e.print();
            }
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json_errors {
                eprintln!("{}", error_json(e.kind(), e.to_string(), 1));
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(1)
        }
    }
}
