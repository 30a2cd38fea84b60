//! `sinklab` command-line runner. Every subcommand writes its data files and
//! a `manifest.json` into `--out-dir`.

mod cmd;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "sinklab", version, about = "Position-zero attention sink experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Overrides the seed from the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file layered over the built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Clone, Debug, Default)]
pub struct ModelArgs {
    /// Checkpoint directory; without it weights are initialized from config.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// `random` (std 0.02) or `zero` (uniform logits).
    #[arg(long)]
    pub init: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic vs Monte Carlo attention-output norms under the cone model.
    Cone {
        #[arg(long = "alpha")]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        /// Use sparse random weights with this many heavy positions.
        #[arg(long)]
        sparse_k: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// RMSNorm Jacobian against finite differences, plus the gain sweep.
    Normcheck {
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
    /// Build or verify the analytic position-zero circuit.
    Circuit {
        #[command(subcommand)]
        action: CircuitAction,
    },
    /// Full forward trace of one sequence.
    Trace {
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        capture: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Sink report over a probe batch.
    Metrics {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Share of all-equal n-token windows in a corpus.
    Ngram {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
    /// Loss with the first token repeated, with and without BOS.
    Repeat {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Re-verify the circuit with each head of one layer ablated.
    Ablate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[arg(long)]
        layer: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Train on a token corpus with periodic sink snapshots.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        init: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Stage timeline CSV from training records.
    Timeline {
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum CircuitAction {
    Build {
        #[command(flatten)]
        common: Common,
    },
    Verify {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Circuit description; defaults to the one stored in the checkpoint.
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// Result of a run that completed and wrote its outputs.
pub enum Outcome {
    Pass,
    /// A tolerance or verification check failed; outputs are still written.
    Fail(String),
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Cone {
            alphas,
            lengths,
            trials,
            dim,
            sparse_k,
            common,
        } => cmd::cone::run(&common, alphas, lengths, trials, dim, sparse_k),
        Command::Normcheck { dims, common } => cmd::normcheck::run(&common, dims),
        Command::Circuit { action } => match action {
            CircuitAction::Build { common } => cmd::circuit::build(&common),
            CircuitAction::Verify {
                checkpoint,
                circuit,
                common,
            } => cmd::circuit::verify(&common, &checkpoint, circuit.as_deref()),
        },
        Command::Trace {
            text,
            capture,
            model,
            common,
        } => cmd::inspect::trace(&common, &model, text, capture),
        Command::Metrics {
            corpus,
            model,
            common,
        } => cmd::inspect::metrics(&common, &model, corpus),
        Command::Ngram { corpus, n, common } => cmd::corpus::ngram(&common, corpus, n),
        Command::Repeat {
            corpus,
            n,
            model,
            common,
        } => cmd::corpus::repeat(&common, &model, corpus, n),
        Command::Ablate {
            checkpoint,
            circuit,
            layer,
            common,
        } => cmd::circuit::ablate(&common, &checkpoint, circuit.as_deref(), layer),
        Command::Train {
            corpus,
            steps,
            init,
            common,
        } => cmd::train::train(&common, corpus, steps, init),
        Command::Timeline { records, common } => cmd::train::timeline(&common, &records),
    }
}

/// 1 for failed checks, 2 for bad input.
fn exit_code(e: &anyhow::Error) -> u8 {
    use sinklab::Error;
    match e.downcast_ref::<Error>() {
        Some(
            Error::CalibrationFailed { .. } | Error::ConstructionFailed { .. } | Error::Divergence { .. },
        ) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(why)) => {
            eprintln!("check failed: {why}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
