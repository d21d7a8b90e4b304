mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{DmmOpts, EvalOpts, GridOpts, LdaOpts, PreprocessOpts, ProdLdaOpts, SignalOpts, TopicsOpts};

/// Topic models for short texts: DMM, online LDA and ProdLDA.
#[derive(Debug, Parser)]
#[command(name = "stm", version)]
pub struct Cli {
    /// TOML file with option tables; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize raw JSONL records and write `vocab.tsv` and `corpus.jsonl`
    Ingest {
        /// Raw records, one `{"text", "author", "timestamp_utc"}` object per line
        #[arg(long)]
        input: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pre: PreprocessOpts,
    },
    /// Fit a topic model to an ingested corpus
    Train {
        #[command(subcommand)]
        model: TrainModel,
    },
    /// Coherence of a model's topics on a reference corpus and held-out perplexity
    Eval {
        /// Model file written by `train`
        #[arg(long)]
        model: PathBuf,
        /// Ingested reference / held-out corpus directory
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: EvalOpts,
    },
    /// Relevance-ranked top words per topic
    Topics {
        /// Model file written by `train`
        #[arg(long)]
        model: PathBuf,
        /// Write the table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: TopicsOpts,
    },
    /// Cross-validated grid search over the model's hyperparameter grid
    Gridsearch {
        /// Model family
        #[arg(value_enum)]
        kind: GridKind,
        /// Ingested corpus directory
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: GridOpts,
    },
    /// Regress next-day returns on daily topic shares and sentiment
    Signal {
        /// DMM model file written by `train dmm`
        #[arg(long)]
        model: PathBuf,
        /// Raw timestamped records (same format as `ingest --input`)
        #[arg(long)]
        tweets: PathBuf,
        /// Daily closes, `date,close` with a header
        #[arg(long)]
        prices: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: SignalOpts,
        #[command(flatten)]
        pre: PreprocessOpts,
    },
}

#[derive(Debug, Subcommand)]
pub enum TrainModel {
    /// Dirichlet multinomial mixture, collapsed Gibbs sampling
    Dmm {
        #[command(flatten)]
        io: TrainIo,
        #[command(flatten)]
        opts: DmmOpts,
    },
    /// Latent Dirichlet allocation, online variational Bayes
    Lda {
        #[command(flatten)]
        io: TrainIo,
        #[command(flatten)]
        opts: LdaOpts,
    },
    /// ProdLDA variational autoencoder
    Prodlda {
        #[command(flatten)]
        io: TrainIo,
        #[command(flatten)]
        opts: ProdLdaOpts,
    },
}

#[derive(Debug, clap::Args)]
pub struct TrainIo {
    /// Ingested corpus directory
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridKind {
    Dmm,
    Lda,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
