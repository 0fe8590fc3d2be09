//! `bandbatch`: hard-negative batch construction for contrastive training.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use bandbatch_core::losses::DEFAULT_TEMPERATURE;
use bandbatch_core::similarity::DEFAULT_QUANTILE;
use bandbatch_core::{EmbeddingFormat, Strategy};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bandbatch", version, about)]
struct Cli {
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute a batch ordering and write it out.
    Permute(PermuteArgs),
    /// Report losses, gap bounds and objectives for one batching.
    Analyze(AnalyzeArgs),
    /// Compare the pipeline, hard negatives and several random seeds.
    Compare(CompareArgs),
    /// Time the pipeline stages on random data.
    Bench(BenchArgs),
    /// Exhaustive optima for tiny inputs.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct Inputs {
    /// Anchor embeddings (EMB1 binary, or TSV for .tsv/.txt).
    #[arg(long)]
    x: PathBuf,
    /// Positive embeddings, row-aligned with --x.
    #[arg(long)]
    y: PathBuf,
    /// Override the format inferred from the file extension.
    #[arg(long)]
    format: Option<EmbeddingFormat>,
}

#[derive(Args, Debug, Clone)]
struct PipelineArgs {
    #[arg(long, default_value_t = DEFAULT_QUANTILE)]
    quantile: f64,
    /// Rows per block when estimating the quantile; defaults to min(N, 4096).
    #[arg(long)]
    chunk_rows: Option<usize>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    reverse_cm: bool,
}

#[derive(Args, Debug)]
struct PermuteArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    batch_size: usize,
    #[arg(long, default_value_t = Strategy::Gcbs)]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    tau: f64,
    /// Write the permutation here, one index per line.
    #[arg(long)]
    out_perm: Option<PathBuf>,
    /// Write the batch dump here, `b: i1 i2 ...` per line.
    #[arg(long)]
    out_batches: Option<PathBuf>,
    /// Print a gap report to stdout.
    #[arg(long)]
    report: bool,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    batch_size: usize,
    /// Evaluate this permutation instead of generating one.
    #[arg(long)]
    perm: Option<PathBuf>,
    #[arg(long, default_value_t = Strategy::Gcbs)]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    tau: f64,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    batch_size: usize,
    /// Number of random baseline seeds, starting at --seed.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    tau: f64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated dataset sizes.
    #[arg(long)]
    sizes: String,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    tau: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match commands::run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
