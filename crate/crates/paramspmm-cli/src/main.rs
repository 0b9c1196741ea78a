//! `paramspmm`: convert matrices to the parametric format, benchmark the
//! config lattice, train the decider, and run auto-tuned SpMM.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod inputs;
mod manifest;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "paramspmm", version, about)]
struct Cli {
    /// Engine worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Convert a Matrix Market file to a PCSR file.
    Convert(commands::ConvertArgs),
    /// Print structural features and format metrics for a matrix.
    Inspect(commands::InspectArgs),
    /// Benchmark matrices over the config lattice; emit timing and corpus CSVs.
    Bench(commands::BenchArgs),
    /// Train a decider model from a labeled corpus CSV.
    Train(commands::TrainArgs),
    /// Predict the best config for a matrix at a given dense width.
    Predict(commands::PredictArgs),
    /// Multiply a sparse matrix by a dense operand.
    Spmm(commands::SpmmArgs),
    /// Compute a locality-improving row/column permutation.
    Reorder(commands::ReorderArgs),
}

fn main() {
    // Die quietly when a downstream pipe closes, like any line-oriented
    // Unix tool; Rust's default turns SIGPIPE into a println panic.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    match &cli.command {
        Commands::Convert(args) => commands::cmd_convert(args),
        Commands::Inspect(args) => commands::cmd_inspect(args),
        Commands::Bench(args) => commands::cmd_bench(args),
        Commands::Train(args) => commands::cmd_train(args),
        Commands::Predict(args) => commands::cmd_predict(args),
        Commands::Spmm(args) => commands::cmd_spmm(args),
        Commands::Reorder(args) => commands::cmd_reorder(args),
    }
}
