//! `wpmixer` command-line driver.
//!
//! Settings resolve in this order, highest first: command-line flags,
//! `WPMIXER_*` environment variables, the config file.
//!
//! Exit codes: 0 success, 1 numerical failure (divergence, non-finite
//! gradients, failed checks), 2 I/O or configuration error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wpmixer::alloc::HugePageAlloc;

#[global_allocator]
static ALLOC: HugePageAlloc = HugePageAlloc;

#[derive(Parser)]
#[command(name = "wpmixer", version, about = "Wavelet patch-mixer forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, report and metrics to the output directory.
    Train(RunArgs),
    /// Evaluate a checkpoint on one split; prints a metrics CSV.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Forecast the next T rows after the last L rows of a CSV file, in raw units.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        /// Model to check; the built-in toy model when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        batch: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Analytic FLOP count of one forward pass over one batch.
    Flops {
        #[arg(long)]
        config: PathBuf,
        /// Batch size; the configured training batch when omitted.
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Filter-bank, round-trip, gradient and normalization checks.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Device::Cpu)]
    device: Device,
    /// Keep validation/test inputs inside their own split.
    #[arg(long, action = clap::ArgAction::Set)]
    strict_splits: Option<bool>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Device {
    Cpu,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(if e.is_numerical() { 1 } else { 2 })
        }
    }
}
