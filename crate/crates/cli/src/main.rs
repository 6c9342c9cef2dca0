mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hwpgo_core::formats::Mode;

/// Convert hardware-sampled profiles into source-level feedback profiles.
#[derive(Debug, Parser)]
#[command(name = "hwpgo", version)]
struct Cli {
    /// Log progress and diagnostics to stderr
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a sample file into a source profile
    Convert {
        samples: PathBuf,
        binary: PathBuf,
        /// Fail unless the sample file is in this mode
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sum profiles
    Merge {
        #[arg(required = true)]
        profiles: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotate CFGs with block and edge counts from a profile
    Annotate {
        cfg: PathBuf,
        profile: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic program, sample it and record the ground truth
    Simulate(SimulateArgs),
    /// Print headline numbers of a profile
    Summary {
        profile: PathBuf,
        /// Number of hottest functions to list
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Basic blocks in `main`
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    size: u64,
    /// Outer-loop iterations of `main`
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    iterations: u32,
    #[arg(long, default_value = "lbr")]
    mode: Mode,
    /// Events between samples [default: 2000000 for cycles, 400000 for lbr]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    period: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Branches per LBR sample
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u8).range(1..=16))]
    depth: u8,
    /// Stop the trace after this many instructions
    #[arg(long, default_value_t = 10_000_000)]
    max_insns: usize,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    let result = match cli.command {
        Command::Convert {
            samples,
            binary,
            mode,
            out,
        } => commands::convert(&samples, &binary, mode, &out),
        Command::Merge { profiles, out } => commands::merge(&profiles, &out),
        Command::Annotate { cfg, profile, out } => commands::annotate(&cfg, &profile, &out),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Summary { profile, top } => commands::summary(&profile, top),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
