//! `iihs`: command-line analyzer for interactive information-hiding systems.
//!
//! Exit codes: 0 success, 1 analysis or validation failure, 2 usage error.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "iihs", version, about = "Leakage, capacity and distance analysis of interactive information-hiding systems")]
pub struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a model against the structural conditions.
    Validate {
        #[arg(long)]
        model: PathBuf,
        /// Also require the normalized shape (alternation, secret first level, ...).
        #[arg(long)]
        normalized: bool,
    },
    /// Unfold a fully probabilistic model into normalized form.
    Normalize {
        #[arg(long)]
        model: PathBuf,
        /// Number of rounds; defaults to the smallest horizon that keeps every path.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        horizon: Option<u32>,
        /// Pad leaves above the last level with placeholder steps.
        #[arg(long)]
        pad: bool,
        /// Output file; standard output when omitted.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Extract the stochastic kernels and related structures.
    Channel {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        horizon: Option<u32>,
        #[arg(long, group = "view")]
        dump_kernels: bool,
        #[arg(long, group = "view")]
        dump_reactor: bool,
        #[arg(long, group = "view")]
        check_consistency: bool,
    },
    /// Entropies, mutual information and directed information.
    Leakage {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        horizon: Option<u32>,
        /// Add the min-entropy leakage.
        #[arg(long)]
        min_entropy: bool,
    },
    /// Directed capacity by multi-start ascent.
    Capacity {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=10_000))]
        restarts: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u32).range(1..))]
        max_iters: u32,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        horizon: Option<u32>,
        /// Also run Blahut–Arimoto on the first-step kernel matrix.
        #[arg(long)]
        classical: bool,
        /// Print the maximizing input rows.
        #[arg(long)]
        show_inputs: bool,
    },
    /// Bisimulation distance between the initial states of two models.
    Distance {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
        iters: u32,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
    /// Distance against capacity gap for kernel perturbations of growing size.
    Continuity {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated perturbation sizes in [0, 1].
        #[arg(long, default_value = "0.001,0.002,0.005,0.01,0.02,0.05,0.1")]
        grid: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=10_000))]
        restarts: u32,
    },
    /// Stop-and-wait transmission over a binary erasure channel with feedback.
    Erasure(ErasureArgs),
    /// Bundled worked examples.
    Example {
        #[arg(long, conflicts_with = "run", required_unless_present = "run")]
        list: bool,
        #[arg(long)]
        run: Option<String>,
    },
}

#[derive(Args, Debug)]
pub struct ErasureArgs {
    /// Message bits, e.g. 011.
    #[arg(long, required_unless_present = "trials")]
    pub message: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=1_000_000))]
    pub horizon: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pin every channel output, e.g. e,0,1.
    #[arg(long, conflicts_with_all = ["seed", "trials"])]
    pub force: Option<String>,
    /// Monte-Carlo throughput over this many random messages.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=100_000_000))]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 0.8)]
    pub p_ok: f64,
    /// `zero` or `last-k-penalty:K:P`.
    #[arg(long, default_value = "zero")]
    pub eta: String,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Bad flag value; exit 2.
    Usage(String),
    /// Analysis error; exit 1.
    Analysis(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Analysis(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(if out.ok { 0 } else { 1 })
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Analysis(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
