//! Command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cim", version, about = "Dimension-based causal interaction analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Output {
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RecordingArgs {
    /// Recording CSV: header of channel ids, one column per channel.
    #[arg(long)]
    input: PathBuf,
    /// Samples per second of the recording.
    #[arg(long, default_value_t = 1.0)]
    sample_rate: f64,
    /// Skip per-channel z-scoring before embedding.
    #[arg(long)]
    no_zscore: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum System {
    Linear,
    Ar,
    Henon,
    Sine,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DimMethod {
    Corr,
    Box,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Policy {
    Max,
    Mean,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a benchmark recording.
    Simulate {
        #[arg(long, value_enum)]
        system: System,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        #[arg(long, default_value_t = 0.3)]
        coupling: f64,
        #[arg(long)]
        snr_db: Option<f64>,
        /// Use `0.3 y_{i-2}` in the coupled map instead of `0.3 y_{i-1}`.
        #[arg(long)]
        y_lag2: bool,
        /// Destination of the recording CSV.
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Build a delay embedding from a recording.
    Embed {
        #[command(flatten)]
        rec: RecordingArgs,
        /// Embedding spec as inline JSON or a path to a JSON file.
        #[arg(long)]
        spec: String,
        #[command(flatten)]
        output: Output,
    },
    /// Estimate the fractal dimension of a point cloud CSV (one row per point).
    Dim {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DimMethod::Corr)]
        method: DimMethod,
        #[arg(long)]
        radii_per_decade: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Interaction measure from one channel into another at the best lag.
    Cim {
        #[command(flatten)]
        rec: RecordingArgs,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        max_lag: usize,
        /// Also try lag 0.
        #[arg(long)]
        include_zero: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Connectivity map over all channel pairs in a window.
    Connmap {
        #[command(flatten)]
        rec: RecordingArgs,
        /// START,LEN in samples.
        #[arg(long)]
        window: String,
        #[arg(long, default_value_t = 100)]
        max_lag: usize,
        #[arg(long)]
        include_zero: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination of the weight matrix CSV.
        #[arg(long)]
        adjacency: PathBuf,
        /// Destination of the lag matrix CSV.
        #[arg(long)]
        lags: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Persistent homology of a weighted adjacency matrix.
    Topo {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        max_dim: usize,
        /// Let the largest weights enter the filtration first.
        #[arg(long)]
        descending: bool,
        /// Symmetrize a directed matrix before filtering.
        #[arg(long, value_enum)]
        symmetrize: Option<Policy>,
        #[arg(long)]
        barcode: Option<PathBuf>,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Screen features, fit an elastic net and score a test table.
    Decode {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        alpha: f64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0.01)]
        screen_level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    #[command(hide = true, subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Nearest-neighbour mutual information between column groups.
    Ksg {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated column names of the first variable.
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Barcode by dense rank computations (at most 8 nodes).
    Betti {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        max_dim: usize,
        #[arg(long)]
        descending: bool,
        #[command(flatten)]
        output: Output,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
