//! `dfs`: data generation, training, sampling, evaluation, ablation,
//! convergence plots and rank statistics for the dfs-core engine.
//!
//! On failure the process prints exactly one JSON line
//! `{"error":"<kind>","message":"<text>"}` to stderr and exits with status 2.

mod commands;
mod config;
mod io;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dfs_core::DfsError;

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new("invalid-argument", message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn format(message: impl Into<String>) -> Self {
        Self::new("format", message)
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new("io", format!("{}: {err}", path.display()))
    }

    fn line(&self) -> String {
        let one_line = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        serde_json::json!({ "error": self.kind, "message": one_line }).to_string()
    }
}

impl From<DfsError> for CliError {
    fn from(e: DfsError) -> Self {
        let kind = match &e {
            DfsError::InvalidArgument(_) => "invalid-argument",
            DfsError::TrainingDiverged { .. } => "training-diverged",
            DfsError::Format(_) | DfsError::Json(_) => "format",
            DfsError::Io(_) => "io",
        };
        Self::new(kind, e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "dfs", version, about = "Multi-path fuzzy-rule diffusion engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the configured synthetic dataset (train and held-out splits).
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// K-medoids clustering of a sample CSV; prints medoid indices as JSON.
    Cluster {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
    },
    /// Train a checkpoint; writes checkpoint.json and loss.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Training CSV; defaults to the configured synthetic train split.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate samples; writes samples.csv, trace.csv and manifest.json.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cond: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ablation mode; defaults to the checkpoint's configured mode.
        #[arg(long)]
        ablation: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare generated samples with real ones; prints a metrics CSV.
    Eval {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        gen: PathBuf,
        /// Comma-separated metric names.
        #[arg(long, default_value = "frechet,sliced-w2")]
        metrics: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and score ablation modes (comma-separated, or "all").
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "full")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Membership stability of a trace CSV; writes stability.csv and convergence.svg.
    Convergence {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        tail: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Friedman omnibus test or Holm post-hoc comparisons over average ranks.
    Stats {
        test: StatsTest,
        /// Comma-separated average ranks, or "table-vi" for the bundled table.
        #[arg(long, default_value = "table-vi")]
        ranks: String,
        #[arg(long, default_value_t = 4)]
        n_blocks: usize,
        #[arg(long, default_value_t = 0)]
        control: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatsTest {
    Friedman,
    Holm,
}

fn run(cli: Cli) -> Result<(), CliError> {
    use commands as c;
    match cli.command {
        Command::GenData { config, out } => c::gen_data(&config, out),
        Command::Cluster { data, k, seed, restarts } => c::cluster(&data, k, seed, restarts),
        Command::Train { config, data, out } => c::train(&config, data.as_deref(), out),
        Command::Sample { checkpoint, cond, n, seed, ablation, out } => {
            c::sample(&checkpoint, cond, n, seed, ablation.as_deref(), &out)
        }
        Command::Eval { real, gen, metrics, seed, out } => c::eval(&real, &gen, &metrics, seed, out.as_deref()),
        Command::Ablate { config, mode, out } => c::ablate(&config, &mode, out),
        Command::Convergence { trace, tail, out } => c::convergence(&trace, tail, &out),
        Command::Stats { test, ranks, n_blocks, control, alpha, out } => {
            let table = c::rank_table(&ranks, n_blocks)?;
            match test {
                StatsTest::Friedman => c::friedman(&table, out.as_deref()),
                StatsTest::Holm => c::holm(&table, &ranks, control, alpha, out.as_deref()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid command line").trim_start_matches("error: ");
            eprintln!("{}", CliError::new("usage", first).line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(2)
        }
    }
}
