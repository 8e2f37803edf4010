//! `delkm`: train, delete from, benchmark and evaluate deletion-efficient
//! k-means models.

mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use args::{AlgoName, DataArgs, ParamArgs};

#[derive(Debug, Parser)]
#[command(name = "delkm", version, about = "Deletion-efficient k-means clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write it to a model file.
    Train {
        /// Algorithm to train.
        #[arg(long, value_enum)]
        algo: AlgoName,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Training seed.
        #[arg(long, env = "DELKM_SEED", default_value_t = 0)]
        seed: u64,
        /// Model file to write.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Delete rows from a trained model and replace the model file.
    Delete {
        /// Model file written by `train` or a previous `delete`.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Row id to delete; repeat for several.
        #[arg(long = "row", value_name = "ID")]
        rows: Vec<usize>,
        /// File with one row id per line, deleted in order after any --row.
        #[arg(long, value_name = "PATH")]
        stream: Option<PathBuf>,
    },
    /// Run the online deletion benchmark and write JSON and CSV reports.
    Bench {
        /// Algorithm to benchmark, or all three.
        #[arg(long, value_enum, default_value = "all")]
        algo: BenchAlgo,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Deletion requests per replicate.
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Deletion indices at which quality is measured, comma separated.
        /// Defaults to 1,10,100,1000 capped at m.
        #[arg(long, value_parser = args::parse_checkpoints)]
        checkpoints: Option<args::Checkpoints>,
        /// Independent replicates, each with its own training seed and stream.
        #[arg(long, default_value_t = delkm::bench::DEFAULT_REPLICATES)]
        replicates: usize,
        /// Rows sampled for the silhouette score.
        #[arg(long, default_value_t = delkm::metrics::DEFAULT_SILHOUETTE_CAP)]
        silhouette_cap: usize,
        /// Root seed for training, deletion streams and quality sampling.
        #[arg(long, env = "DELKM_SEED", default_value_t = 0)]
        seed: u64,
        /// Directory receiving `<algo>.json` and `<algo>.csv`.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        /// Existing baseline JSON report to compute speedups against when the
        /// baseline is not part of this run.
        #[arg(long, value_name = "PATH")]
        baseline_report: Option<PathBuf>,
    },
    /// Write a synthetic dataset as CSV, labels in the last column.
    Gen {
        #[command(flatten)]
        data: DataArgs,
        /// CSV file to write.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Sample a uniform deletion stream, one row id per line.
    Stream {
        #[command(flatten)]
        data: DataArgs,
        /// Number of deletions.
        #[arg(long)]
        m: usize,
        /// Stream seed.
        #[arg(long, env = "DELKM_SEED", default_value_t = 0)]
        seed: u64,
        /// File to write.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Report loss, silhouette and (with labels) NMI of a model.
    Metrics {
        /// Model file to evaluate.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Also report the loss ratio against a converged k-means++/Lloyd run.
        #[arg(long)]
        reference: bool,
        /// Rows sampled for the silhouette score.
        #[arg(long, default_value_t = delkm::metrics::DEFAULT_SILHOUETTE_CAP)]
        silhouette_cap: usize,
        /// Seed for the silhouette subsample and the reference run.
        #[arg(long, env = "DELKM_SEED", default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchAlgo {
    All,
    Baseline,
    Qkmeans,
    Dckmeans,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(delkm::Error),
}

impl From<delkm::Error> for CliError {
    fn from(e: delkm::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use delkm::Error as E;
        match self {
            CliError::Usage(_) | CliError::Lib(E::InvalidParameter(_)) => 1,
            CliError::Lib(E::ReplayDiverged(_)) => 3,
            CliError::Lib(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            algo,
            data,
            params,
            seed,
            out,
        } => commands::train(algo, &data, &params, seed, &out),
        Command::Delete {
            model,
            data,
            rows,
            stream,
        } => commands::delete(&model, &data, &rows, stream.as_deref()),
        Command::Bench {
            algo,
            data,
            params,
            m,
            checkpoints,
            replicates,
            silhouette_cap,
            seed,
            out_dir,
            baseline_report,
        } => {
            let algos = match algo {
                BenchAlgo::All => vec![AlgoName::Baseline, AlgoName::Qkmeans, AlgoName::Dckmeans],
                BenchAlgo::Baseline => vec![AlgoName::Baseline],
                BenchAlgo::Qkmeans => vec![AlgoName::Qkmeans],
                BenchAlgo::Dckmeans => vec![AlgoName::Dckmeans],
            };
            commands::bench(&commands::BenchArgs {
                algos,
                data: &data,
                params: &params,
                m,
                checkpoints: checkpoints.map(|c| c.0),
                replicates,
                silhouette_cap,
                seed,
                out_dir: &out_dir,
                baseline_report: baseline_report.as_deref(),
            })
        }
        Command::Gen { data, out } => commands::gen(&data, &out),
        Command::Stream { data, m, seed, out } => commands::stream(&data, m, seed, &out),
        Command::Metrics {
            model,
            data,
            reference,
            silhouette_cap,
            seed,
        } => commands::metrics(&model, &data, reference, silhouette_cap, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("delkm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
