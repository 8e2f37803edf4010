//! Shared flag groups and their resolution into library inputs.

use std::path::PathBuf;

use clap::{ArgGroup, Args, ValueEnum};
use delkm::bench::{Algorithm, BaselineParams};
use delkm::dataset::{gen_gaussian_mixture, load_csv, minmax_scale};
use delkm::dckmeans::{heuristic_epsilon, heuristic_width};
use delkm::qkmeans::DEFAULT_GAMMA;
use delkm::{DcParams, LabeledDataset64, QkParams};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Synthetic {
    /// Isotropic Gaussian mixture with centers uniform in the unit cube.
    Gaussian,
}

#[derive(Debug, Clone, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).args(["csv", "synthetic"])))]
pub struct DataArgs {
    /// Numeric CSV file; row ids follow file order.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,

    /// The CSV file starts with a header line.
    #[arg(long, requires = "csv")]
    pub header: bool,

    /// Zero-based CSV column holding integer ground-truth labels.
    #[arg(long, value_name = "COL", requires = "csv")]
    pub label_column: Option<usize>,

    /// Generate the dataset instead of reading one.
    #[arg(long, value_enum)]
    pub synthetic: Option<Synthetic>,

    /// Points per mixture component.
    #[arg(long, default_value_t = 4000)]
    pub n_per_cluster: usize,

    /// Dimension of generated points.
    #[arg(long, default_value_t = 25)]
    pub dim: usize,

    /// Number of mixture components.
    #[arg(long, default_value_t = 5)]
    pub clusters: usize,

    /// Per-coordinate variance of each component.
    #[arg(long, default_value_t = 0.8)]
    pub variance: f64,

    /// Seed of the generated dataset.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,

    /// Rescale every dimension onto [0, 1] after loading.
    #[arg(long)]
    pub minmax: bool,
}

impl DataArgs {
    pub fn load(&self) -> Result<LabeledDataset64, CliError> {
        let mut ds = match (&self.csv, self.synthetic) {
            (Some(path), _) => load_csv(path, self.header, self.label_column)?,
            (None, Some(Synthetic::Gaussian)) => {
                gen_gaussian_mixture(self.n_per_cluster, self.dim, self.clusters, self.variance, self.data_seed)?
            }
            (None, None) => return Err(CliError::Usage("one of --csv or --synthetic is required".into())),
        };
        if self.minmax {
            ds.data = minmax_scale(&ds.data)?.0;
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoName {
    Baseline,
    Qkmeans,
    Dckmeans,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,

    /// Lloyd rounds (per sub-problem for dckmeans).
    #[arg(long = "iterations", short = 'T', default_value_t = 10)]
    pub iterations: usize,

    /// Lattice spacing for qkmeans.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Balance ratio for qkmeans.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,

    /// Tree width for dckmeans, rounded to a power of two.
    #[arg(long)]
    pub width: Option<usize>,

    /// Tree height for dckmeans.
    #[arg(long, default_value_t = 1)]
    pub height: usize,

    /// Re-derive the dckmeans width as rows are deleted.
    #[arg(long)]
    pub adaptive_width: bool,

    /// Fill in missing epsilon and width from the dataset shape.
    #[arg(long)]
    pub heuristic: bool,
}

impl ParamArgs {
    /// Explicit values win; `--heuristic` fills the rest. Every resolved
    /// value is echoed on stdout.
    pub fn resolve(&self, algo: AlgoName, n: usize, d: usize) -> Result<Algorithm, CliError> {
        match algo {
            AlgoName::Baseline => Ok(Algorithm::Baseline(BaselineParams {
                k: self.k,
                iterations: self.iterations,
            })),
            AlgoName::Qkmeans => {
                let epsilon = match (self.epsilon, self.heuristic) {
                    (Some(e), _) => e,
                    (None, true) => {
                        let e = heuristic_epsilon(n, self.k, d);
                        println!("heuristic epsilon={e}");
                        e
                    }
                    (None, false) => return Err(CliError::Usage("qkmeans needs --epsilon or --heuristic".into())),
                };
                Ok(Algorithm::Qkmeans(QkParams {
                    gamma: self.gamma,
                    ..QkParams::new(self.k, self.iterations, epsilon)
                }))
            }
            AlgoName::Dckmeans => {
                let width = match (self.width, self.heuristic) {
                    (Some(w), _) => w,
                    (None, true) => {
                        let w = heuristic_width(n);
                        println!("heuristic w={w}");
                        w
                    }
                    (None, false) => return Err(CliError::Usage("dckmeans needs --width or --heuristic".into())),
                };
                Ok(Algorithm::Dckmeans(DcParams {
                    adaptive_width: self.adaptive_width,
                    ..DcParams::new(self.k, self.iterations, width, self.height)
                }))
            }
        }
    }
}

/// Comma-separated deletion indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoints(pub Vec<usize>);

pub fn parse_checkpoints(s: &str) -> Result<Checkpoints, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Checkpoints)
}
