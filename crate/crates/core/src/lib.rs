//! Deletion-efficient k-means clustering.
//!
//! Two k-means variants whose trained models can forget individual training
//! points far faster than retraining from scratch, plus the baseline they are
//! measured against:
//!
//! * [`qkmeans`]: Lloyd iterations whose centroids are snapped to a randomly
//!   shifted ε-lattice each round. Training memoizes every round so a deletion
//!   can be checked for stability in `O(kTd)` and only falls back to a full
//!   retrain when a quantized centroid would move.
//! * [`dckmeans`]: points are scattered uniformly over the leaves of a `w`-ary
//!   tree, every leaf is clustered independently and parents cluster their
//!   children's centroids. A deletion retrains one leaf-to-root path.
//! * [`kmeans`]: k-means++ seeding and Lloyd's algorithm, the shared primitives
//!   and the retrain-from-scratch baseline.
//!
//! [`bench`] drives the online deletion benchmark (train once, serve a stream
//! of deletion requests, amortize the wall-clock time) and the distributional
//! deletion-equality test. [`metrics`] holds the clustering quality measures.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below are the instantiations the benchmark and CLI use.

pub mod bench;
pub mod dataset;
pub mod dckmeans;
mod error;
pub mod kmeans;
pub mod metrics;
pub mod persist;
pub mod qkmeans;
pub mod quantizer;
pub mod rng;
mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use dataset::{DataMatrix, DeletionStream, LabeledDataset, RowId, ScaleParams};
pub use dckmeans::{DcModel, DcParams};
pub use kmeans::{Assignment, CentroidSet};
pub use qkmeans::{QkModel, QkParams};
pub use quantizer::LatticeQuantizer;

pub type DataMatrix64 = DataMatrix<f64>;
pub type DataMatrix32 = DataMatrix<f32>;
pub type LabeledDataset64 = LabeledDataset<f64>;
pub type CentroidSet64 = CentroidSet<f64>;
pub type CentroidSet32 = CentroidSet<f32>;
pub type LatticeQuantizer64 = LatticeQuantizer<f64>;
pub type QkModel64 = QkModel<f64>;
pub type QkModel32 = QkModel<f32>;
pub type DcModel64 = DcModel<f64>;
pub type DcModel32 = DcModel<f32>;
