//! Point storage with stable row identities, CSV ingestion, min-max scaling,
//! synthetic Gaussian mixtures and deletion-stream generation.
//!
//! Row ids are assigned once, in input order, and never reused. Deleting a
//! row only flips a tombstone, so ids recorded in models and deletion streams
//! stay meaningful for the lifetime of the matrix.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng;
use crate::{Error, Result, Scalar};

/// Stable identifier of a row in a [`DataMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowId(pub usize);

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<S> {
    dim: usize,
    values: Vec<S>,
    deleted: Vec<bool>,
    live: usize,
}

impl<S: Scalar> DataMatrix<S> {
    /// Builds a matrix from row vectors; ids are `0..rows.len()`.
    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Ragged {
                    row: i,
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(dim, values)
    }

    /// Builds a matrix from row-major values.
    pub fn from_flat(dim: usize, values: Vec<S>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::Ragged {
                row: values.len() / dim,
                expected: dim,
                found: values.len() % dim,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                column: pos % dim,
            });
        }
        let n = values.len() / dim;
        Ok(Self {
            dim,
            values,
            deleted: vec![false; n],
            live: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rows ever stored, live or deleted.
    pub fn n_rows(&self) -> usize {
        self.deleted.len()
    }

    pub fn live_count(&self) -> usize {
        self.live
    }

    pub fn is_live(&self, id: RowId) -> bool {
        self.deleted.get(id.0).is_some_and(|d| !d)
    }

    /// The stored point for `id`, whether or not it has been deleted.
    pub fn point(&self, id: RowId) -> Result<&[S]> {
        if id.0 >= self.n_rows() {
            return Err(Error::UnknownRow(id));
        }
        Ok(&self.values[id.0 * self.dim..(id.0 + 1) * self.dim])
    }

    /// The point for a live row.
    pub fn live_point(&self, id: RowId) -> Result<&[S]> {
        let p = self.point(id)?;
        if self.deleted[id.0] {
            return Err(Error::AlreadyDeleted(id));
        }
        Ok(p)
    }

    pub(crate) fn row_slice(&self, index: usize) -> &[S] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    pub fn live_ids(&self) -> impl Iterator<Item = RowId> + '_ {
        self.deleted
            .iter()
            .enumerate()
            .filter(|(_, d)| !**d)
            .map(|(i, _)| RowId(i))
    }

    pub fn live_rows(&self) -> impl Iterator<Item = (RowId, &[S])> + '_ {
        self.values
            .chunks_exact(self.dim)
            .zip(&self.deleted)
            .enumerate()
            .filter(|(_, (_, d))| !**d)
            .map(|(i, (p, _))| (RowId(i), p))
    }

    /// Marks `id` deleted in O(1).
    pub fn delete_row(&mut self, id: RowId) -> Result<()> {
        match self.deleted.get_mut(id.0) {
            None => Err(Error::UnknownRow(id)),
            Some(true) => Err(Error::AlreadyDeleted(id)),
            Some(flag) => {
                *flag = true;
                self.live -= 1;
                Ok(())
            }
        }
    }

    /// Copy of the matrix with `id` deleted.
    pub fn without(&self, id: RowId) -> Result<Self> {
        let mut out = self.clone();
        out.delete_row(id)?;
        Ok(out)
    }

    /// New matrix holding only the live rows, renumbered from zero.
    pub fn compacted(&self) -> Self {
        let values = self.live_rows().flat_map(|(_, p)| p.iter().copied()).collect();
        Self {
            dim: self.dim,
            values,
            deleted: vec![false; self.live],
            live: self.live,
        }
    }

    /// SHA-256 over the dimension, the live row ids and their coordinates.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for (id, p) in self.live_rows() {
            h.update((id.0 as u64).to_le_bytes());
            for v in p {
                h.update(v.bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-dimension bounds used by [`minmax_scale`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams<S> {
    pub min: Vec<S>,
    pub max: Vec<S>,
}

/// A data matrix with optional ground-truth labels indexed by row id.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<S> {
    pub data: DataMatrix<S>,
    pub labels: Option<Vec<i64>>,
}

impl<S: Scalar> LabeledDataset<S> {
    pub fn label(&self, id: RowId) -> Option<i64> {
        self.labels.as_ref().and_then(|l| l.get(id.0).copied())
    }
}

/// Reads a numeric CSV file. Row ids follow file order.
pub fn load_csv<S: Scalar>(
    path: impl AsRef<Path>,
    has_header: bool,
    label_column: Option<usize>,
) -> Result<LabeledDataset<S>> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), has_header, label_column)
}

pub fn read_csv<S: Scalar>(
    reader: impl std::io::Read,
    has_header: bool,
    label_column: Option<usize>,
) -> Result<LabeledDataset<S>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut width = None;
    let mut values = Vec::new();
    let mut labels = label_column.map(|_| Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Ragged {
                row,
                expected,
                found: record.len(),
            });
        }
        for (column, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, column });
            }
            if Some(column) == label_column {
                if v.fract() != 0.0 {
                    return Err(Error::Parse {
                        row,
                        column,
                        message: format!("label is not an integer: {field:?}"),
                    });
                }
                if let Some(l) = labels.as_mut() {
                    l.push(v as i64);
                }
            } else {
                values.push(S::of(v));
            }
        }
    }
    let width = width.ok_or(Error::EmptyDataset)?;
    let dim = match label_column {
        Some(c) if c >= width => {
            return Err(Error::InvalidParameter(format!(
                "label column {c} out of range for {width} columns"
            )))
        }
        Some(_) => width - 1,
        None => width,
    };
    Ok(LabeledDataset {
        data: DataMatrix::from_flat(dim, values)?,
        labels,
    })
}

/// Writes points (and labels, as the last column) as headerless CSV.
pub fn write_csv<S: Scalar>(dataset: &LabeledDataset<S>, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (id, p) in dataset.data.live_rows() {
        let mut fields: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        if let Some(l) = dataset.label(id) {
            fields.push(l.to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Maps every dimension affinely onto `[0, 1]` using the live rows' range.
/// Constant dimensions map to 0.
pub fn minmax_scale<S: Scalar>(data: &DataMatrix<S>) -> Result<(DataMatrix<S>, ScaleParams<S>)> {
    if data.live_count() == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = data.dim();
    let mut min = vec![S::infinity(); d];
    let mut max = vec![S::neg_infinity(); d];
    for (_, p) in data.live_rows() {
        for j in 0..d {
            min[j] = min[j].min(p[j]);
            max[j] = max[j].max(p[j]);
        }
    }
    let mut out = data.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        let j = i % d;
        let range = max[j] - min[j];
        *v = if range > S::zero() {
            (*v - min[j]) / range
        } else {
            S::zero()
        };
    }
    Ok((out, ScaleParams { min, max }))
}

/// Isotropic Gaussian mixture with centers uniform in the unit hypercube.
///
/// Rows are grouped by cluster (all of cluster 0 first). Normal variates come
/// from the ziggurat sampler of `rand_distr::StandardNormal`, scaled by
/// `sqrt(variance)`, driven by a ChaCha8 stream seeded with `seed`.
pub fn gen_gaussian_mixture<S: Scalar>(
    n_per_cluster: usize,
    d: usize,
    k: usize,
    variance: f64,
    seed: u64,
) -> Result<LabeledDataset<S>> {
    if n_per_cluster == 0 || d == 0 || k == 0 {
        return Err(Error::InvalidParameter(
            "cluster size, dimension and cluster count must be positive".into(),
        ));
    }
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::InvalidParameter(format!("variance {variance} must be non-negative")));
    }
    let mut rng = rng::stream(seed);
    let centers: Vec<f64> = (0..k * d).map(|_| rng.random::<f64>()).collect();
    let sd = variance.sqrt();
    let mut values = Vec::with_capacity(n_per_cluster * k * d);
    let mut labels = Vec::with_capacity(n_per_cluster * k);
    for (c, center) in centers.chunks_exact(d).enumerate() {
        for _ in 0..n_per_cluster {
            for &mu in center {
                let z: f64 = rng.sample(StandardNormal);
                values.push(S::of(mu + sd * z));
            }
            labels.push(c as i64);
        }
    }
    Ok(LabeledDataset {
        data: DataMatrix::from_flat(d, values)?,
        labels: Some(labels),
    })
}

/// An ordered sequence of distinct row ids to delete.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionStream {
    pub ids: Vec<RowId>,
    pub seed: u64,
}

impl DeletionStream {
    /// One row id per line.
    pub fn write_lines(&self, mut out: impl Write) -> Result<()> {
        for id in &self.ids {
            writeln!(out, "{id}")?;
        }
        Ok(())
    }

    pub fn read_lines(input: impl BufRead, seed: u64) -> Result<Self> {
        let mut ids = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (row, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let id = RowId(line.parse().map_err(|_| Error::Parse {
                row,
                column: 0,
                message: format!("not a row id: {line:?}"),
            })?);
            if !seen.insert(id) {
                return Err(Error::InvalidParameter(format!("row id {id} repeated in stream")));
            }
            ids.push(id);
        }
        Ok(Self { ids, seed })
    }
}

/// Samples `m` deletions; the j-th is uniform over rows still live after the
/// first j-1 removals.
pub fn gen_deletion_stream<S: Scalar>(data: &DataMatrix<S>, m: usize, seed: u64) -> Result<DeletionStream> {
    if m > data.live_count() {
        return Err(Error::TooFewRows {
            needed: m,
            live: data.live_count(),
        });
    }
    let mut rng = rng::stream(seed);
    let mut pool: Vec<RowId> = data.live_ids().collect();
    let ids = (0..m)
        .map(|_| {
            let i = rng.random_range(0..pool.len());
            pool.swap_remove(i)
        })
        .collect();
    Ok(DeletionStream { ids, seed })
}
