//! k-means++ seeding, nearest-centroid assignment, cluster means, loss and
//! Lloyd's algorithm.
//!
//! Distances are full squared Euclidean distances. Nearest-centroid ties go
//! to the lowest cluster index so every routine is a deterministic function of
//! its inputs and the passed random stream.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataMatrix, RowId};
use crate::{Error, Result, Scalar};

/// `k` centroids of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidSet<S> {
    dim: usize,
    values: Vec<S>,
}

impl<S: Scalar> CentroidSet<S> {
    pub fn from_flat(dim: usize, values: Vec<S>) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form centroids of dimension {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Self::from_flat(dim, rows.concat())
    }

    pub(crate) fn zeros(k: usize, dim: usize) -> Self {
        Self {
            dim,
            values: vec![S::zero(); k * dim],
        }
    }

    pub fn k(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, i: usize) -> &[S] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn centroid_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[S]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[S] {
        &self.values
    }

    /// Index of and squared distance to the nearest centroid (lowest index on ties).
    pub fn nearest(&self, p: &[S]) -> (usize, S) {
        let mut best = (0, S::infinity());
        for (i, c) in self.iter().enumerate() {
            let d = sq_dist(p, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Bitwise equality of every coordinate.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a.bits() == b.bits())
    }

    /// One centroid per CSV row.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for c in self.iter() {
            w.write_record(c.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sq_dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| {
        let t = x - y;
        acc + t * t
    })
}

fn check_dim<S: Scalar>(data: &DataMatrix<S>, c: &CentroidSet<S>) -> Result<()> {
    if data.dim() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: c.dim(),
        });
    }
    Ok(())
}

/// Cluster label for every stored row (`None` for deleted rows) plus sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    labels: Vec<Option<u32>>,
    sizes: Vec<usize>,
}

impl Assignment {
    pub fn get(&self, id: RowId) -> Option<usize> {
        self.labels.get(id.0).copied().flatten().map(|l| l as usize)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    /// `(row, cluster)` for every live row in id order.
    pub fn iter(&self) -> impl Iterator<Item = (RowId, usize)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (RowId(i), l as usize)))
    }

    /// Build from explicit labels of live rows.
    pub fn from_labels(n_rows: usize, k: usize, labels: impl IntoIterator<Item = (RowId, usize)>) -> Result<Self> {
        let mut out = Self {
            labels: vec![None; n_rows],
            sizes: vec![0; k],
        };
        for (id, l) in labels {
            if id.0 >= n_rows {
                return Err(Error::UnknownRow(id));
            }
            if l >= k {
                return Err(Error::InvalidParameter(format!("label {l} out of range for k={k}")));
            }
            out.labels[id.0] = Some(l as u32);
            out.sizes[l] += 1;
        }
        Ok(out)
    }
}

/// Assigns each live point to its nearest centroid.
pub fn assign<S: Scalar>(data: &DataMatrix<S>, c: &CentroidSet<S>) -> Result<Assignment> {
    check_dim(data, c)?;
    Ok(assign_with_loss(data, c).0)
}

/// Assignment and total squared distance in one pass.
pub(crate) fn assign_with_loss<S: Scalar>(data: &DataMatrix<S>, c: &CentroidSet<S>) -> (Assignment, S) {
    let mut labels = vec![None; data.n_rows()];
    let mut sizes = vec![0; c.k()];
    let mut loss = S::zero();
    for (id, p) in data.live_rows() {
        let (l, d) = c.nearest(p);
        labels[id.0] = Some(l as u32);
        sizes[l] += 1;
        loss = loss + d;
    }
    (Assignment { labels, sizes }, loss)
}

/// Per-cluster coordinate sums and sizes of an assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSums<S> {
    pub sums: CentroidSet<S>,
    pub sizes: Vec<usize>,
}

impl<S: Scalar> ClusterSums<S> {
    pub fn of(data: &DataMatrix<S>, a: &Assignment, k: usize) -> Self {
        let mut sums = CentroidSet::zeros(k, data.dim());
        let mut sizes = vec![0; k];
        for (id, l) in a.iter() {
            let p = data.row_slice(id.0);
            for (s, &v) in sums.centroid_mut(l).iter_mut().zip(p) {
                *s = *s + v;
            }
            sizes[l] += 1;
        }
        Self { sums, sizes }
    }

    /// Means of the non-empty clusters; empty clusters are left at zero and
    /// listed in the second component.
    pub fn means(&self) -> (CentroidSet<S>, Vec<usize>) {
        let k = self.sizes.len();
        let mut means = CentroidSet::zeros(k, self.sums.dim());
        let mut empty = Vec::new();
        for (i, &n) in self.sizes.iter().enumerate() {
            if n == 0 {
                empty.push(i);
                continue;
            }
            let count = S::of_usize(n);
            for (m, &s) in means.centroid_mut(i).iter_mut().zip(self.sums.centroid(i)) {
                *m = s / count;
            }
        }
        (means, empty)
    }
}

/// Cluster means under `a`. Empty clusters are reported in the second
/// component and hold zeros in the returned set.
pub fn centroids_of<S: Scalar>(data: &DataMatrix<S>, a: &Assignment, k: usize) -> Result<(CentroidSet<S>, Vec<usize>)> {
    if a.labels.len() != data.n_rows() || a.k() != k {
        return Err(Error::ModelMismatch("assignment does not match dataset".into()));
    }
    Ok(ClusterSums::of(data, a, k).means())
}

/// Sum over live points of the squared distance to the nearest centroid.
pub fn kmeans_loss<S: Scalar>(data: &DataMatrix<S>, c: &CentroidSet<S>) -> Result<S> {
    check_dim(data, c)?;
    Ok(data.live_rows().fold(S::zero(), |acc, (_, p)| acc + c.nearest(p).1))
}

/// k-means++ seeds together with the rows they were taken from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeding<S> {
    pub centroids: CentroidSet<S>,
    pub rows: Vec<RowId>,
}

/// k-means++ initialization.
///
/// The first seed is uniform over live rows; each further seed is drawn with
/// probability proportional to its squared distance to the closest seed so
/// far. If every remaining weight is zero (all unchosen points duplicate a
/// seed) the draw falls back to uniform over the unchosen live rows.
pub fn kmeanspp_init<S: Scalar, R: Rng + ?Sized>(data: &DataMatrix<S>, k: usize, rng: &mut R) -> Result<Seeding<S>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if data.live_count() < k {
        return Err(Error::TooFewRows {
            needed: k,
            live: data.live_count(),
        });
    }
    let ids: Vec<RowId> = data.live_ids().collect();
    let mut chosen = vec![false; ids.len()];
    let mut picks = Vec::with_capacity(k);
    let first = rng.random_range(0..ids.len());
    chosen[first] = true;
    picks.push(first);

    let mut weight: Vec<S> = ids
        .iter()
        .map(|id| sq_dist(data.row_slice(id.0), data.row_slice(ids[first].0)))
        .collect();
    while picks.len() < k {
        let total: S = weight.iter().copied().sum();
        let pick = if total > S::zero() {
            let threshold = S::of(rng.random::<f64>()) * total;
            let mut acc = S::zero();
            let mut pick = None;
            for (i, &w) in weight.iter().enumerate() {
                acc = acc + w;
                if acc > threshold {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the threshold above the running sum.
            pick.unwrap_or_else(|| weight.iter().rposition(|&w| w > S::zero()).unwrap())
        } else {
            let free: Vec<usize> = (0..ids.len()).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        picks.push(pick);
        let c = data.row_slice(ids[pick].0);
        for (w, id) in weight.iter_mut().zip(&ids) {
            let d = sq_dist(data.row_slice(id.0), c);
            if d < *w {
                *w = d;
            }
        }
    }
    let rows: Vec<RowId> = picks.iter().map(|&i| ids[i]).collect();
    let values = rows.iter().flat_map(|r| data.row_slice(r.0).iter().copied()).collect();
    Ok(Seeding {
        centroids: CentroidSet::from_flat(data.dim(), values)?,
        rows,
    })
}

/// Exponential clock of `row` in the race identified by `key`.
fn clock(key: u64, row: RowId) -> f64 {
    let bits = crate::rng::derive_seed(key, row.0 as u64) >> 11;
    let u = (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    -u.ln()
}

/// Weighted draw by exponential race: every candidate with positive weight
/// gets an independent clock `E / w` and the smallest clock wins, which picks
/// a row with probability proportional to its weight.
///
/// Clocks depend only on `key` and the row id, so removing a candidate that
/// did not win leaves the winner unchanged.
pub fn race_pick(key: u64, candidates: impl IntoIterator<Item = (RowId, f64)>) -> Option<RowId> {
    let mut best: Option<(f64, RowId)> = None;
    for (row, w) in candidates {
        if !(w > 0.0) {
            continue;
        }
        let t = clock(key, row) / w;
        if best.is_none_or(|(b, _)| t < b) {
            best = Some((t, row));
        }
    }
    best.map(|(_, row)| row)
}

/// k-means++ initialization driven by [`race_pick`] with one race per seed.
///
/// Same distribution as [`kmeanspp_init`]. Because each race is keyed by the
/// row ids, rerunning on the data minus a row that was not picked returns the
/// same seeds.
pub fn kmeanspp_race<S: Scalar>(data: &DataMatrix<S>, k: usize, key: u64) -> Result<Seeding<S>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if data.live_count() < k {
        return Err(Error::TooFewRows {
            needed: k,
            live: data.live_count(),
        });
    }
    let ids: Vec<RowId> = data.live_ids().collect();
    let mut weight: Vec<f64> = vec![1.0; ids.len()];
    let mut rows = Vec::with_capacity(k);
    for step in 0..k {
        let race = crate::rng::derive_seed(key, step as u64);
        let pick = race_pick(race, ids.iter().copied().zip(weight.iter().copied())).unwrap_or_else(|| {
            // Every unchosen row duplicates a seed: uniform over them.
            race_pick(race, ids.iter().filter(|id| !rows.contains(*id)).map(|&id| (id, 1.0))).unwrap()
        });
        rows.push(pick);
        let c = data.row_slice(pick.0);
        for (w, id) in weight.iter_mut().zip(&ids) {
            let d = if rows.contains(id) { 0.0 } else { sq_dist(data.row_slice(id.0), c).as_f64() };
            if step == 0 || d < *w {
                *w = d;
            }
        }
    }
    let values = rows.iter().flat_map(|r| data.row_slice(r.0).iter().copied()).collect();
    Ok(Seeding {
        centroids: CentroidSet::from_flat(data.dim(), values)?,
        rows,
    })
}

/// Result of [`lloyd`].
#[derive(Debug, Clone, PartialEq)]
pub struct LloydFit<S> {
    pub centroids: CentroidSet<S>,
    pub assignment: Assignment,
    pub seeds: Seeding<S>,
    /// Loss of the seeding followed by the loss after each completed round.
    pub losses: Vec<S>,
}

impl<S: Scalar> LloydFit<S> {
    pub fn loss(&self) -> S {
        *self.losses.last().expect("at least the seeding loss")
    }

    pub fn rounds(&self) -> usize {
        self.losses.len() - 1
    }
}

/// k-means++ seeding followed by at most `max_iter` Lloyd rounds. Stops early
/// once the assignment no longer changes. An empty cluster keeps its previous
/// centroid.
pub fn lloyd<S: Scalar, R: Rng + ?Sized>(data: &DataMatrix<S>, k: usize, max_iter: usize, rng: &mut R) -> Result<LloydFit<S>> {
    let seeds = kmeanspp_init(data, k, rng)?;
    let mut centroids = seeds.centroids.clone();
    let (mut assignment, loss) = assign_with_loss(data, &centroids);
    let mut losses = vec![loss];
    for _ in 0..max_iter {
        let (mut next, empty) = ClusterSums::of(data, &assignment, k).means();
        for i in empty {
            next.centroid_mut(i).copy_from_slice(centroids.centroid(i));
        }
        let (next_assignment, loss) = assign_with_loss(data, &next);
        centroids = next;
        losses.push(loss);
        let converged = next_assignment == assignment;
        assignment = next_assignment;
        if converged {
            break;
        }
    }
    Ok(LloydFit {
        centroids,
        assignment,
        seeds,
        losses,
    })
}
