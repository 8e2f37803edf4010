//! Quantized k-means and its deletion operation.
//!
//! Training is Lloyd's algorithm with four changes: every round's centroids
//! are snapped to a freshly phased ε-lattice, clusters smaller than `γn/k` are
//! pulled toward the previous round's centroid, a round is only accepted if it
//! strictly lowers the loss, and every round is memoized. Deleting a point
//! replays the memo with the point removed; if every quantized centroid and
//! every accept/stop decision comes out the same, the model is already what
//! retraining would produce and only the memo is updated.

use serde::{Deserialize, Serialize};

use crate::dataset::{DataMatrix, RowId};
use crate::kmeans::{assign_with_loss, kmeanspp_race, race_pick, sq_dist, CentroidSet, ClusterSums, Seeding};
use crate::quantizer::{sample_phase, LatticeQuantizer};
use crate::rng;
use crate::{Error, Result, Scalar};

pub const DEFAULT_GAMMA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QkParams {
    pub k: usize,
    /// Maximum number of rounds `T`.
    pub iterations: usize,
    /// Balance ratio: clusters below `gamma * n / k` points get momentum.
    pub gamma: f64,
    /// Lattice spacing.
    pub epsilon: f64,
}

impl QkParams {
    pub fn new(k: usize, iterations: usize, epsilon: f64) -> Self {
        Self {
            k,
            iterations,
            gamma: DEFAULT_GAMMA,
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.iterations == 0 {
            return Err(Error::InvalidParameter("k and iterations must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma {} not in (0, 1)", self.gamma)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

/// A cluster found empty during training and re-seeded from `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReinitEvent {
    pub cluster: usize,
    pub row: RowId,
}

/// Memoized state of one training round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QkIterationRecord<S> {
    /// Coordinate sums of the partition the round started from.
    pub source_sums: CentroidSet<S>,
    pub source_sizes: Vec<usize>,
    /// Cluster means after balance correction, before quantization.
    pub analog_centroids: CentroidSet<S>,
    pub theta: Vec<S>,
    pub quantized_centroids: CentroidSet<S>,
    /// Sizes of the partition induced by `quantized_centroids`.
    pub cluster_sizes: Vec<usize>,
    pub loss: S,
    pub previous_loss: S,
    pub accepted: bool,
    pub reinit_events: Vec<ReinitEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QkModel<S> {
    pub params: QkParams,
    pub final_centroids: CentroidSet<S>,
    pub seeds: Seeding<S>,
    pub iterations: Vec<QkIterationRecord<S>>,
    pub accepted_iterations: usize,
    pub training_seed: u64,
    /// Live rows the memo currently describes.
    pub n_live: usize,
    /// Full retrains performed by deletions so far in this model's lineage.
    pub retrains: usize,
}

impl<S: Scalar> QkModel<S> {
    pub fn is_seed_row(&self, row: RowId) -> bool {
        self.seeds.rows.contains(&row)
    }

    pub fn is_reinit_row(&self, row: RowId) -> bool {
        self.iterations
            .iter()
            .flat_map(|r| &r.reinit_events)
            .any(|e| e.row == row)
    }

    fn lattice(&self, round: usize) -> Result<LatticeQuantizer<S>> {
        LatticeQuantizer::new(S::of(self.params.epsilon), self.iterations[round].theta.clone())
    }
}

/// Convex balance correction.
///
/// A cluster with `|π| < t = γn/k` is replaced by
/// `(|π|·c + (t − |π|)·c_prev) / t`; other clusters are returned unchanged.
pub fn gamma_correct<S: Scalar>(
    centroids: &CentroidSet<S>,
    previous: &CentroidSet<S>,
    sizes: &[usize],
    gamma: f64,
    n_live: usize,
    k: usize,
) -> CentroidSet<S> {
    gamma_correct_masked(centroids, previous, sizes, gamma, n_live, k, &[])
}

fn gamma_correct_masked<S: Scalar>(
    centroids: &CentroidSet<S>,
    previous: &CentroidSet<S>,
    sizes: &[usize],
    gamma: f64,
    n_live: usize,
    k: usize,
    skip: &[usize],
) -> CentroidSet<S> {
    let threshold = S::of(gamma) * S::of_usize(n_live) / S::of_usize(k);
    let mut out = centroids.clone();
    for (i, &size) in sizes.iter().enumerate() {
        let size = S::of_usize(size);
        if size >= threshold || skip.contains(&i) {
            continue;
        }
        let momentum = threshold - size;
        for ((o, &c), &p) in out
            .centroid_mut(i)
            .iter_mut()
            .zip(centroids.centroid(i))
            .zip(previous.centroid(i))
        {
            *o = (size * c + momentum * p) / threshold;
        }
    }
    out
}

/// Where training gets its random choices from.
trait Draws<S: Scalar> {
    fn seeds(&mut self, data: &DataMatrix<S>, k: usize) -> Result<Seeding<S>>;
    fn phase(&mut self, round: usize, d: usize) -> Result<Vec<S>>;
    /// Row to re-seed empty `cluster` from; `anchors` are the centroids of the
    /// clusters listed in `present`.
    fn reinit(
        &mut self,
        round: usize,
        cluster: usize,
        data: &DataMatrix<S>,
        anchors: &CentroidSet<S>,
        present: &[usize],
    ) -> Result<RowId>;
}

const SEED_TAG: u64 = 1;
const PHASE_TAG: u64 = 2;
const REINIT_TAG: u64 = 3;

/// Draws keyed by the training seed and by row id rather than by position in
/// a stream. A run on the data minus one row therefore makes the same choices
/// as the run on the full data wherever that row did not win a draw.
struct KeyedDraws(u64);

impl<S: Scalar> Draws<S> for KeyedDraws {
    fn seeds(&mut self, data: &DataMatrix<S>, k: usize) -> Result<Seeding<S>> {
        kmeanspp_race(data, k, rng::derive_seed(self.0, SEED_TAG))
    }

    fn phase(&mut self, round: usize, d: usize) -> Result<Vec<S>> {
        let key = rng::derive_seed(self.0, PHASE_TAG);
        Ok(sample_phase(d, &mut rng::derive_stream(key, round as u64)))
    }

    fn reinit(
        &mut self,
        round: usize,
        cluster: usize,
        data: &DataMatrix<S>,
        anchors: &CentroidSet<S>,
        present: &[usize],
    ) -> Result<RowId> {
        // One k-means++ step against the surviving centroids.
        let key = rng::derive_seed(rng::derive_seed(rng::derive_seed(self.0, REINIT_TAG), round as u64), cluster as u64);
        let weighted = data.live_rows().map(|(id, p)| {
            let w = present
                .iter()
                .map(|&c| sq_dist(p, anchors.centroid(c)))
                .fold(S::infinity(), S::min);
            (id, if w.is_finite() { w.as_f64() } else { 0.0 })
        });
        race_pick(key, weighted)
            .or_else(|| race_pick(key, data.live_ids().map(|id| (id, 1.0))))
            .ok_or(Error::EmptyInput)
    }
}

/// Replays the random choices recorded in a model.
struct RecordedDraws<'a, S>(&'a QkModel<S>);

impl<S: Scalar> Draws<S> for RecordedDraws<'_, S> {
    fn seeds(&mut self, data: &DataMatrix<S>, k: usize) -> Result<Seeding<S>> {
        let rows = self.0.seeds.rows.clone();
        if rows.len() != k {
            return Err(Error::ReplayDiverged(format!("recorded {} seeds, need {k}", rows.len())));
        }
        let mut values = Vec::with_capacity(k * data.dim());
        for &r in &rows {
            values.extend_from_slice(data.live_point(r)?);
        }
        Ok(Seeding {
            centroids: CentroidSet::from_flat(data.dim(), values)?,
            rows,
        })
    }

    fn phase(&mut self, round: usize, _d: usize) -> Result<Vec<S>> {
        self.0
            .iterations
            .get(round)
            .map(|r| r.theta.clone())
            .ok_or_else(|| Error::ReplayDiverged(format!("no recorded phase for round {round}")))
    }

    fn reinit(
        &mut self,
        round: usize,
        cluster: usize,
        _data: &DataMatrix<S>,
        _anchors: &CentroidSet<S>,
        _present: &[usize],
    ) -> Result<RowId> {
        self.0
            .iterations
            .get(round)
            .and_then(|r| r.reinit_events.iter().find(|e| e.cluster == cluster))
            .map(|e| e.row)
            .ok_or_else(|| Error::ReplayDiverged(format!("cluster {cluster} empty in round {round}")))
    }
}

fn train_with<S: Scalar>(
    data: &DataMatrix<S>,
    params: QkParams,
    draws: &mut impl Draws<S>,
    training_seed: u64,
) -> Result<QkModel<S>> {
    params.validate()?;
    let k = params.k;
    let n = data.live_count();
    if n < k {
        return Err(Error::TooFewRows { needed: k, live: n });
    }
    let seeds = draws.seeds(data, k)?;
    let mut current = seeds.centroids.clone();
    let (mut partition, mut loss) = assign_with_loss(data, &current);
    let mut records = Vec::with_capacity(params.iterations);
    let mut accepted_iterations = 0;

    for round in 0..params.iterations {
        let stats = ClusterSums::of(data, &partition, k);
        let (mut means, empty) = stats.means();
        let mut present: Vec<usize> = (0..k).filter(|c| !empty.contains(c)).collect();
        let mut reinit_events = Vec::new();
        for &cluster in &empty {
            let row = draws.reinit(round, cluster, data, &means, &present)?;
            means.centroid_mut(cluster).copy_from_slice(data.live_point(row)?);
            present.push(cluster);
            reinit_events.push(ReinitEvent { cluster, row });
        }
        let analog = gamma_correct_masked(&means, &current, &stats.sizes, params.gamma, n, k, &empty);
        let lattice = LatticeQuantizer::new(S::of(params.epsilon), draws.phase(round, data.dim())?)?;
        let mut quantized = analog.clone();
        for i in 0..k {
            lattice.quantize_in_place(quantized.centroid_mut(i));
        }
        let (next_partition, next_loss) = assign_with_loss(data, &quantized);
        let accepted = next_loss < loss;
        records.push(QkIterationRecord {
            source_sums: stats.sums,
            source_sizes: stats.sizes,
            analog_centroids: analog,
            theta: lattice.theta().to_vec(),
            quantized_centroids: quantized.clone(),
            cluster_sizes: next_partition.sizes().to_vec(),
            loss: next_loss,
            previous_loss: loss,
            accepted,
            reinit_events,
        });
        if !accepted {
            break;
        }
        current = quantized;
        partition = next_partition;
        loss = next_loss;
        accepted_iterations += 1;
    }

    Ok(QkModel {
        params,
        final_centroids: current,
        seeds,
        iterations: records,
        accepted_iterations,
        training_seed,
        n_live: n,
        retrains: 0,
    })
}

/// Trains Q-k-means with all randomness derived from `seed`.
pub fn qkmeans_train<S: Scalar>(data: &DataMatrix<S>, params: QkParams, seed: u64) -> Result<QkModel<S>> {
    train_with(data, params, &mut KeyedDraws(seed), seed)
}

/// Retrains from scratch on `data` reusing the seed rows, lattice phases and
/// re-seeding rows recorded in `model`.
///
/// After a stable deletion this must reproduce the model's centroids exactly;
/// it fails with [`Error::ReplayDiverged`] if the run needs a random choice the
/// model never made.
pub fn qkmeans_replay<S: Scalar>(data: &DataMatrix<S>, model: &QkModel<S>) -> Result<QkModel<S>> {
    train_with(data, model.params, &mut RecordedDraws(model), model.training_seed)
}

/// Why a deletion fell back to retraining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RetrainCause {
    /// The point was a k-means++ seed.
    SeedPoint,
    /// The point re-seeded an empty cluster.
    ReinitPoint,
    /// Removing the point would empty its cluster in this round.
    SingletonCluster { round: usize },
    /// A quantized centroid of this round would change.
    CentroidMoved { round: usize },
    /// The accept/stop decision of this round would change or is too close to call.
    LossGate { round: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QkDeletion {
    pub retrained: bool,
    pub cause: Option<RetrainCause>,
}

/// Tolerance-aware `loss < previous`. `None` when the two are too close for
/// a from-scratch run to be guaranteed the same answer.
fn gate<S: Scalar>(loss: S, previous: S, same_centroids: bool) -> Option<bool> {
    if same_centroids {
        return Some(false);
    }
    let tol = S::epsilon().sqrt() * (loss.abs() + previous.abs());
    if (loss - previous).abs() <= tol {
        None
    } else {
        Some(loss < previous)
    }
}

/// Memo updated for the removal of `p`, or the reason it cannot be.
fn verify_stability<S: Scalar>(
    model: &QkModel<S>,
    row: RowId,
    p: &[S],
) -> Result<std::result::Result<Vec<QkIterationRecord<S>>, RetrainCause>> {
    if model.is_seed_row(row) {
        return Ok(Err(RetrainCause::SeedPoint));
    }
    if model.is_reinit_row(row) {
        return Ok(Err(RetrainCause::ReinitPoint));
    }
    let k = model.params.k;
    let n = model.n_live - 1;
    let mut updated = model.iterations.clone();
    for round in 0..updated.len() {
        let source = match round {
            0 => &model.seeds.centroids,
            r => &model.iterations[r - 1].quantized_centroids,
        };
        let (cluster, source_dist) = source.nearest(p);
        let rec = &mut updated[round];
        if rec.source_sizes[cluster] <= 1 {
            return Ok(Err(RetrainCause::SingletonCluster { round }));
        }
        rec.source_sizes[cluster] -= 1;
        for (s, &v) in rec.source_sums.centroid_mut(cluster).iter_mut().zip(p) {
            *s = *s - v;
        }
        let reseeded: Vec<usize> = rec.reinit_events.iter().map(|e| e.cluster).collect();
        let (mut means, _) = ClusterSums {
            sums: rec.source_sums.clone(),
            sizes: rec.source_sizes.clone(),
        }
        .means();
        for &c in &reseeded {
            means
                .centroid_mut(c)
                .copy_from_slice(rec.analog_centroids.centroid(c));
        }
        let analog = gamma_correct_masked(&means, source, &rec.source_sizes, model.params.gamma, n, k, &reseeded);
        let lattice = model.lattice(round)?;
        let mut quantized = analog.clone();
        for i in 0..k {
            lattice.quantize_in_place(quantized.centroid_mut(i));
        }
        if !quantized.bit_eq(&rec.quantized_centroids) {
            return Ok(Err(RetrainCause::CentroidMoved { round }));
        }
        let (landing, dist) = quantized.nearest(p);
        let loss = rec.loss - dist;
        let previous = rec.previous_loss - source_dist;
        if gate(loss, previous, quantized.bit_eq(source)) != Some(rec.accepted) {
            return Ok(Err(RetrainCause::LossGate { round }));
        }
        rec.analog_centroids = analog;
        rec.loss = loss;
        rec.previous_loss = previous;
        rec.cluster_sizes[landing] -= 1;
    }
    Ok(Ok(updated))
}

/// Deletes `row` from `data` and brings `model` in line with it.
///
/// The memoized rounds are re-run with the point's contribution removed. If
/// nothing observable changes the model keeps its centroids bit-for-bit;
/// otherwise it is retrained from scratch on the remaining rows with the same
/// training seed. Either way the result is what training on the remaining rows
/// with that seed produces, so the deleted model is distributed exactly like a
/// fresh model. Retraining with new randomness instead would bias the output
/// against the draws that happened to be unstable.
pub fn qkmeans_delete<S: Scalar>(model: &mut QkModel<S>, data: &mut DataMatrix<S>, row: RowId) -> Result<QkDeletion> {
    if model.n_live != data.live_count() {
        return Err(Error::ModelMismatch(format!(
            "model describes {} live rows, dataset has {}",
            model.n_live,
            data.live_count()
        )));
    }
    let p = data.live_point(row)?.to_vec();
    match verify_stability(model, row, &p)? {
        Ok(records) => {
            data.delete_row(row)?;
            model.iterations = records;
            model.n_live -= 1;
            Ok(QkDeletion {
                retrained: false,
                cause: None,
            })
        }
        Err(cause) => {
            data.delete_row(row)?;
            let retrains = model.retrains + 1;
            *model = qkmeans_train(data, model.params, model.training_seed)?;
            model.retrains = retrains;
            Ok(QkDeletion {
                retrained: true,
                cause: Some(cause),
            })
        }
    }
}
