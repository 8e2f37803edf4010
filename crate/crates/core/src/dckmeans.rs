//! Divide-and-conquer k-means on a `w`-ary tree of height `h`.
//!
//! Rows are scattered uniformly over the `w^h` leaves. Every leaf runs
//! k-means++ and Lloyd on its rows; every internal node runs the same solver
//! on the concatenated centroids of its children; the root's centroids are the
//! model. A deletion empties one slot in one leaf and re-solves the path from
//! that leaf to the root, leaving every other node untouched.
//!
//! Each node draws its randomness from a seed derived from the training seed,
//! the node id and the node's epoch (bumped whenever the node is re-solved),
//! so any tree state can be rebuilt from scratch given the leaf assignment and
//! the epochs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataMatrix, RowId};
use crate::kmeans::{lloyd, CentroidSet};
use crate::rng;
use crate::{Error, Result, Scalar};

const PARTITION_TAG: u64 = 0x5041_5254;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcParams {
    pub k: usize,
    /// Lloyd rounds per sub-problem.
    pub iterations: usize,
    /// Children per internal node; always a power of two.
    pub width: usize,
    pub height: usize,
    /// Re-derive the width from the live count after every deletion and
    /// retrain the whole tree when it changes.
    pub adaptive_width: bool,
}

impl DcParams {
    /// `width` is rounded to the nearest power of two.
    pub fn new(k: usize, iterations: usize, width: usize, height: usize) -> Self {
        Self {
            k,
            iterations,
            width: nearest_power_of_two(width.max(1) as f64),
            height,
            adaptive_width: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.iterations == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("k, iterations and height must be at least 1".into()));
        }
        if !self.width.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("width {} is not a power of two", self.width)));
        }
        Ok(())
    }

    pub fn leaf_count(&self) -> usize {
        self.width.pow(self.height as u32)
    }
}

/// Power of two closest to `x` (ties go up); 1 for `x <= 1`.
fn nearest_power_of_two(x: f64) -> usize {
    if x <= 1.0 {
        return 1;
    }
    let lower = 1usize << x.log2().floor() as u32;
    let upper = lower * 2;
    if x - (lower as f64) < (upper as f64) - x {
        lower
    } else {
        upper
    }
}

/// Tree width rule of thumb: `n^0.3` rounded to the nearest power of two.
pub fn heuristic_width(n: usize) -> usize {
    nearest_power_of_two((n.max(1) as f64).powf(0.3))
}

/// Lattice spacing rule of thumb: `2^round(-log10(n / (k d^1.5)) - 3)`, with
/// the exponent rounded half to even.
pub fn heuristic_epsilon(n: usize, k: usize, d: usize) -> f64 {
    let mass = n as f64 / (k as f64 * (d as f64).powf(1.5));
    let exponent = (-mass.log10() - 3.0).round_ties_even();
    2f64.powi(exponent as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcNode<S> {
    pub id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Leaf rows in ascending id order; empty for internal nodes.
    pub rows: Vec<RowId>,
    /// `None` when the node's input was empty.
    pub centroids: Option<CentroidSet<S>>,
    pub epoch: u32,
    /// Seed used for each epoch so far.
    pub seeds: Vec<u64>,
}

impl<S> DcNode<S> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcModel<S> {
    pub params: DcParams,
    /// Breadth-first; the root is node 0 and the leaves come last.
    pub nodes: Vec<DcNode<S>>,
    /// Leaf node of every live row, indexed by row id.
    pub leaf_of: Vec<Option<usize>>,
    pub training_seed: u64,
    pub n_live: usize,
    /// Whole-tree retrains forced by a change of the adaptive width.
    pub full_retrains: usize,
}

/// Seed for `node` at `epoch` under `training_seed`.
pub fn node_seed(training_seed: u64, node: usize, epoch: u32) -> u64 {
    rng::derive_seed(rng::derive_seed(training_seed, node as u64), epoch as u64)
}

/// Sub-problem solver: fewer than `k` points come back verbatim.
fn solve<S: Scalar>(points: Vec<S>, dim: usize, k: usize, iterations: usize, seed: u64) -> Result<Option<CentroidSet<S>>> {
    if points.is_empty() {
        return Ok(None);
    }
    let data = DataMatrix::from_flat(dim, points)?;
    if data.live_count() < k {
        let values = data.live_rows().flat_map(|(_, p)| p.iter().copied()).collect();
        return Ok(Some(CentroidSet::from_flat(dim, values)?));
    }
    Ok(Some(lloyd(&data, k, iterations, &mut rng::stream(seed))?.centroids))
}

fn build_tree<S>(width: usize, height: usize) -> Vec<DcNode<S>> {
    let mut nodes = vec![DcNode {
        id: 0,
        level: 0,
        parent: None,
        children: vec![],
        rows: vec![],
        centroids: None,
        epoch: 0,
        seeds: vec![],
    }];
    let mut frontier = vec![0];
    for level in 1..=height {
        let mut next = Vec::with_capacity(frontier.len() * width);
        for &parent in &frontier {
            for _ in 0..width {
                let id = nodes.len();
                nodes.push(DcNode {
                    id,
                    level,
                    parent: Some(parent),
                    children: vec![],
                    rows: vec![],
                    centroids: None,
                    epoch: 0,
                    seeds: vec![],
                });
                nodes[parent].children.push(id);
                next.push(id);
            }
        }
        frontier = next;
    }
    nodes
}

impl<S: Scalar> DcModel<S> {
    pub fn centroids(&self) -> Option<&CentroidSet<S>> {
        self.nodes[0].centroids.as_ref()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &DcNode<S>> + '_ {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn epochs(&self) -> Vec<u32> {
        self.nodes.iter().map(|n| n.epoch).collect()
    }

    fn input_of(&self, node: usize, data: &DataMatrix<S>) -> Result<Vec<S>> {
        let n = &self.nodes[node];
        if n.is_leaf() {
            let mut out = Vec::with_capacity(n.rows.len() * data.dim());
            for &r in &n.rows {
                out.extend_from_slice(data.live_point(r)?);
            }
            Ok(out)
        } else {
            Ok(n.children
                .iter()
                .filter_map(|&c| self.nodes[c].centroids.as_ref())
                .flat_map(|c| c.as_flat().iter().copied())
                .collect())
        }
    }

    fn solve_node(&mut self, node: usize, data: &DataMatrix<S>) -> Result<()> {
        let input = self.input_of(node, data)?;
        let seed = node_seed(self.training_seed, node, self.nodes[node].epoch);
        let centroids = solve(input, data.dim(), self.params.k, self.params.iterations, seed)?;
        let n = &mut self.nodes[node];
        if n.seeds.len() <= n.epoch as usize {
            n.seeds.resize(n.epoch as usize + 1, 0);
        }
        n.seeds[n.epoch as usize] = seed;
        n.centroids = centroids;
        Ok(())
    }

    /// Solves every node bottom-up from the current leaf contents and epochs.
    fn solve_all(&mut self, data: &DataMatrix<S>) -> Result<()> {
        for node in (0..self.nodes.len()).rev() {
            self.solve_node(node, data)?;
        }
        Ok(())
    }

    fn check_live(&self, data: &DataMatrix<S>) -> Result<()> {
        if self.n_live != data.live_count() || self.leaf_of.len() != data.n_rows() {
            return Err(Error::ModelMismatch(format!(
                "model describes {} live rows, dataset has {}",
                self.n_live,
                data.live_count()
            )));
        }
        Ok(())
    }
}

/// Trains DC-k-means; leaf choices and node seeds all derive from `seed`.
pub fn dckmeans_train<S: Scalar>(data: &DataMatrix<S>, params: DcParams, seed: u64) -> Result<DcModel<S>> {
    params.validate()?;
    if data.live_count() < params.k {
        return Err(Error::TooFewRows {
            needed: params.k,
            live: data.live_count(),
        });
    }
    let mut nodes = build_tree(params.width, params.height);
    let first_leaf = nodes.len() - params.leaf_count();
    let mut partition = rng::derive_stream(seed, PARTITION_TAG);
    let mut leaf_of = vec![None; data.n_rows()];
    for id in data.live_ids() {
        let leaf = first_leaf + partition.random_range(0..params.leaf_count());
        nodes[leaf].rows.push(id);
        leaf_of[id.0] = Some(leaf);
    }
    let mut model = DcModel {
        params,
        nodes,
        leaf_of,
        training_seed: seed,
        n_live: data.live_count(),
        full_retrains: 0,
    };
    model.solve_all(data)?;
    Ok(model)
}

/// Rebuilds a tree from scratch with an injected leaf assignment and per-node
/// epochs instead of fresh random choices.
pub fn dckmeans_replay<S: Scalar>(
    data: &DataMatrix<S>,
    params: DcParams,
    leaf_of: &[Option<usize>],
    epochs: &[u32],
    training_seed: u64,
) -> Result<DcModel<S>> {
    params.validate()?;
    let mut nodes = build_tree(params.width, params.height);
    if epochs.len() != nodes.len() || leaf_of.len() != data.n_rows() {
        return Err(Error::ReplayDiverged("tree shape does not match the injected state".into()));
    }
    let mut assignment = vec![None; data.n_rows()];
    for id in data.live_ids() {
        let leaf = leaf_of[id.0].ok_or_else(|| Error::ReplayDiverged(format!("row {id} has no leaf")))?;
        if leaf >= nodes.len() || !nodes[leaf].is_leaf() {
            return Err(Error::ReplayDiverged(format!("node {leaf} is not a leaf")));
        }
        nodes[leaf].rows.push(id);
        assignment[id.0] = Some(leaf);
    }
    for (node, &epoch) in nodes.iter_mut().zip(epochs) {
        node.epoch = epoch;
    }
    let mut model = DcModel {
        params,
        nodes,
        leaf_of: assignment,
        training_seed,
        n_live: data.live_count(),
        full_retrains: 0,
    };
    model.solve_all(data)?;
    // Seed history before the injected epochs is unknown to a replay.
    for node in &mut model.nodes {
        let seed = node.seeds[node.epoch as usize];
        node.seeds = vec![seed];
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcDeletion {
    /// Nodes re-solved, leaf first.
    pub touched: Vec<usize>,
    /// The adaptive width changed and the whole tree was retrained.
    pub full_retrain: bool,
}

/// Deletes `row` from `data` and re-solves its leaf-to-root path.
pub fn dckmeans_delete<S: Scalar>(model: &mut DcModel<S>, data: &mut DataMatrix<S>, row: RowId) -> Result<DcDeletion> {
    model.check_live(data)?;
    data.live_point(row)?;
    let leaf = model.leaf_of[row.0].ok_or_else(|| Error::ModelMismatch(format!("row {row} is not in any leaf")))?;
    data.delete_row(row)?;
    model.leaf_of[row.0] = None;
    model.n_live -= 1;

    if model.params.adaptive_width {
        let width = heuristic_width(model.n_live);
        if width != model.params.width {
            let params = DcParams { width, ..model.params };
            let full_retrains = model.full_retrains + 1;
            let seed = rng::derive_seed(model.training_seed, full_retrains as u64);
            *model = dckmeans_train(data, params, seed)?;
            model.full_retrains = full_retrains;
            return Ok(DcDeletion {
                touched: (0..model.nodes.len()).collect(),
                full_retrain: true,
            });
        }
    }

    let rows = &mut model.nodes[leaf].rows;
    let pos = rows.binary_search(&row).map_err(|_| Error::ModelMismatch(format!("row {row} missing from leaf {leaf}")))?;
    rows.remove(pos);

    let mut touched = Vec::with_capacity(model.params.height + 1);
    let mut node = Some(leaf);
    while let Some(id) = node {
        model.nodes[id].epoch += 1;
        model.solve_node(id, data)?;
        touched.push(id);
        node = model.nodes[id].parent;
    }
    Ok(DcDeletion {
        touched,
        full_retrain: false,
    })
}
