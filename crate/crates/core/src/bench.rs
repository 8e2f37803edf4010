//! Online deletion benchmark and the distributional deletion-equality test.
//!
//! A benchmark run trains once on the full dataset, then serves a
//! pre-generated stream of `m` deletion requests. Only training and the
//! deletion calls are timed; stream generation, quality evaluation and
//! bookkeeping run with the clock stopped. The headline number is the
//! amortized time `(train + sum of deletions) / m`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{gen_deletion_stream, DataMatrix, LabeledDataset, RowId};
use crate::dckmeans::{dckmeans_delete, dckmeans_train, DcModel, DcParams};
use crate::kmeans::{assign, kmeans_loss, lloyd, CentroidSet};
use crate::metrics::{loss_ratio, nmi, silhouette, QualityReport, DEFAULT_SILHOUETTE_CAP};
use crate::qkmeans::{qkmeans_delete, qkmeans_train, QkModel, QkParams};
use crate::rng;
use crate::stats::{ks_two_sample, KsResult};
use crate::{Error, Result, Scalar};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_CHECKPOINTS: [usize; 4] = [1, 10, 100, 1000];
pub const DEFAULT_REPLICATES: usize = 5;
/// Round cap for the converged baseline that loss ratios are measured against.
pub const REFERENCE_MAX_ITER: usize = 300;

/// A clustering algorithm that supports deleting training rows.
pub trait Unlearner<S: Scalar> {
    type Model;

    fn name(&self) -> &'static str;

    fn train(&self, data: &DataMatrix<S>, seed: u64) -> Result<Self::Model>;

    /// Removes `row` from `data` and from the model; returns whether the
    /// model had to be retrained from scratch.
    fn delete(&self, model: &mut Self::Model, data: &mut DataMatrix<S>, row: RowId) -> Result<bool>;

    fn centroids(&self, model: &Self::Model) -> Result<CentroidSet<S>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub k: usize,
    pub iterations: usize,
}

/// k-means++ and Lloyd, retrained from scratch for every deletion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel<S> {
    pub params: BaselineParams,
    pub centroids: CentroidSet<S>,
    pub training_seed: u64,
    pub retrains: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Baseline(pub BaselineParams);

impl<S: Scalar> Unlearner<S> for Baseline {
    type Model = BaselineModel<S>;

    fn name(&self) -> &'static str {
        "baseline"
    }

    fn train(&self, data: &DataMatrix<S>, seed: u64) -> Result<Self::Model> {
        let fit = lloyd(data, self.0.k, self.0.iterations, &mut rng::stream(seed))?;
        Ok(BaselineModel {
            params: self.0,
            centroids: fit.centroids,
            training_seed: seed,
            retrains: 0,
        })
    }

    fn delete(&self, model: &mut Self::Model, data: &mut DataMatrix<S>, row: RowId) -> Result<bool> {
        data.delete_row(row)?;
        let retrains = model.retrains + 1;
        let seed = rng::derive_seed(model.training_seed, retrains as u64);
        let fit = lloyd(data, self.0.k, self.0.iterations, &mut rng::stream(seed))?;
        model.centroids = fit.centroids;
        model.retrains = retrains;
        Ok(true)
    }

    fn centroids(&self, model: &Self::Model) -> Result<CentroidSet<S>> {
        Ok(model.centroids.clone())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quantized(pub QkParams);

impl<S: Scalar> Unlearner<S> for Quantized {
    type Model = QkModel<S>;

    fn name(&self) -> &'static str {
        "qkmeans"
    }

    fn train(&self, data: &DataMatrix<S>, seed: u64) -> Result<Self::Model> {
        qkmeans_train(data, self.0, seed)
    }

    fn delete(&self, model: &mut Self::Model, data: &mut DataMatrix<S>, row: RowId) -> Result<bool> {
        Ok(qkmeans_delete(model, data, row)?.retrained)
    }

    fn centroids(&self, model: &Self::Model) -> Result<CentroidSet<S>> {
        Ok(model.final_centroids.clone())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DivideConquer(pub DcParams);

impl<S: Scalar> Unlearner<S> for DivideConquer {
    type Model = DcModel<S>;

    fn name(&self) -> &'static str {
        "dckmeans"
    }

    fn train(&self, data: &DataMatrix<S>, seed: u64) -> Result<Self::Model> {
        dckmeans_train(data, self.0, seed)
    }

    fn delete(&self, model: &mut Self::Model, data: &mut DataMatrix<S>, row: RowId) -> Result<bool> {
        Ok(dckmeans_delete(model, data, row)?.full_retrain)
    }

    fn centroids(&self, model: &Self::Model) -> Result<CentroidSet<S>> {
        model.centroids().cloned().ok_or(Error::EmptyDataset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Algorithm {
    Baseline(BaselineParams),
    Qkmeans(QkParams),
    Dckmeans(DcParams),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Baseline(_) => "baseline",
            Algorithm::Qkmeans(_) => "qkmeans",
            Algorithm::Dckmeans(_) => "dckmeans",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Algorithm::Baseline(p) => p.k,
            Algorithm::Qkmeans(p) => p.k,
            Algorithm::Dckmeans(p) => p.k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub algorithm: Algorithm,
    /// Number of deletion requests.
    pub deletions: usize,
    pub training_seed: u64,
    pub stream_seed: u64,
    /// Seed for silhouette subsampling and the reference baseline.
    pub quality_seed: u64,
    /// Sorted deletion indices in `1..=deletions` at which quality is measured.
    pub checkpoints: Vec<usize>,
    pub replicates: usize,
    pub silhouette_cap: usize,
}

impl BenchConfig {
    /// Default checkpoints that fit within `deletions`, five replicates.
    pub fn new(algorithm: Algorithm, deletions: usize, seed: u64) -> Self {
        Self {
            algorithm,
            deletions,
            training_seed: rng::derive_seed(seed, 1),
            stream_seed: rng::derive_seed(seed, 2),
            quality_seed: rng::derive_seed(seed, 3),
            checkpoints: DEFAULT_CHECKPOINTS.iter().copied().filter(|&c| c <= deletions).collect(),
            replicates: DEFAULT_REPLICATES,
            silhouette_cap: DEFAULT_SILHOUETTE_CAP,
        }
    }

    pub fn validate(&self, live: usize) -> Result<()> {
        if self.deletions == 0 || self.replicates == 0 {
            return Err(Error::InvalidParameter("deletions and replicates must be at least 1".into()));
        }
        if self.deletions + self.algorithm.k() > live {
            return Err(Error::TooFewRows {
                needed: self.deletions + self.algorithm.k(),
                live,
            });
        }
        if !self.checkpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("checkpoints must be strictly increasing".into()));
        }
        if let Some(&c) = self.checkpoints.iter().find(|&&c| c == 0 || c > self.deletions) {
            return Err(Error::InvalidParameter(format!("checkpoint {c} outside 1..={}", self.deletions)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub index: usize,
    pub quality: QualityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRun {
    pub replicate: usize,
    pub training_seed: u64,
    pub stream_seed: u64,
    pub train_seconds: f64,
    /// Wall time of each deletion request, in stream order.
    pub delete_seconds: Vec<f64>,
    /// 1-based indices of requests that retrained from scratch.
    pub retrain_events: Vec<usize>,
    pub amortized_total: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quality: Vec<Checkpoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub index: usize,
    pub loss_ratio: Summary,
    pub silhouette: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmi: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// Always `single_core`: no algorithm uses internal parallelism.
    pub execution: String,
    pub dataset_fingerprint: String,
    pub config: BenchConfig,
    pub runs: Vec<ReplicateRun>,
    pub amortized_total: Summary,
    pub retrain_count: Summary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quality: Vec<CheckpointSummary>,
}

fn quality_at<S: Scalar>(
    centroids: &CentroidSet<S>,
    data: &DataMatrix<S>,
    labels: Option<&[i64]>,
    k: usize,
    cap: usize,
    seed: u64,
) -> Result<QualityReport> {
    let loss = kmeans_loss(data, centroids)?.as_f64();
    let reference = lloyd(data, k, REFERENCE_MAX_ITER, &mut rng::derive_stream(seed, 0))?;
    let assignment = assign(data, centroids)?;
    let subsample_seed = rng::derive_seed(seed, 1);
    let sil = silhouette(data, &assignment, cap, &mut rng::stream(subsample_seed))?;
    let nmi = match labels {
        Some(labels) => {
            let (pred, truth): (Vec<usize>, Vec<i64>) = assignment.iter().map(|(id, c)| (c, labels[id.0])).unzip();
            Some(nmi(&pred, &truth)?)
        }
        None => None,
    };
    Ok(QualityReport {
        loss,
        loss_ratio: loss_ratio(loss, reference.loss().as_f64())?,
        silhouette: sil,
        nmi,
        subsample_seed,
    })
}

fn run_replicate<S: Scalar, U: Unlearner<S>>(
    alg: &U,
    dataset: &LabeledDataset<S>,
    cfg: &BenchConfig,
    replicate: usize,
) -> Result<ReplicateRun> {
    let training_seed = rng::derive_seed(cfg.training_seed, replicate as u64);
    let stream_seed = rng::derive_seed(cfg.stream_seed, replicate as u64);
    let stream = gen_deletion_stream(&dataset.data, cfg.deletions, stream_seed)?;
    let mut data = dataset.data.clone();

    let start = Instant::now();
    let mut model = alg.train(&data, training_seed)?;
    let train_seconds = start.elapsed().as_secs_f64();

    let mut delete_seconds = Vec::with_capacity(cfg.deletions);
    let mut retrain_events = Vec::new();
    let mut quality = Vec::with_capacity(cfg.checkpoints.len());
    let mut next_checkpoint = cfg.checkpoints.iter().peekable();
    for (i, &row) in stream.ids.iter().enumerate() {
        let index = i + 1;
        let start = Instant::now();
        let retrained = alg.delete(&mut model, &mut data, row)?;
        delete_seconds.push(start.elapsed().as_secs_f64());
        if retrained {
            retrain_events.push(index);
        }
        if next_checkpoint.next_if_eq(&&index).is_some() {
            let seed = rng::derive_seed(rng::derive_seed(cfg.quality_seed, replicate as u64), index as u64);
            let centroids = alg.centroids(&model)?;
            let k = cfg.algorithm.k();
            quality.push(Checkpoint {
                index,
                quality: quality_at(&centroids, &data, dataset.labels.as_deref(), k, cfg.silhouette_cap, seed)?,
            });
        }
    }
    let total = train_seconds + delete_seconds.iter().sum::<f64>();
    Ok(ReplicateRun {
        replicate,
        training_seed,
        stream_seed,
        train_seconds,
        delete_seconds,
        retrain_events,
        amortized_total: total / cfg.deletions as f64,
        quality,
    })
}

/// Runs the benchmark with any [`Unlearner`]; `cfg.algorithm` is only
/// recorded, `alg` does the work.
pub fn run_with<S: Scalar, U: Unlearner<S>>(alg: &U, dataset: &LabeledDataset<S>, cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate(dataset.data.live_count())?;
    let runs = (0..cfg.replicates)
        .map(|r| run_replicate(alg, dataset, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let amortized: Vec<f64> = runs.iter().map(|r| r.amortized_total).collect();
    let retrains: Vec<f64> = runs.iter().map(|r| r.retrain_events.len() as f64).collect();
    let quality = cfg
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, &index)| {
            let pick = |f: &dyn Fn(&QualityReport) -> f64| Summary::of(&runs.iter().map(|r| f(&r.quality[i].quality)).collect::<Vec<_>>());
            CheckpointSummary {
                index,
                loss_ratio: pick(&|q| q.loss_ratio),
                silhouette: pick(&|q| q.silhouette),
                nmi: runs[0].quality[i].quality.nmi.map(|_| pick(&|q| q.nmi.unwrap_or(f64::NAN))),
            }
        })
        .collect();
    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        algorithm: cfg.algorithm,
        n: dataset.data.live_count(),
        d: dataset.data.dim(),
        m: cfg.deletions,
        execution: "single_core".into(),
        dataset_fingerprint: dataset.data.fingerprint(),
        config: cfg.clone(),
        runs,
        amortized_total: Summary::of(&amortized),
        retrain_count: Summary::of(&retrains),
        quality,
    })
}

/// Runs the benchmark for the algorithm named in `cfg`.
pub fn run_benchmark<S: Scalar>(dataset: &LabeledDataset<S>, cfg: &BenchConfig) -> Result<BenchReport> {
    match cfg.algorithm {
        Algorithm::Baseline(p) => run_with(&Baseline(p), dataset, cfg),
        Algorithm::Qkmeans(p) => run_with(&Quantized(p), dataset, cfg),
        Algorithm::Dckmeans(p) => run_with(&DivideConquer(p), dataset, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

pub const CSV_HEADER: [&str; 5] = ["replicate", "index", "seconds", "cumulative_amortized", "retrained"];

/// One row per deletion request: `replicate,index,seconds,cumulative_amortized,retrained`,
/// where `cumulative_amortized` is `(train + deletions so far) / index`.
pub fn write_report_csv(report: &BenchReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for run in &report.runs {
        let mut total = run.train_seconds;
        let mut events = run.retrain_events.iter().peekable();
        for (i, &s) in run.delete_seconds.iter().enumerate() {
            let index = i + 1;
            total += s;
            let retrained = events.next_if_eq(&&index).is_some();
            w.write_record([
                run.replicate.to_string(),
                index.to_string(),
                s.to_string(),
                (total / index as f64).to_string(),
                retrained.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_report(report: &BenchReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        ReportFormat::Json => serde_json::to_writer_pretty(&mut out, report)?,
        ReportFormat::Csv => write_report_csv(report, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

/// Outcome of [`deletion_equality_test`]. Each sub-test is a two-sample KS
/// test; the verdict holds the family-wise error at `significance` by
/// comparing every p-value to `significance / tests`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityVerdict {
    pub passed: bool,
    pub trials: usize,
    pub significance: f64,
    pub threshold: f64,
    pub loss: KsResult,
    /// One test per coordinate of the lexicographically sorted centroids.
    pub fingerprint: Vec<KsResult>,
}

/// Centroids sorted lexicographically and flattened.
pub fn centroid_fingerprint<S: Scalar>(c: &CentroidSet<S>) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = c.iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows.concat()
}

/// KS test that treats two constant, identical samples as a perfect match
/// and two constant, different samples as a certain mismatch.
fn compare(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let constant = |s: &[f64]| s.iter().all(|v| v.to_bits() == s[0].to_bits());
    if constant(a) && constant(b) {
        let same = a[0].to_bits() == b[0].to_bits();
        return Ok(KsResult {
            statistic: if same { 0.0 } else { 1.0 },
            p_value: if same { 1.0 } else { 0.0 },
            n: a.len(),
            m: b.len(),
        });
    }
    ks_two_sample(a, b)
}

/// Checks empirically that "train on `data`, then delete `row`" and "train on
/// `data` without `row`" produce the same distribution of models. Runs
/// `trials` independent pipelines of each kind and compares the final loss on
/// the reduced data and every coordinate of the sorted centroids.
pub fn deletion_equality_test<S: Scalar, U: Unlearner<S>>(
    alg: &U,
    data: &DataMatrix<S>,
    row: RowId,
    trials: usize,
    significance: f64,
    seed: u64,
) -> Result<EqualityVerdict> {
    if trials < 1000 {
        return Err(Error::InvalidParameter(format!("need at least 1000 trials, got {trials}")));
    }
    if data.live_count() > 50 {
        return Err(Error::InvalidParameter("the equality test is meant for datasets of at most 50 rows".into()));
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::InvalidParameter("significance must lie in (0, 1)".into()));
    }
    let reduced = data.without(row)?;
    let summarize = |c: CentroidSet<S>| -> Result<(f64, Vec<f64>)> { Ok((kmeans_loss(&reduced, &c)?.as_f64(), centroid_fingerprint(&c))) };

    let mut deleted = Vec::with_capacity(trials);
    let mut retrained = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut d = data.clone();
        let mut model = alg.train(&d, rng::derive_seed(rng::derive_seed(seed, 0), t as u64))?;
        alg.delete(&mut model, &mut d, row)?;
        deleted.push(summarize(alg.centroids(&model)?)?);
        let model = alg.train(&reduced, rng::derive_seed(rng::derive_seed(seed, 1), t as u64))?;
        retrained.push(summarize(alg.centroids(&model)?)?);
    }

    let width = deleted[0].1.len();
    if deleted.iter().chain(&retrained).any(|(_, f)| f.len() != width) {
        return Err(Error::InvalidParameter("models differ in centroid count".into()));
    }
    let column = |s: &[(f64, Vec<f64>)], j: usize| s.iter().map(|(_, f)| f[j]).collect::<Vec<_>>();
    let losses = |s: &[(f64, Vec<f64>)]| s.iter().map(|(l, _)| *l).collect::<Vec<_>>();
    let loss = compare(&losses(&deleted), &losses(&retrained))?;
    let fingerprint = (0..width)
        .map(|j| compare(&column(&deleted, j), &column(&retrained, j)))
        .collect::<Result<Vec<_>>>()?;
    let threshold = significance / (1 + width) as f64;
    let passed = loss.p_value >= threshold && fingerprint.iter().all(|r| r.p_value >= threshold);
    Ok(EqualityVerdict {
        passed,
        trials,
        significance,
        threshold,
        loss,
        fingerprint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_gaussian_mixture;

    fn small() -> LabeledDataset<f64> {
        gen_gaussian_mixture(100, 3, 3, 0.01, 5).unwrap()
    }

    fn cfg(alg: Algorithm, m: usize) -> BenchConfig {
        BenchConfig {
            replicates: 2,
            checkpoints: vec![1, m],
            ..BenchConfig::new(alg, m, 9)
        }
    }

    #[test]
    fn baseline_retrains_every_request() {
        let alg = Algorithm::Baseline(BaselineParams { k: 3, iterations: 10 });
        let report = run_benchmark(&small(), &cfg(alg, 5)).unwrap();
        for run in &report.runs {
            assert_eq!(run.retrain_events, vec![1, 2, 3, 4, 5]);
            assert_eq!(run.delete_seconds.len(), 5);
            assert!(run.amortized_total > 0.0);
        }
        assert_eq!(report.quality.len(), 2);
        assert!(report.quality[0].nmi.is_some());
    }

    #[test]
    fn reports_are_deterministic_except_timing() {
        let alg = Algorithm::Qkmeans(QkParams::new(3, 10, 0.05));
        let a = run_benchmark(&small(), &cfg(alg, 8)).unwrap();
        let b = run_benchmark(&small(), &cfg(alg, 8)).unwrap();
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.retrain_events, y.retrain_events);
            assert_eq!(x.quality, y.quality);
        }
    }

    #[test]
    fn config_validation() {
        let alg = Algorithm::Dckmeans(DcParams::new(3, 10, 4, 1));
        let mut c = cfg(alg, 5);
        c.checkpoints = vec![1, 6];
        assert!(run_benchmark(&small(), &c).is_err());
        c.checkpoints = vec![3, 2];
        assert!(run_benchmark(&small(), &c).is_err());
        assert!(run_benchmark(&small(), &cfg(alg, 1000)).is_err());
        assert_eq!(BenchConfig::new(alg, 200, 0).checkpoints, vec![1, 10, 100]);
    }

    #[test]
    fn json_round_trip_and_csv_rows() {
        let alg = Algorithm::Dckmeans(DcParams::new(3, 10, 4, 1));
        let report = run_benchmark(&small(), &cfg(alg, 7)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("r.json");
        emit_report(&report, ReportFormat::Json, &json).unwrap();
        let back: BenchReport = serde_json::from_reader(File::open(&json).unwrap()).unwrap();
        assert_eq!(back, report);

        let csv_path = dir.path().join("r.csv");
        emit_report(&report, ReportFormat::Csv, &csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().count(), 2 * 7 + 1);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    }

    #[test]
    fn empty_checkpoints_omit_quality() {
        let alg = Algorithm::Baseline(BaselineParams { k: 3, iterations: 5 });
        let mut c = cfg(alg, 2);
        c.checkpoints.clear();
        c.replicates = 1;
        let report = run_benchmark(&small(), &c).unwrap();
        let value = serde_json::to_value(&report).unwrap();
        assert!(value.get("quality").is_none());
        assert!(value["runs"][0].get("quality").is_none());
    }

    struct Idle;

    impl Unlearner<f64> for Idle {
        type Model = ();
        fn name(&self) -> &'static str {
            "idle"
        }
        fn train(&self, _: &DataMatrix<f64>, _: u64) -> Result<()> {
            Ok(())
        }
        fn delete(&self, _: &mut (), data: &mut DataMatrix<f64>, row: RowId) -> Result<bool> {
            data.delete_row(row)?;
            Ok(false)
        }
        fn centroids(&self, _: &()) -> Result<CentroidSet<f64>> {
            CentroidSet::from_flat(3, vec![0.0; 9])
        }
    }

    #[test]
    fn harness_overhead_is_negligible() {
        let data = gen_gaussian_mixture(2000, 5, 3, 0.05, 1).unwrap();
        let base = Algorithm::Baseline(BaselineParams { k: 3, iterations: 10 });
        let mut c = cfg(base, 50);
        c.checkpoints.clear();
        c.replicates = 1;
        let idle = run_with(&Idle, &data, &c).unwrap();
        let baseline = run_benchmark(&data, &c).unwrap();
        assert!(idle.amortized_total.mean < 0.01 * baseline.amortized_total.mean);
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(Summary::of(&[4.0]).std, 0.0);
    }

    #[test]
    fn equality_test_guards() {
        let data = DataMatrix::from_flat(1, (0..10).map(|i| i as f64).collect()).unwrap();
        let alg = Baseline(BaselineParams { k: 2, iterations: 5 });
        assert!(deletion_equality_test(&alg, &data, RowId(0), 10, 0.01, 0).is_err());
        let big = DataMatrix::from_flat(1, (0..60).map(|i| i as f64).collect()).unwrap();
        assert!(deletion_equality_test(&alg, &big, RowId(0), 1000, 0.01, 0).is_err());
    }

    #[test]
    fn baseline_passes_equality_test() {
        let data = gen_gaussian_mixture::<f64>(10, 2, 2, 0.05, 3).unwrap().data;
        let alg = Baseline(BaselineParams { k: 2, iterations: 10 });
        let v = deletion_equality_test(&alg, &data, RowId(4), 1000, 0.01, 1).unwrap();
        assert!(v.passed, "{v:?}");
    }

    #[test]
    fn degenerate_samples_compare_exactly() {
        assert_eq!(compare(&[1.0; 3], &[1.0; 4]).unwrap().p_value, 1.0);
        assert_eq!(compare(&[1.0; 3], &[2.0; 4]).unwrap().p_value, 0.0);
    }
}
