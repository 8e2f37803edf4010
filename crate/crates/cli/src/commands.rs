use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use delkm::bench::{
    emit_report, run_benchmark, Algorithm, Baseline, BenchConfig, BenchReport, ReportFormat, Unlearner,
    REFERENCE_MAX_ITER,
};
use delkm::dataset::{gen_deletion_stream, write_csv};
use delkm::dckmeans::{dckmeans_delete, dckmeans_train};
use delkm::kmeans::{assign, kmeans_loss, lloyd};
use delkm::metrics::{loss_ratio, nmi, silhouette};
use delkm::persist::{AnyModel, ModelFile};
use delkm::qkmeans::{qkmeans_delete, qkmeans_train};
use delkm::{rng, CentroidSet64, DataMatrix64, DeletionStream, RowId};

use crate::args::{AlgoName, DataArgs, ParamArgs};
use crate::CliError;

const SILHOUETTE_TAG: u64 = 1;
const REFERENCE_TAG: u64 = 2;

fn centroids(model: &AnyModel) -> Result<CentroidSet64, CliError> {
    Ok(match model {
        AnyModel::Baseline(m) => m.centroids.clone(),
        AnyModel::Qkmeans(m) => m.final_centroids.clone(),
        AnyModel::Dckmeans(m) => m.centroids().cloned().ok_or(delkm::Error::EmptyDataset)?,
    })
}

fn describe(alg: &Algorithm) -> String {
    match alg {
        Algorithm::Baseline(p) => format!("k={} T={}", p.k, p.iterations),
        Algorithm::Qkmeans(p) => format!("k={} T={} epsilon={} gamma={}", p.k, p.iterations, p.epsilon, p.gamma),
        Algorithm::Dckmeans(p) => format!(
            "k={} T={} w={} h={}{}",
            p.k,
            p.iterations,
            p.width,
            p.height,
            if p.adaptive_width { " adaptive" } else { "" }
        ),
    }
}

pub fn train(algo: AlgoName, data: &DataArgs, params: &ParamArgs, seed: u64, out: &Path) -> Result<(), CliError> {
    let ds = data.load()?;
    let alg = params.resolve(algo, ds.data.live_count(), ds.data.dim())?;
    let model = match alg {
        Algorithm::Baseline(p) => AnyModel::Baseline(Baseline(p).train(&ds.data, seed)?),
        Algorithm::Qkmeans(p) => AnyModel::Qkmeans(qkmeans_train(&ds.data, p, seed)?),
        Algorithm::Dckmeans(p) => AnyModel::Dckmeans(dckmeans_train(&ds.data, p, seed)?),
    };
    let loss = kmeans_loss(&ds.data, &centroids(&model)?)?;
    ModelFile::new(model, &ds.data).save(out)?;
    println!(
        "algo={} n={} d={} {} seed={seed} loss={loss}",
        alg.name(),
        ds.data.live_count(),
        ds.data.dim(),
        describe(&alg)
    );
    println!("model={}", out.display());
    Ok(())
}

pub fn delete(model_path: &Path, data: &DataArgs, rows: &[usize], stream: Option<&Path>) -> Result<(), CliError> {
    let mut file = ModelFile::load(model_path)?;
    let mut ds = data.load()?.data;
    file.attach(&mut ds)?;

    let mut ids: Vec<RowId> = rows.iter().map(|&r| RowId(r)).collect();
    if let Some(path) = stream {
        ids.extend(DeletionStream::read_lines(BufReader::new(File::open(path)?), 0)?.ids);
    }
    if ids.is_empty() {
        return Err(CliError::Usage("nothing to delete: pass --row or --stream".into()));
    }
    // Reject bad ids before touching the model.
    let mut seen = std::collections::HashSet::new();
    for &id in &ids {
        ds.live_point(id)?;
        if !seen.insert(id) {
            return Err(delkm::Error::AlreadyDeleted(id).into());
        }
    }

    for id in ids {
        let start = Instant::now();
        let retrained = delete_one(&mut file.model, &mut ds, id)?;
        println!("row={id} retrained={retrained} seconds={:.6}", start.elapsed().as_secs_f64());
    }
    file.sync(&ds);
    file.save(model_path)?;
    Ok(())
}

fn delete_one(model: &mut AnyModel, data: &mut DataMatrix64, row: RowId) -> Result<bool, CliError> {
    Ok(match model {
        AnyModel::Baseline(m) => Baseline(m.params).delete(m, data, row)?,
        AnyModel::Qkmeans(m) => qkmeans_delete(m, data, row)?.retrained,
        AnyModel::Dckmeans(m) => dckmeans_delete(m, data, row)?.full_retrain,
    })
}

pub struct BenchArgs<'a> {
    pub algos: Vec<AlgoName>,
    pub data: &'a DataArgs,
    pub params: &'a ParamArgs,
    pub m: usize,
    pub checkpoints: Option<Vec<usize>>,
    pub replicates: usize,
    pub silhouette_cap: usize,
    pub seed: u64,
    pub out_dir: &'a Path,
    pub baseline_report: Option<&'a Path>,
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    if let Some(cps) = &args.checkpoints {
        if let Some(c) = cps.iter().find(|&&c| c == 0 || c > args.m) {
            return Err(CliError::Usage(format!("checkpoint {c} outside 1..={}", args.m)));
        }
        if !cps.windows(2).all(|w| w[0] < w[1]) {
            return Err(CliError::Usage("checkpoints must be strictly increasing".into()));
        }
    }
    let ds = args.data.load()?;
    let (n, d) = (ds.data.live_count(), ds.data.dim());
    std::fs::create_dir_all(args.out_dir)?;

    let mut reports = Vec::new();
    for &algo in &args.algos {
        let alg = args.params.resolve(algo, n, d)?;
        let mut cfg = BenchConfig::new(alg, args.m, args.seed);
        if let Some(cps) = &args.checkpoints {
            cfg.checkpoints = cps.clone();
        }
        cfg.replicates = args.replicates;
        cfg.silhouette_cap = args.silhouette_cap;
        cfg.validate(n)?;
        println!("running {} {} m={} replicates={}", alg.name(), describe(&alg), args.m, args.replicates);
        let report = run_benchmark(&ds, &cfg)?;
        for (format, ext) in [(ReportFormat::Json, "json"), (ReportFormat::Csv, "csv")] {
            let path = args.out_dir.join(format!("{}.{ext}", alg.name()));
            emit_report(&report, format, &path)?;
            println!("wrote {}", path.display());
        }
        reports.push(report);
    }

    let baseline = match args.baseline_report {
        Some(path) => Some(serde_json::from_reader::<_, BenchReport>(BufReader::new(File::open(path)?)).map_err(delkm::Error::from)?),
        None => reports.iter().find(|r| matches!(r.algorithm, Algorithm::Baseline(_))).cloned(),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{:<10} {:>14} {:>12} {:>10} {:>9}", "algorithm", "amortized_s", "std", "retrains", "speedup")?;
    for r in &reports {
        let speedup = baseline
            .as_ref()
            .map_or("-".to_string(), |b| format!("{:.2}x", b.amortized_total.mean / r.amortized_total.mean));
        writeln!(
            out,
            "{:<10} {:>14.6e} {:>12.3e} {:>10.1} {:>9}",
            r.algorithm.name(),
            r.amortized_total.mean,
            r.amortized_total.std,
            r.retrain_count.mean,
            speedup
        )?;
    }
    Ok(())
}

pub fn gen(data: &DataArgs, out: &Path) -> Result<(), CliError> {
    let ds = data.load()?;
    let mut w = BufWriter::new(File::create(out)?);
    write_csv(&ds, &mut w)?;
    w.flush()?;
    println!("rows={} d={} out={}", ds.data.live_count(), ds.data.dim(), out.display());
    Ok(())
}

pub fn stream(data: &DataArgs, m: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let ds = data.load()?;
    let s = gen_deletion_stream(&ds.data, m, seed)?;
    let mut w = BufWriter::new(File::create(out)?);
    s.write_lines(&mut w)?;
    w.flush()?;
    println!("deletions={m} seed={seed} out={}", out.display());
    Ok(())
}

pub fn metrics(model_path: &Path, data: &DataArgs, reference: bool, cap: usize, seed: u64) -> Result<(), CliError> {
    let file = ModelFile::load(model_path)?;
    let mut ds = data.load()?;
    file.attach(&mut ds.data)?;
    let c = centroids(&file.model)?;
    let loss = kmeans_loss(&ds.data, &c)?;
    println!("algo={} n={} k={} loss={loss}", file.model.name(), ds.data.live_count(), c.k());
    if reference {
        let fit = lloyd(&ds.data, c.k(), REFERENCE_MAX_ITER, &mut rng::derive_stream(seed, REFERENCE_TAG))?;
        println!("reference_loss={} loss_ratio={}", fit.loss(), loss_ratio(loss, fit.loss())?);
    }
    let a = assign(&ds.data, &c)?;
    match silhouette(&ds.data, &a, cap, &mut rng::derive_stream(seed, SILHOUETTE_TAG)) {
        Ok(s) => println!("silhouette={s}"),
        Err(delkm::Error::SingleCluster) => println!("silhouette=undefined"),
        Err(e) => return Err(e.into()),
    }
    if ds.labels.is_some() {
        let (pred, truth): (Vec<usize>, Vec<i64>) = a.iter().filter_map(|(id, l)| ds.label(id).map(|t| (l, t))).unzip();
        println!("nmi={}", nmi(&pred, &truth)?);
    }
    Ok(())
}
