use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_delkm");

fn delkm(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("DELKM_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = delkm(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

const SUBCOMMANDS: [&str; 6] = ["train", "delete", "bench", "gen", "stream", "metrics"];

/// Three tight clusters of 40 points in the plane, labels in column 2.
fn small_csv(dir: &Path) -> &'static [&'static str] {
    ok(
        dir,
        &[
            "gen", "--synthetic", "gaussian", "--n-per-cluster", "40", "--dim", "2", "--clusters", "3",
            "--variance", "0.0005", "--data-seed", "4", "--out", "d.csv",
        ],
    );
    &["--csv", "d.csv", "--label-column", "2"]
}

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

#[test]
fn help_documents_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = delkm(dir.path(), &["--help"]);
    assert!(o.status.success());
    for sub in SUBCOMMANDS {
        let o = delkm(dir.path(), &[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
        let text = stdout(&o);
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            let t = line.trim_start();
            if t.starts_with("--") && !t.starts_with("--help") && !t.starts_with("--version") {
                let next = lines.get(i + 1).map(|l| l.trim()).unwrap_or("");
                assert!(
                    !next.is_empty() && !next.starts_with('-') && !next.starts_with('['),
                    "{sub}: {t} has no description"
                );
            }
        }
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_csv(dir.path());
    let o = delkm(dir.path(), &with(&["train", "--algo", "qkmeans", "--epsilon", "0.1", "--out", "m.json"], data));
    assert_eq!(o.status.code(), Some(1), "missing --k");
    let o = delkm(dir.path(), &with(&["train", "--algo", "qkmeans", "--k", "3", "--out", "m.json"], data));
    assert_eq!(o.status.code(), Some(1), "no epsilon and no --heuristic");
    let o = delkm(
        dir.path(),
        &with(&["bench", "--algo", "qkmeans", "--k", "3", "--epsilon", "0.1", "--m", "5", "--checkpoints", "1,6"], data),
    );
    assert_eq!(o.status.code(), Some(1), "checkpoint beyond m");
    let o = delkm(dir.path(), &["gen", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(1), "no data source");
}

#[test]
fn train_then_delete() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_csv(dir.path());
    let out = ok(
        dir.path(),
        &with(&["train", "--algo", "qkmeans", "--k", "3", "--heuristic", "--seed", "7", "--out", "q.json"], data),
    );
    assert!(out.contains("heuristic epsilon="), "{out}");
    assert!(out.contains("seed=7"));

    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("q.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = model["model"]["seeds"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();

    let seed_row = seeds[0].to_string();
    let out = ok(dir.path(), &with(&["delete", "--model", "q.json", "--row", &seed_row], data));
    assert!(out.contains("retrained=true"), "{out}");

    // On well separated clusters most interior points are stable.
    let mut stable = false;
    for row in 0..120u64 {
        let model: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("q.json")).unwrap()).unwrap();
        let seeds = model["model"]["seeds"]["rows"].as_array().unwrap().clone();
        let deleted = model["deleted"].as_array().unwrap().clone();
        let r = serde_json::Value::from(row);
        if seeds.contains(&r) || deleted.contains(&r) {
            continue;
        }
        let out = ok(dir.path(), &with(&["delete", "--model", "q.json", "--row", &row.to_string()], data));
        assert!(out.contains("seconds="));
        if out.contains("retrained=false") {
            stable = true;
            break;
        }
    }
    assert!(stable);

    let o = delkm(dir.path(), &with(&["delete", "--model", "q.json", "--row", &seed_row], data));
    assert_eq!(o.status.code(), Some(2), "row already deleted");
}

#[test]
fn fingerprint_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_csv(dir.path());
    ok(dir.path(), &with(&["train", "--algo", "baseline", "--k", "3", "--out", "b.json"], data));
    ok(
        dir.path(),
        &["gen", "--synthetic", "gaussian", "--n-per-cluster", "40", "--dim", "2", "--clusters", "3", "--data-seed", "5", "--out", "other.csv"],
    );
    let o = delkm(dir.path(), &["delete", "--model", "b.json", "--csv", "other.csv", "--label-column", "2", "--row", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fingerprint"));
    let before = std::fs::read(dir.path().join("b.json")).unwrap();
    let o = delkm(dir.path(), &with(&["delete", "--model", "b.json", "--row", "999"], data));
    assert_eq!(o.status.code(), Some(2), "unknown row");
    assert_eq!(std::fs::read(dir.path().join("b.json")).unwrap(), before);
}

#[test]
fn fixed_seed_outputs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_csv(dir.path());
    for (algo, extra) in [("qkmeans", "--epsilon=0.05"), ("dckmeans", "--width=4"), ("baseline", "--height=1")] {
        let a = ok(dir.path(), &with(&["train", "--algo", algo, "--k", "3", extra, "--seed", "3", "--out", "a.json"], data));
        let b = ok(dir.path(), &with(&["train", "--algo", algo, "--k", "3", extra, "--seed", "3", "--out", "b.json"], data));
        assert_eq!(a.replace("a.json", "b.json"), b);
        assert_eq!(
            std::fs::read(dir.path().join("a.json")).unwrap(),
            std::fs::read(dir.path().join("b.json")).unwrap(),
            "{algo}"
        );
    }
    ok(dir.path(), &with(&["stream", "--m", "10", "--seed", "2", "--out", "s1.txt"], data));
    let o = Command::new(BIN)
        .args(with(&["stream", "--m", "10", "--out", "s2.txt"], data))
        .current_dir(dir.path())
        .env("DELKM_SEED", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let s1 = std::fs::read_to_string(dir.path().join("s1.txt")).unwrap();
    assert_eq!(s1, std::fs::read_to_string(dir.path().join("s2.txt")).unwrap());
    assert_eq!(s1.lines().count(), 10);

    let m1 = ok(dir.path(), &with(&["metrics", "--model", "a.json", "--reference"], data));
    let m2 = ok(dir.path(), &with(&["metrics", "--model", "a.json", "--reference"], data));
    assert_eq!(m1, m2);
    assert!(m1.contains("silhouette=") && m1.contains("nmi=") && m1.contains("loss_ratio="));
}

#[test]
fn bench_writes_reports_and_speedups() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_csv(dir.path());
    let out = ok(
        dir.path(),
        &with(
            &[
                "bench", "--algo", "all", "--k", "3", "--heuristic", "--m", "12", "--checkpoints", "1,10",
                "--replicates", "2", "--silhouette-cap", "50", "--out-dir", "r",
            ],
            data,
        ),
    );
    for name in ["baseline", "qkmeans", "dckmeans"] {
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("r/{name}.json"))).unwrap()).unwrap();
        assert_eq!(json["algorithm"]["name"], name);
        let idx: Vec<u64> = json["quality"].as_array().unwrap().iter().map(|q| q["index"].as_u64().unwrap()).collect();
        assert_eq!(idx, vec![1, 10]);
        let csv = std::fs::read_to_string(dir.path().join(format!("r/{name}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 2 * 12 + 1);
        assert!(out.lines().any(|l| l.starts_with(name) && l.trim_end().ends_with('x')), "{out}");
    }

    let out = ok(
        dir.path(),
        &with(
            &[
                "bench", "--algo", "qkmeans", "--k", "3", "--epsilon", "0.05", "--m", "5", "--replicates", "1",
                "--out-dir", "r2", "--baseline-report", "r/baseline.json",
            ],
            data,
        ),
    );
    assert!(out.lines().any(|l| l.starts_with("qkmeans") && l.trim_end().ends_with('x')), "{out}");
}

#[test]
fn heuristic_width_for_large_n() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "train", "--algo", "dckmeans", "--synthetic", "gaussian", "--n-per-cluster", "20000", "--clusters", "5",
            "--dim", "2", "--k", "5", "--heuristic", "--out", "dc.json",
        ],
    );
    assert!(out.contains("heuristic w=32"), "{out}");
    assert!(out.contains("n=100000"));
}
