mod common;

use std::path::Path;
use std::process::{Command, Output};

use dyhg::cli::{self, cell_seed, RunConfig};
use dyhg::data::{read_bag, Split};

use common::*;

fn dyhg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyhg"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn dyhg")
}

fn ok(args: &[&str]) -> String {
    let out = dyhg(args);
    assert!(
        out.status.success(),
        "dyhg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn generate_small(dir: &Path) -> std::path::PathBuf {
    ok(&[
        "generate",
        "--classes",
        "3",
        "--bags-per-class",
        "10",
        "--n-min",
        "32",
        "--n-max",
        "64",
        "--dim",
        "16",
        "--prototypes",
        "6",
        "--seed",
        "3",
        "--out",
        s(dir),
    ]);
    dir.join("manifest.tsv")
}

#[test]
fn generate_is_reproducible_and_reports_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let out = ok(&["generate", "--out", s(&a)]);
    ok(&["generate", "--out", s(&b)]);
    assert!(out.starts_with("class,train,val,test\n"));
    assert!(out.contains("class0,30,12,18"));
    assert!(out.contains("oracle accuracy: 1.0000"));
    let ma = std::fs::read(a.join("manifest.tsv")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("manifest.tsv")).unwrap());
    assert_eq!(String::from_utf8(ma).unwrap().lines().count(), 241);
    assert_eq!(
        std::fs::read(a.join("bags/c2_b0007.bag")).unwrap(),
        std::fs::read(b.join("bags/c2_b0007.bag")).unwrap()
    );
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec![
            "generate",
            "--classes",
            "4",
            "--prototypes",
            "4",
            "--out",
            s(tmp.path()),
        ],
        vec![
            "train",
            "--manifest",
            "/nonexistent/manifest.tsv",
            "--out",
            s(tmp.path()),
        ],
        vec![
            "eval",
            "--checkpoint",
            "/nonexistent.ckpt",
            "--manifest",
            "m.tsv",
            "--out",
            s(tmp.path()),
        ],
    ] {
        let out = dyhg(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error: "), "{err}");
    }
    let out = dyhg(&[
        "generate",
        "--classes",
        "4",
        "--prototypes",
        "4",
        "--out",
        s(tmp.path()),
    ]);
    assert!(String::from_utf8(out.stderr).unwrap().contains("infeasible"));
}

#[test]
fn corrupt_checkpoint_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = generate_small(&tmp.path().join("data"));
    let ckpt = tmp.path().join("bad.ckpt");
    std::fs::write(&ckpt, b"DYHGCKPT\x01\x00").unwrap();
    let out = dyhg(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&manifest),
        "--out",
        s(tmp.path()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("truncated"));
}

#[test]
fn train_eval_and_heatmap_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = generate_small(&tmp.path().join("data"));
    let run = tmp.path().join("run");
    ok(&[
        "train",
        "--manifest",
        s(&manifest),
        "--hyperedges",
        "4",
        "--temperature",
        "0.2",
        "--hidden",
        "16",
        "--epochs",
        "4",
        "--lr",
        "1e-3",
        "--seed",
        "9",
        "--out",
        s(&run),
    ]);
    for f in ["config.json", "train_log.csv", "model.ckpt", "metrics.csv"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let log = csv_rows(&run.join("train_log.csv"));
    assert_eq!(log[0], ["epoch", "train_loss", "val_acc", "val_bal_acc"]);
    assert_eq!(log.len(), 5);

    // The checkpoint must score the best validation balanced accuracy in the log.
    let best = log[1..]
        .iter()
        .map(|r| r[3].parse::<f64>().unwrap())
        .fold(f64::MIN, f64::max);
    let val = cli::eval(&run.join("model.ckpt"), &manifest, Split::Val, 9).unwrap();
    assert_eq!(val.balanced_accuracy, best);

    let config: RunConfig = serde_json::from_str(&std::fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!((config.hyperedges, config.epochs, config.d), (4, 4, Some(16)));

    let ckpt = run.join("model.ckpt");
    let e1 = ok(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&manifest),
        "--out",
        s(&tmp.path().join("e1")),
    ]);
    let e2 = ok(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&manifest),
        "--out",
        s(&tmp.path().join("e2")),
    ]);
    assert_eq!(e1.lines().next(), e2.lines().next());
    let metrics = csv_rows(&run.join("metrics.csv"));
    let eval_csv = csv_rows(&tmp.path().join("e1/eval_test.csv"));
    assert_eq!(eval_csv[1], metrics[2]);

    let bag = tmp.path().join("data/bags/c1_b0003.bag");
    let n = read_bag(&bag).unwrap().num_patches();
    let hm = tmp.path().join("heatmap");
    ok(&[
        "export-heatmap",
        "--checkpoint",
        s(&ckpt),
        "--bag",
        s(&bag),
        "--out",
        s(&hm),
    ]);
    let inc = csv_rows(&hm.join("incidence.csv"));
    assert_eq!((inc.len() - 1, inc[0].len()), (n, 4));
    for row in &inc[1..] {
        let sum: f64 = row.iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-5);
    }
    let att = csv_rows(&hm.join("attention.csv"));
    let sum: f64 = att[1..].iter().map(|r| r[0].parse::<f64>().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-5);
    let map = csv_rows(&hm.join("attention_map.csv"));
    assert_eq!(map[0], ["row", "col", "score"]);
    assert_eq!(map.len(), n + 1);
    let pgm = std::fs::read(hm.join("incidence.pgm")).unwrap();
    let header = format!("P5\n4 {n}\n255\n");
    assert!(pgm.starts_with(header.as_bytes()));
    assert_eq!(pgm.len(), header.len() + 4 * n);
    assert!(std::fs::read(hm.join("attention.pgm"))
        .unwrap()
        .starts_with(format!("P5\n1 {n}\n255\n").as_bytes()));
}

#[test]
fn train_rejects_dimension_mismatch_and_missing_splits() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_dataset(&tmp.path().join("data"), 1);
    let mut run = small_run(&manifest, &tmp.path().join("run"));
    run.d = Some(32);
    assert!(cli::run_training(&run).is_err());

    let text = std::fs::read_to_string(&manifest).unwrap().replace("\tval", "\ttest");
    let no_val = tmp.path().join("data/no_val.tsv");
    std::fs::write(&no_val, text).unwrap();
    let err = cli::run_training(&small_run(&no_val, &tmp.path().join("run2"))).unwrap_err();
    assert!(err.to_string().contains("val"), "{err}");
}

#[test]
fn sweep_grid_and_cell_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = generate_small(&tmp.path().join("data"));
    let out = tmp.path().join("sweep");
    let args = [
        "sweep",
        "--manifest",
        s(&manifest),
        "--hidden",
        "8",
        "--epochs",
        "1",
        "--hyperedge-list",
        "2,3",
        "--temperature-list",
        "0.1,0.5,1",
        "--seed",
        "4",
        "--out",
        s(&out),
    ];
    let stdout = ok(&args);
    assert!(stdout.contains("best cell: H="));
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0][..2], ["hyperedges", "temperature"]);
    assert_eq!(
        rows[4][..3],
        ["3".to_string(), "0.1".into(), cell_seed(4, 3).to_string()]
    );
    let first = std::fs::read(out.join("sweep.csv")).unwrap();
    ok(&args);
    assert_eq!(first, std::fs::read(out.join("sweep.csv")).unwrap());

    let empty = dyhg(&[
        "sweep",
        "--manifest",
        s(&manifest),
        "--hyperedge-list",
        "",
        "--out",
        s(&out),
    ]);
    assert!(!empty.status.success());
}

#[test]
fn ablate_writes_four_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = generate_small(&tmp.path().join("data"));
    let out = tmp.path().join("ablate");
    let stdout = ok(&[
        "ablate",
        "--manifest",
        s(&manifest),
        "--hyperedges",
        "3",
        "--hidden",
        "8",
        "--epochs",
        "1",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("no_sampling > no_gumbel"));
    let rows = csv_rows(&out.join("ablation.csv"));
    assert_eq!(rows.len(), 5);
    let names: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["full", "no_gumbel", "no_gumbel_no_temp", "no_sampling"]);
    for v in names {
        assert!(out.join(v).join("model.ckpt").exists());
    }
}

#[test]
fn bench_emits_one_row_per_method_and_size() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&[
        "bench-construction",
        "--methods",
        "dhcm,knn,kmeans",
        "--n",
        "200,400",
        "--dim",
        "8",
        "--reps",
        "3",
        "--out",
        s(tmp.path()),
    ]);
    let rows = csv_rows(&tmp.path().join("bench.csv"));
    assert_eq!(rows[0], ["method", "N", "d", "reps", "mean_seconds"]);
    assert_eq!(rows.len(), 7);
    assert!(rows[1..].iter().all(|r| r[4].parse::<f64>().unwrap() > 0.0));
    let too_few = dyhg(&[
        "bench-construction",
        "--reps",
        "2",
        "--n",
        "100",
        "--out",
        s(tmp.path()),
    ]);
    assert!(!too_few.status.success());
}

#[test]
fn threads_env_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dyhg"))
        .args(["generate", "--out", s(tmp.path())])
        .env("DYHG_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("DYHG_THREADS"));
}
