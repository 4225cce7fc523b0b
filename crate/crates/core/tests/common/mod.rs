#![allow(dead_code)]

use std::path::{Path, PathBuf};

use dyhg::cli::{self, RunConfig};
use dyhg::data::SyntheticSpec;
use dyhg::numerics::Matrix;

/// A small synthetic dataset that trains in seconds.
pub fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        classes: 3,
        bags_per_class: 10,
        n_min: 32,
        n_max: 64,
        d: 16,
        prototypes: 6,
        noise: 0.1,
        seed,
    }
}

/// Generates `small_spec(seed)` under `dir` and returns the manifest path.
pub fn small_dataset(dir: &Path, seed: u64) -> PathBuf {
    cli::generate(&small_spec(seed), dir).expect("generate").manifest_path
}

pub fn small_run(manifest: &Path, out: &Path) -> RunConfig {
    RunConfig {
        manifest: manifest.to_path_buf(),
        hyperedges: 4,
        hidden: 16,
        epochs: 3,
        lr: 1e-3,
        seed: 7,
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

/// Naive `E = LeakyReLU(Aᵀ X)` with explicit loops.
pub fn naive_hyperedge_features(a: &Matrix<f64>, x: &Matrix<f64>, slope: f64) -> Vec<Vec<f64>> {
    let (n, h, d) = (a.rows(), a.cols(), x.cols());
    let mut e = vec![vec![0.0; d]; h];
    for hh in 0..h {
        for k in 0..d {
            let mut s = 0.0;
            for i in 0..n {
                s += a[(i, hh)] * x[(i, k)];
            }
            e[hh][k] = if s > 0.0 { s } else { slope * s };
        }
    }
    e
}

/// Naive `X' = LeakyReLU(A E)` with explicit loops.
pub fn naive_node_update(a: &Matrix<f64>, e: &[Vec<f64>], slope: f64) -> Vec<Vec<f64>> {
    let (n, h) = (a.rows(), a.cols());
    let d = e.first().map_or(0, |r| r.len());
    let mut out = vec![vec![0.0; d]; n];
    for i in 0..n {
        for k in 0..d {
            let mut s = 0.0;
            for hh in 0..h {
                s += a[(i, hh)] * e[hh][k];
            }
            out[i][k] = if s > 0.0 { s } else { slope * s };
        }
    }
    out
}

/// Metrics computed class by class straight from the prediction list,
/// without a confusion matrix.
pub struct OracleMetrics {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub specificity: f64,
    pub weighted_f1: f64,
}

pub fn oracle_metrics(pairs: &[(usize, usize)], classes: usize) -> OracleMetrics {
    let total = pairs.len();
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    let mut recall_sum = 0.0;
    let mut recall_n = 0usize;
    let mut spec_sum = 0.0;
    let mut spec_n = 0usize;
    let mut wf1 = 0.0;
    for c in 0..classes {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count();
        let fn_ = pairs.iter().filter(|&&(t, p)| t == c && p != c).count();
        let fp = pairs.iter().filter(|&&(t, p)| t != c && p == c).count();
        let tn = pairs.iter().filter(|&&(t, p)| t != c && p != c).count();
        if tp + fn_ > 0 {
            recall_sum += tp as f64 / (tp + fn_) as f64;
            recall_n += 1;
        }
        if tn + fp > 0 {
            spec_sum += tn as f64 / (tn + fp) as f64;
            spec_n += 1;
        }
        let denom = 2 * tp + fp + fn_;
        let f1 = if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        };
        wf1 += (tp + fn_) as f64 / total as f64 * f1;
    }
    OracleMetrics {
        accuracy: correct as f64 / total as f64,
        balanced_accuracy: recall_sum / recall_n as f64,
        specificity: if spec_n == 0 { 1.0 } else { spec_sum / spec_n as f64 },
        weighted_f1: wf1,
    }
}

pub fn is_distribution(values: &[f32], tol: f32) -> bool {
    values.iter().all(|&v| (0.0..=1.0).contains(&v)) && (values.iter().sum::<f32>() - 1.0).abs() <= tol
}
