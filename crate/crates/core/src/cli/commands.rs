use std::path::{Path, PathBuf};

use crate::data::{
    generate_synthetic, read_bag, split_dataset, Dataset, MetricsReport, Split, SyntheticSpec, DEFAULT_RATIOS,
};
use crate::dhcm::{time_construction, BenchParams, ConstructionMethod, Noise, Variant};
use crate::error::{Error, Result};
use crate::model::{self, checkpoint};
use crate::numerics::{Matrix, Rng};

use super::run::{self, metrics_csv, write_text, RunConfig, RunSummary};

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Clone, Debug)]
pub struct GenerateSummary {
    pub manifest_path: PathBuf,
    pub class_names: Vec<String>,
    /// Per class: train, val, test counts.
    pub counts: Vec<[usize; 3]>,
    pub oracle_accuracy: f64,
}

/// Writes a synthetic dataset with a stratified 5:2:3 split into `dir`.
pub fn generate(spec: &SyntheticSpec, dir: &Path) -> Result<GenerateSummary> {
    spec.validate()?;
    let report = generate_synthetic(spec, dir)?;
    let (manifest, _) = split_dataset(&report.manifest, &DEFAULT_RATIOS, spec.seed)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    manifest.write(&manifest_path)?;
    let counts = (0..manifest.num_classes())
        .map(|c| {
            [Split::Train, Split::Val, Split::Test]
                .map(|s| manifest.entries.iter().filter(|e| e.label == c && e.split == s).count())
        })
        .collect();
    Ok(GenerateSummary {
        manifest_path,
        class_names: manifest.class_names.clone(),
        counts,
        oracle_accuracy: report.oracle_accuracy,
    })
}

/// Evaluates a saved checkpoint on one split of a manifest.
pub fn eval(checkpoint_path: &Path, manifest: &Path, split: Split, seed: u64) -> Result<MetricsReport> {
    let (cfg, params) = checkpoint::load(checkpoint_path)?;
    let data = Dataset::open(manifest)?;
    if data.manifest.num_classes() != cfg.classes {
        return Err(Error::config(format!(
            "checkpoint has {} classes but manifest has {}",
            cfg.classes,
            data.manifest.num_classes()
        )));
    }
    let bags = data.load_split(split)?;
    if bags.is_empty() {
        return Err(Error::Data(format!("manifest has no {split} bags")));
    }
    if let Some(b) = bags.iter().find(|b| b.dim() != cfg.d) {
        return Err(Error::config(format!(
            "bag {} has dimension {} but checkpoint expects {}",
            b.id,
            b.dim(),
            cfg.d
        )));
    }
    Ok(run::evaluate(&bags, &params, &cfg, seed)?.0)
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub variant: Variant,
    pub best_epoch: usize,
    pub metrics: MetricsReport,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("variant,best_epoch,{}\n", MetricsReport::csv_header());
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.variant, r.best_epoch, r.metrics.csv_values()));
    }
    s
}

/// Trains every variant with the same seed and data and scores each on the
/// test split. Each variant's run directory is `out/<variant>/`.
pub fn ablate(base: &RunConfig) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(Variant::ALL.len());
    for variant in Variant::ALL {
        let run = RunConfig {
            variant,
            out: base.out.join(variant.name()),
            ..base.clone()
        };
        let RunSummary { outcome, test, .. } = run::run_training(&run)?;
        let metrics = test.ok_or_else(|| Error::Data("ablation needs a test split".into()))?;
        rows.push(AblationRow {
            variant,
            best_epoch: outcome.best_epoch,
            metrics,
        });
    }
    write_text(&base.out.join("ablation.csv"), &ablation_csv(&rows))?;
    Ok(rows)
}

/// Human-readable comparison of the sampling ablation against the expectation
/// that dropping sampling hurts less than dropping the Gumbel noise.
pub fn ablation_ordering(rows: &[AblationRow]) -> String {
    let mut sorted: Vec<&AblationRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.metrics.balanced_accuracy.total_cmp(&a.metrics.balanced_accuracy));
    let order = sorted
        .iter()
        .map(|r| format!("{} ({:.4})", r.variant, r.metrics.balanced_accuracy))
        .collect::<Vec<_>>()
        .join(" > ");
    let score = |v: Variant| {
        rows.iter()
            .find(|r| r.variant == v)
            .map(|r| r.metrics.balanced_accuracy)
    };
    let expectation = match (
        score(Variant::NoSampling),
        score(Variant::NoGumbel),
        score(Variant::NoGumbelNoTemp),
    ) {
        (Some(s), Some(g), Some(gt)) if s > g && s > gt => "matches",
        (Some(_), Some(_), Some(_)) => "does not match",
        _ => "cannot be compared with",
    };
    format!("ordering by test balanced accuracy: {order}; {expectation} the expectation no_sampling > no_gumbel, no_gumbel_no_temp")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub hyperedges: usize,
    pub temperature: f64,
    pub seed: u64,
    pub best_epoch: usize,
    pub val_balanced_accuracy: f64,
    pub test_balanced_accuracy: f64,
}

/// Seed for grid cell `index` of a sweep started from `base`.
pub fn cell_seed(base: u64, index: usize) -> u64 {
    Rng::seed_from(base).derive(index as u64).seed()
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = String::from("hyperedges,temperature,seed,best_epoch,val_balanced_accuracy,test_balanced_accuracy\n");
    for c in cells {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.hyperedges, c.temperature, c.seed, c.best_epoch, c.val_balanced_accuracy, c.test_balanced_accuracy
        ));
    }
    s
}

/// Cartesian sweep over hyperedge counts and temperatures, H-major. Writes
/// `out/sweep.csv` only; cells keep no checkpoints.
pub fn sweep(base: &RunConfig, hyperedges: &[usize], temperatures: &[f64]) -> Result<Vec<SweepCell>> {
    if hyperedges.is_empty() || temperatures.is_empty() {
        return Err(Error::config(
            "sweep needs at least one hyperedge count and one temperature",
        ));
    }
    let data = Dataset::open(&base.manifest)?;
    let classes = data.manifest.num_classes();
    let train_bags = data.load_split(Split::Train)?;
    let val_bags = data.load_split(Split::Val)?;
    let test_bags = data.load_split(Split::Test)?;
    if test_bags.is_empty() {
        return Err(Error::Data("sweep needs a test split".into()));
    }
    let mut cells = Vec::with_capacity(hyperedges.len() * temperatures.len());
    for &h in hyperedges {
        for &tau in temperatures {
            let seed = cell_seed(base.seed, cells.len());
            let run = RunConfig {
                hyperedges: h,
                temperature: tau,
                seed,
                ..base.clone()
            };
            let outcome = run::train(&run, &train_bags, &val_bags, classes)?;
            let (test, _) = run::evaluate(&test_bags, &outcome.params, &outcome.model, seed)?;
            let best = &outcome.log[outcome.best_epoch - 1];
            log::info!(
                "sweep H={h} tau={tau}: test balanced accuracy {:.4}",
                test.balanced_accuracy
            );
            cells.push(SweepCell {
                hyperedges: h,
                temperature: tau,
                seed,
                best_epoch: outcome.best_epoch,
                val_balanced_accuracy: best.val_bal_acc,
                test_balanced_accuracy: test.balanced_accuracy,
            });
        }
    }
    write_text(&base.out.join("sweep.csv"), &sweep_csv(&cells))?;
    Ok(cells)
}

/// First cell with the highest test balanced accuracy.
pub fn sweep_best(cells: &[SweepCell]) -> Option<&SweepCell> {
    cells.iter().fold(None, |best: Option<&SweepCell>, c| match best {
        Some(b) if b.test_balanced_accuracy >= c.test_balanced_accuracy => Some(b),
        _ => Some(c),
    })
}

pub fn matrix_csv(m: &Matrix<f32>, prefix: &str) -> String {
    let header: Vec<String> = (0..m.cols()).map(|j| format!("{prefix}{j}")).collect();
    let mut s = header.join(",") + "\n";
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Binary 8-bit PGM of `m`, min-max normalized. A constant matrix renders black.
pub fn pgm(m: &Matrix<f32>) -> Vec<u8> {
    let (lo, hi) = m
        .as_slice()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", m.cols(), m.rows()).into_bytes();
    out.extend(m.as_slice().iter().map(|&v| {
        if span > 0.0 {
            ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    out
}

#[derive(Clone, Debug)]
pub struct HeatmapFiles {
    pub incidence: Matrix<f32>,
    pub attention: Matrix<f32>,
    pub written: Vec<PathBuf>,
}

/// Runs one evaluation-mode forward pass and writes the incidence and
/// attention matrices as CSV and PGM, plus a coordinate map when the bag has
/// patch coordinates.
pub fn export_heatmap(checkpoint_path: &Path, bag_path: &Path, out: &Path, seed: u64) -> Result<HeatmapFiles> {
    let (cfg, params) = checkpoint::load(checkpoint_path)?;
    let bag = read_bag(bag_path)?;
    let pred = if cfg.dhcm.uses_noise(false) {
        let mut rng = Rng::seed_from(seed);
        model::forward(&bag.features, &params, &cfg, Noise::Sample(&mut rng), false)?
    } else {
        model::forward(&bag.features, &params, &cfg, Noise::Off, false)?
    };
    let incidence = pred.incidence.values;
    let attention = pred.attention;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = out.join(name);
        crate::binio::write_file(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    put("incidence.csv", matrix_csv(&incidence, "h").into_bytes())?;
    put("attention.csv", matrix_csv(&attention, "attention").into_bytes())?;
    put("incidence.pgm", pgm(&incidence))?;
    put("attention.pgm", pgm(&attention))?;
    if let Some(coords) = &bag.coords {
        let mut s = String::from("row,col,score\n");
        for (&(r, c), &a) in coords.iter().zip(attention.as_slice()) {
            s.push_str(&format!("{r},{c},{a}\n"));
        }
        put("attention_map.csv", s.into_bytes())?;
    }
    Ok(HeatmapFiles {
        incidence,
        attention,
        written,
    })
}

pub fn bench_csv(rows: &[crate::dhcm::TimingRow]) -> String {
    let mut s = String::from("method,N,d,reps,mean_seconds\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method.name(),
            r.n,
            r.d,
            r.reps,
            r.mean_seconds
        ));
    }
    s
}

/// Times each construction method at each N and writes `out/bench.csv`.
pub fn bench(
    methods: &[ConstructionMethod],
    n_list: &[usize],
    d: usize,
    reps: usize,
    params: &BenchParams,
    out: &Path,
) -> Result<Vec<crate::dhcm::TimingRow>> {
    if methods.is_empty() || n_list.is_empty() {
        return Err(Error::config("bench needs at least one method and one N"));
    }
    let mut rows = Vec::new();
    for &m in methods {
        rows.extend(time_construction(m, n_list, d, reps, params)?);
    }
    write_text(&out.join("bench.csv"), &bench_csv(&rows))?;
    Ok(rows)
}

pub fn write_eval(out: &Path, split: Split, report: &MetricsReport) -> Result<PathBuf> {
    let path = out.join(format!("eval_{split}.csv"));
    write_text(&path, &metrics_csv(&[(split.name(), report)]))?;
    Ok(path)
}
