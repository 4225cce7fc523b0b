//! The `dyhg` command line: dataset generation, training, evaluation,
//! ablation and hyperparameter sweeps, construction benchmarks and heatmap
//! export.

pub mod commands;
pub mod run;

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crate::data::{Split, SyntheticSpec};
use crate::dhcm::{BenchParams, ConstructionMethod, Variant};

pub use commands::{
    ablate, ablation_ordering, bench, cell_seed, eval, export_heatmap, generate, pgm, sweep, sweep_best, AblationRow,
    GenerateSummary, HeatmapFiles, SweepCell, MANIFEST_FILE,
};
pub use run::{evaluate, predict, run_training, train, EpochLog, RunConfig, RunSummary, TrainOutcome};

/// Environment variable capping the worker threads used for matrix products.
pub const THREADS_ENV: &str = "DYHG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dyhg", version, about = "Dynamic-hypergraph multiple-instance learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic motif dataset with a stratified 5:2:3 split.
    Generate(GenerateArgs),
    /// Train one model with per-epoch validation and model selection.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a split of a manifest.
    Eval(EvalArgs),
    /// Train all four construction variants and compare them on the test split.
    Ablate(TrainArgs),
    /// Grid over hyperedge counts and temperatures.
    Sweep(SweepArgs),
    /// Write incidence and attention matrices for one bag.
    ExportHeatmap(HeatmapArgs),
    /// Time hypergraph construction methods.
    BenchConstruction(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 60)]
    pub bags_per_class: usize,
    #[arg(long, default_value_t = 64)]
    pub n_min: usize,
    #[arg(long, default_value_t = 512)]
    pub n_max: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 12)]
    pub prototypes: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl GenerateArgs {
    pub fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            classes: self.classes,
            bags_per_class: self.bags_per_class,
            n_min: self.n_min,
            n_max: self.n_max,
            d: self.dim,
            prototypes: self.prototypes,
            noise: self.noise,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub hyperedges: usize,
    #[arg(long, default_value_t = 0.1)]
    pub temperature: f64,
    /// Attention hidden size.
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = Variant::Full)]
    pub variant: Variant,
    /// Keep Gumbel noise on during evaluation.
    #[arg(long)]
    pub eval_noise: bool,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl TrainArgs {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            manifest: self.manifest.clone(),
            hyperedges: self.hyperedges,
            temperature: self.temperature,
            hidden: self.hidden,
            variant: self.variant,
            eval_noise: self.eval_noise,
            epochs: self.epochs,
            lr: self.lr,
            weight_decay: self.weight_decay,
            seed: self.seed,
            out: self.out.clone(),
            ..RunConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = Split::Test)]
    pub split: Split,
    /// Only used when the checkpoint keeps noise on at evaluation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, value_delimiter = ',', default_value = "8,12,16,20,24,28")]
    pub hyperedge_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.15,0.2,0.25")]
    pub temperature_list: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub bag: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "dhcm,knn")]
    pub methods: Vec<ConstructionMethod>,
    #[arg(long = "n", value_delimiter = ',', default_value = "1000,2000,4000,8000")]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 20)]
    pub hyperedges: usize,
    #[arg(long, default_value_t = 0.1)]
    pub temperature: f64,
    #[arg(long, default_value_t = 10)]
    pub knn_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Sizes the global rayon pool from `DYHG_THREADS` when set.
pub fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let s = generate(&a.spec(), &a.out)?;
            println!("class,train,val,test");
            for (name, [tr, va, te]) in s.class_names.iter().zip(&s.counts) {
                println!("{name},{tr},{va},{te}");
            }
            println!("oracle accuracy: {:.4}", s.oracle_accuracy);
            println!("manifest: {}", s.manifest_path.display());
        }
        Command::Train(a) => {
            let s = run_training(&a.run_config())?;
            println!(
                "best epoch {} (val balanced accuracy {:.4}) in {:.1}s",
                s.outcome.best_epoch, s.val.balanced_accuracy, s.outcome.seconds
            );
            if let Some(t) = &s.test {
                println!("test: {}", report_line(t));
            }
        }
        Command::Eval(a) => {
            let report = eval(&a.checkpoint, &a.manifest, a.split, a.seed)?;
            let path = commands::write_eval(&a.out, a.split, &report)?;
            println!("{}: {}", a.split, report_line(&report));
            println!("wrote {}", path.display());
        }
        Command::Ablate(a) => {
            let rows = ablate(&a.run_config())?;
            print!("{}", commands::ablation_csv(&rows));
            println!("{}", ablation_ordering(&rows));
        }
        Command::Sweep(a) => {
            let cells = sweep(&a.train.run_config(), &a.hyperedge_list, &a.temperature_list)?;
            if let Some(b) = sweep_best(&cells) {
                println!(
                    "best cell: H={} tau={} test balanced accuracy {:.4}",
                    b.hyperedges, b.temperature, b.test_balanced_accuracy
                );
            }
        }
        Command::ExportHeatmap(a) => {
            let h = export_heatmap(&a.checkpoint, &a.bag, &a.out, a.seed)?;
            for p in &h.written {
                println!("wrote {}", p.display());
            }
        }
        Command::BenchConstruction(a) => {
            let params = BenchParams {
                num_hyperedges: a.hyperedges,
                temperature: a.temperature,
                knn_k: a.knn_k,
                seed: a.seed,
                ..BenchParams::default()
            };
            let rows = bench(&a.methods, &a.n_list, a.dim, a.reps, &params, &a.out)?;
            print!("{}", commands::bench_csv(&rows));
        }
    }
    Ok(())
}

fn report_line(m: &crate::data::MetricsReport) -> String {
    format!(
        "accuracy {:.4} balanced_accuracy {:.4} specificity {:.4} weighted_f1 {:.4}",
        m.accuracy, m.balanced_accuracy, m.specificity, m.weighted_f1
    )
}
