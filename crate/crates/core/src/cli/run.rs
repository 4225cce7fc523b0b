//! Training with per-epoch validation, model selection and evaluation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{compute_metrics, Dataset, FeatureBag, MetricsReport, Split};
use crate::dhcm::{DhcmConfig, Noise, Variant};
use crate::error::{Error, Result};
use crate::model::{self, adam_step, checkpoint, AdamConfig, ModelConfig, ModelParams};
use crate::numerics::Rng;

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_EVAL: u64 = 4;

pub const CONFIG_FILE: &str = "config.json";
pub const LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

/// Everything needed to reproduce a training run from the dataset files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    /// Patch dimension; taken from the bags when unset.
    pub d: Option<usize>,
    pub hyperedges: usize,
    pub temperature: f64,
    pub hidden: usize,
    pub variant: Variant,
    pub leaky_slope: f64,
    pub eval_noise: bool,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let dhcm = DhcmConfig::default();
        let adam = AdamConfig::default();
        Self {
            manifest: PathBuf::from("manifest.tsv"),
            d: None,
            hyperedges: dhcm.num_hyperedges,
            temperature: dhcm.temperature,
            hidden: 256,
            variant: dhcm.variant,
            leaky_slope: 0.01,
            eval_noise: dhcm.eval_noise,
            epochs: 50,
            lr: adam.lr,
            weight_decay: adam.weight_decay,
            seed: 0,
            out: PathBuf::from("run"),
        }
    }
}

impl RunConfig {
    pub fn model_config(&self, d: usize, classes: usize) -> Result<ModelConfig> {
        if let Some(want) = self.d {
            if want != d {
                return Err(Error::config(format!(
                    "configured d={want} but bags have dimension {d}"
                )));
            }
        }
        let cfg = ModelConfig {
            d,
            hidden: self.hidden,
            classes,
            leaky_slope: self.leaky_slope,
            dhcm: DhcmConfig {
                num_hyperedges: self.hyperedges,
                temperature: self.temperature,
                variant: self.variant,
                eval_noise: self.eval_noise,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config(format!(
                "invalid optimizer settings lr={} weight_decay={}",
                self.lr, self.weight_decay
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_bal_acc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ModelConfig,
    /// Parameters at the selected epoch.
    pub params: ModelParams<f32>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    pub seconds: f64,
}

/// Bags of one split with the patch dimension they share.
fn check_bags(bags: &[FeatureBag], split: Split, classes: usize) -> Result<usize> {
    let first = bags
        .first()
        .ok_or_else(|| Error::Data(format!("manifest has no {split} bags")))?;
    let d = first.dim();
    for b in bags {
        if b.dim() != d {
            return Err(Error::Data(format!(
                "bag {} has dimension {} but bag {} has {d}",
                b.id,
                b.dim(),
                first.id
            )));
        }
        if b.label >= classes {
            return Err(Error::Data(format!("bag {} label {} out of range", b.id, b.label)));
        }
    }
    Ok(d)
}

/// Trains on `train`, evaluates on `val` after every epoch and keeps the
/// parameters of the first epoch reaching the best validation balanced
/// accuracy.
pub fn train(run: &RunConfig, train: &[FeatureBag], val: &[FeatureBag], classes: usize) -> Result<TrainOutcome> {
    run.validate()?;
    let d = check_bags(train, Split::Train, classes)?;
    let dv = check_bags(val, Split::Val, classes)?;
    if dv != d {
        return Err(Error::Data(format!(
            "train bags have d={d} but validation bags have d={dv}"
        )));
    }
    let cfg = run.model_config(d, classes)?;
    let adam = run.adam();
    let root = Rng::seed_from(run.seed);
    let mut params: ModelParams<f32> = model::init_params(&cfg, &mut root.derive(STREAM_INIT));
    let mut noise_rng = root.derive(STREAM_NOISE);
    let shuffle_root = root.derive(STREAM_SHUFFLE);

    let start = Instant::now();
    let mut log = Vec::with_capacity(run.epochs);
    let mut best: Option<(f64, usize, ModelParams<f32>)> = None;
    let mut step = 0u64;
    for epoch in 1..=run.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        shuffle_root.derive(epoch as u64).shuffle(&mut order);
        let mut total = 0.0;
        for &i in &order {
            let bag = &train[i];
            let (loss, _) = model::loss_and_grad(
                &bag.features,
                bag.label,
                &mut params,
                &cfg,
                Noise::Sample(&mut noise_rng),
            )?;
            if !loss.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite loss on bag {} in epoch {epoch}",
                    bag.id
                )));
            }
            total += loss as f64;
            step += 1;
            adam_step(&mut params, &adam, step);
        }
        let (report, _) = evaluate(val, &params, &cfg, run.seed)?;
        let entry = EpochLog {
            epoch,
            train_loss: total / train.len() as f64,
            val_acc: report.accuracy,
            val_bal_acc: report.balanced_accuracy,
        };
        log::info!(
            "epoch {epoch}/{}: loss {:.4} val_acc {:.4} val_bal_acc {:.4}",
            run.epochs,
            entry.train_loss,
            entry.val_acc,
            entry.val_bal_acc
        );
        if best.as_ref().is_none_or(|(b, _, _)| entry.val_bal_acc > *b) {
            best = Some((entry.val_bal_acc, epoch, params.clone()));
        }
        log.push(entry);
    }
    let (_, best_epoch, mut best_params) = best.expect("at least one epoch");
    best_params.zero_grad();
    Ok(TrainOutcome {
        model: cfg,
        params: best_params,
        best_epoch,
        log,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Predicted class per bag. Noise is off unless the config asks for it at
/// evaluation time, in which case each bag gets its own stream from `seed`.
pub fn predict(bags: &[FeatureBag], params: &ModelParams<f32>, cfg: &ModelConfig, seed: u64) -> Result<Vec<usize>> {
    let eval_root = Rng::seed_from(seed).derive(STREAM_EVAL);
    bags.par_iter()
        .enumerate()
        .map(|(i, bag)| {
            let pred = if cfg.dhcm.uses_noise(false) {
                let mut rng = eval_root.derive(i as u64);
                model::forward(&bag.features, params, cfg, Noise::Sample(&mut rng), false)?
            } else {
                model::forward(&bag.features, params, cfg, Noise::Off, false)?
            };
            Ok(pred.predicted_class())
        })
        .collect()
}

pub fn evaluate(
    bags: &[FeatureBag],
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(MetricsReport, Vec<usize>)> {
    let preds = predict(bags, params, cfg, seed)?;
    let pairs: Vec<(usize, usize)> = bags.iter().zip(&preds).map(|(b, &p)| (b.label, p)).collect();
    Ok((compute_metrics(&pairs, cfg.classes)?, preds))
}

/// Result of a full training command: the outcome plus test metrics when the
/// manifest has a test split.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub outcome: TrainOutcome,
    pub val: MetricsReport,
    pub test: Option<MetricsReport>,
}

pub fn metrics_csv(rows: &[(&str, &MetricsReport)]) -> String {
    let mut s = format!("split,{}\n", MetricsReport::csv_header());
    for (name, m) in rows {
        s.push_str(&format!("{name},{}\n", m.csv_values()));
    }
    s
}

pub fn log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,train_loss,val_acc,val_bal_acc\n");
    for e in log {
        s.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.train_loss, e.val_acc, e.val_bal_acc
        ));
    }
    s
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads the manifest's splits, trains, and writes the run directory:
/// config, per-epoch log, selected checkpoint and metrics.
pub fn run_training(run: &RunConfig) -> Result<RunSummary> {
    let data = Dataset::open(&run.manifest)?;
    let classes = data.manifest.num_classes();
    let train_bags = data.load_split(Split::Train)?;
    let val_bags = data.load_split(Split::Val)?;
    let test_bags = data.load_split(Split::Test)?;
    let outcome = train(run, &train_bags, &val_bags, classes)?;

    let (val, _) = evaluate(&val_bags, &outcome.params, &outcome.model, run.seed)?;
    let test = if test_bags.is_empty() {
        None
    } else {
        Some(evaluate(&test_bags, &outcome.params, &outcome.model, run.seed)?.0)
    };

    let mut resolved = run.clone();
    resolved.d = Some(outcome.model.d);
    let json =
        serde_json::to_string_pretty(&resolved).map_err(|e| Error::Data(format!("serializing run config: {e}")))?;
    write_text(&run.out.join(CONFIG_FILE), &(json + "\n"))?;
    write_text(&run.out.join(LOG_FILE), &log_csv(&outcome.log))?;
    checkpoint::save(&run.out.join(CHECKPOINT_FILE), &outcome.model, &outcome.params)?;
    let mut rows = vec![("val", &val)];
    if let Some(t) = &test {
        rows.push(("test", t));
    }
    write_text(&run.out.join(METRICS_FILE), &metrics_csv(&rows))?;
    Ok(RunSummary { outcome, val, test })
}
