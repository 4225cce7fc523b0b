//! Synthetic bags whose label is carried by the co-occurrence of two sparse
//! motifs.
//!
//! `K` unit-norm prototypes are drawn. Prototypes `0..=C` are signal motifs:
//! a bag of class `c` contains a few patches of motif `c` and a few of motif
//! `c + 1`, each between 2% and 10% of the bag, at random positions. Every
//! other patch is background, drawn from prototypes `C+1..K` (or the origin
//! when `K = C + 1`). Each patch is its prototype plus isotropic Gaussian
//! noise. Adjacent classes share a motif, so no single motif identifies a
//! class; only the pair does.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bag::{write_bag, FeatureBag};
use super::manifest::{DatasetManifest, ManifestEntry, Split};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

const SIGNAL_FRACTION: (f64, f64) = (0.02, 0.10);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub bags_per_class: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub d: usize,
    pub prototypes: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            bags_per_class: 60,
            n_min: 64,
            n_max: 512,
            d: 64,
            prototypes: 12,
            noise: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 1 {
            return Err(Error::config("need at least one class"));
        }
        if self.prototypes < self.classes + 1 {
            return Err(Error::config(format!(
                "infeasible spec: {} prototypes cannot carry {} class motif pairs (need at least {})",
                self.prototypes,
                self.classes,
                self.classes + 1
            )));
        }
        if !(32..=2048).contains(&self.n_min) || !(self.n_min..=2048).contains(&self.n_max) {
            return Err(Error::config(format!(
                "patch count range [{}, {}] must lie within [32, 2048]",
                self.n_min, self.n_max
            )));
        }
        if self.d == 0 || self.bags_per_class == 0 {
            return Err(Error::config("d and bags_per_class must be positive"));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::config(format!(
                "noise must be finite and >= 0, got {}",
                self.noise
            )));
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.classes).map(|c| format!("class{c}")).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub class_names: Vec<String>,
    /// K×d unit-norm prototypes.
    pub prototypes: Matrix<f32>,
    pub bags: Vec<FeatureBag>,
}

pub fn synthesize(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = Rng::seed_from(spec.seed);
    let (k, d) = (spec.prototypes, spec.d);

    let mut prototypes = Matrix::<f64>::zeros(k, d);
    for p in 0..k {
        let row: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (dst, v) in prototypes.row_mut(p).iter_mut().zip(row) {
            *dst = v / norm;
        }
    }
    let background: Vec<usize> = (spec.classes + 1..k).collect();
    let origin = vec![0.0; d];

    let mut bags = Vec::with_capacity(spec.classes * spec.bags_per_class);
    for c in 0..spec.classes {
        for b in 0..spec.bags_per_class {
            let n = spec.n_min + rng.below(spec.n_max - spec.n_min + 1);
            let count = |rng: &mut Rng| {
                let f = rng.uniform_range(SIGNAL_FRACTION.0, SIGNAL_FRACTION.1);
                ((f * n as f64).round() as usize).max(1)
            };
            let (na, nb) = (count(&mut rng), count(&mut rng));
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);

            let mut source = vec![None; n];
            for &pos in &order[..na] {
                source[pos] = Some(c);
            }
            for &pos in &order[na..na + nb] {
                source[pos] = Some(c + 1);
            }
            let mut features = Matrix::<f32>::zeros(n, d);
            for (i, src) in source.iter().enumerate() {
                let centre: &[f64] = match src {
                    Some(p) => prototypes.row(*p),
                    None if background.is_empty() => &origin,
                    None => prototypes.row(background[rng.below(background.len())]),
                };
                for (dst, &m) in features.row_mut(i).iter_mut().zip(centre) {
                    *dst = (m + spec.noise * rng.normal()) as f32;
                }
            }
            let width = (n as f64).sqrt().ceil() as usize;
            let coords = (0..n).map(|i| ((i / width) as i32, (i % width) as i32)).collect();
            bags.push(FeatureBag {
                id: format!("c{c}_b{b:04}"),
                features,
                label: c,
                coords: Some(coords),
            });
        }
    }
    Ok(SyntheticData {
        class_names: spec.class_names(),
        prototypes: prototypes.cast(),
        bags,
    })
}

/// Labels a bag by decoding every patch to its nearest prototype (or the
/// origin when there is no background prototype) and looking for the motif
/// pair `{c, c+1}` among the signal prototypes present.
pub fn oracle_decode(bag: &FeatureBag, prototypes: &Matrix<f32>, classes: usize) -> Option<usize> {
    let k = prototypes.rows();
    let with_origin = k == classes + 1;
    let mut present = vec![false; classes + 1];
    for i in 0..bag.num_patches() {
        let x = bag.features.row(i);
        let dist = |p: &[f32]| -> f64 { x.iter().zip(p).map(|(&a, &b)| ((a - b) as f64).powi(2)).sum() };
        let mut best = (f64::INFINITY, usize::MAX);
        for p in 0..k {
            let dd = dist(prototypes.row(p));
            if dd < best.0 {
                best = (dd, p);
            }
        }
        if with_origin && x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() < best.0 {
            continue;
        }
        if best.1 <= classes {
            present[best.1] = true;
        }
    }
    let hits: Vec<usize> = (0..classes).filter(|&c| present[c] && present[c + 1]).collect();
    let motifs = present.iter().filter(|&&p| p).count();
    match hits.as_slice() {
        [c] if motifs == 2 => Some(*c),
        _ => None,
    }
}

pub fn oracle_accuracy(data: &SyntheticData) -> f64 {
    let classes = data.class_names.len();
    let correct = data
        .bags
        .iter()
        .filter(|b| oracle_decode(b, &data.prototypes, classes) == Some(b.label))
        .count();
    correct as f64 / data.bags.len() as f64
}

#[derive(Clone, Debug)]
pub struct SyntheticReport {
    /// Manifest with every bag `Unassigned`.
    pub manifest: DatasetManifest,
    pub oracle_accuracy: f64,
}

/// Synthesizes the dataset and writes one bag file per bag under
/// `dir/bags/`. The returned manifest is not written; split it first.
pub fn generate_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<SyntheticReport> {
    let data = synthesize(spec)?;
    let oracle_accuracy = oracle_accuracy(&data);
    let mut entries = Vec::with_capacity(data.bags.len());
    for bag in &data.bags {
        let rel = PathBuf::from("bags").join(format!("{}.bag", bag.id));
        write_bag(&dir.join(&rel), bag)?;
        entries.push(ManifestEntry {
            id: bag.id.clone(),
            path: rel,
            label: bag.label,
            split: Split::Unassigned,
        });
    }
    Ok(SyntheticReport {
        manifest: DatasetManifest {
            class_names: data.class_names,
            entries,
        },
        oracle_accuracy,
    })
}
