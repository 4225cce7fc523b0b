use super::manifest::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::numerics::Rng;

pub const DEFAULT_RATIOS: [f64; 3] = [0.5, 0.2, 0.3];

/// Largest-remainder apportionment of `n` items over `ratios`. Ties in the
/// fractional part go to the earlier bucket.
pub fn apportion(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let raw = ratios.map(|r| r * n as f64);
    let mut counts = raw.map(|v| v.floor() as usize);
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Stratified train/val/test split. Each class is shuffled with its own
/// seeded stream and cut by [`apportion`]. Classes with fewer than three bags
/// are still apportioned (some splits then get none of that class) and are
/// reported in the returned warnings.
pub fn split_dataset(
    manifest: &DatasetManifest,
    ratios: &[f64; 3],
    seed: u64,
) -> Result<(DatasetManifest, Vec<String>)> {
    if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 || ratios.iter().any(|&r| r < 0.0) {
        return Err(Error::config(format!(
            "split ratios {ratios:?} must be nonnegative and sum to 1"
        )));
    }
    let base = Rng::seed_from(seed);
    let mut out = manifest.clone();
    let mut warnings = Vec::new();
    for c in 0..manifest.num_classes() {
        let mut idx: Vec<usize> = (0..manifest.entries.len())
            .filter(|&i| manifest.entries[i].label == c)
            .collect();
        if idx.len() < 3 {
            let msg = format!(
                "class {} has only {} bag(s); some splits will not contain it",
                manifest.class_names[c],
                idx.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        base.derive(c as u64).shuffle(&mut idx);
        let [train, val, _] = apportion(idx.len(), ratios);
        for (pos, &i) in idx.iter().enumerate() {
            out.entries[i].split = if pos < train {
                Split::Train
            } else if pos < train + val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    Ok((out, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::manifest::ManifestEntry;

    fn manifest(per_class: &[usize]) -> DatasetManifest {
        let mut entries = Vec::new();
        for (c, &n) in per_class.iter().enumerate() {
            for b in 0..n {
                entries.push(ManifestEntry {
                    id: format!("c{c}b{b}"),
                    path: format!("bags/c{c}b{b}.bag").into(),
                    label: c,
                    split: Split::Unassigned,
                });
            }
        }
        DatasetManifest {
            class_names: (0..per_class.len()).map(|c| format!("k{c}")).collect(),
            entries,
        }
    }

    #[test]
    fn ten_bags_split_five_two_three() {
        let (m, w) = split_dataset(&manifest(&[10]), &DEFAULT_RATIOS, 1).unwrap();
        assert!(w.is_empty());
        assert_eq!(
            (m.count(Split::Train), m.count(Split::Val), m.count(Split::Test)),
            (5, 2, 3)
        );
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let base = manifest(&[20, 13]);
        let a = split_dataset(&base, &DEFAULT_RATIOS, 4).unwrap().0;
        let b = split_dataset(&base, &DEFAULT_RATIOS, 4).unwrap().0;
        let c = split_dataset(&base, &DEFAULT_RATIOS, 5).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn per_class_counts_within_one_of_target() {
        let mut rng = Rng::seed_from(77);
        for trial in 0..50 {
            let sizes: Vec<usize> = (0..3).map(|_| 7 + rng.below(94)).collect();
            let (m, _) = split_dataset(&manifest(&sizes), &DEFAULT_RATIOS, trial).unwrap();
            for (c, &n) in sizes.iter().enumerate() {
                for (s, r) in [Split::Train, Split::Val, Split::Test].into_iter().zip(DEFAULT_RATIOS) {
                    let got = m.entries.iter().filter(|e| e.label == c && e.split == s).count() as f64;
                    assert!((got - r * n as f64).abs() <= 1.0, "class size {n}, split {s}: {got}");
                }
                let total = m
                    .entries
                    .iter()
                    .filter(|e| e.label == c && e.split != Split::Unassigned)
                    .count();
                assert_eq!(total, n);
            }
        }
    }

    #[test]
    fn tiny_classes_warn() {
        let (m, w) = split_dataset(&manifest(&[2, 10]), &DEFAULT_RATIOS, 0).unwrap();
        assert_eq!(w.len(), 1);
        assert!(m.entries.iter().all(|e| e.split != Split::Unassigned));
    }

    #[test]
    fn bad_ratios_rejected() {
        assert!(split_dataset(&manifest(&[5]), &[0.5, 0.5, 0.5], 0).is_err());
    }

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(10, &DEFAULT_RATIOS), [5, 2, 3]);
        assert_eq!(apportion(7, &DEFAULT_RATIOS), [4, 1, 2]);
        assert_eq!(apportion(0, &DEFAULT_RATIOS), [0, 0, 0]);
        assert_eq!(apportion(1, &DEFAULT_RATIOS), [1, 0, 0]);
    }
}
