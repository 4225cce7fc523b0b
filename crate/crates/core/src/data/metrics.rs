use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bag-level classification metrics, all derived from the confusion matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Mean recall over classes present in the ground truth.
    pub balanced_accuracy: f64,
    /// Macro one-vs-rest TN/(TN+FP) over classes that have negatives.
    pub specificity: f64,
    /// Support-weighted F1.
    pub weighted_f1: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl MetricsReport {
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Self> {
        let c = confusion.len();
        if confusion.iter().any(|r| r.len() != c) {
            return Err(Error::Data("confusion matrix must be square".into()));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Data("no predictions to score".into()));
        }
        let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
        let predicted: Vec<usize> = (0..c).map(|j| confusion.iter().map(|r| r[j]).sum()).collect();
        let tp: Vec<usize> = (0..c).map(|i| confusion[i][i]).collect();

        let accuracy = tp.iter().sum::<usize>() as f64 / total as f64;

        let recalls: Vec<f64> = (0..c)
            .filter(|&i| support[i] > 0)
            .map(|i| tp[i] as f64 / support[i] as f64)
            .collect();
        let balanced_accuracy = recalls.iter().sum::<f64>() / recalls.len() as f64;

        let specs: Vec<f64> = (0..c)
            .filter_map(|i| {
                let negatives = total - support[i];
                let fp = predicted[i] - tp[i];
                (negatives > 0).then(|| (negatives - fp) as f64 / negatives as f64)
            })
            .collect();
        // Single-class truth leaves no negatives anywhere; nothing can be a false positive.
        let specificity = if specs.is_empty() {
            1.0
        } else {
            specs.iter().sum::<f64>() / specs.len() as f64
        };

        let weighted_f1 = (0..c)
            .map(|i| {
                let denom = 2 * tp[i] + (predicted[i] - tp[i]) + (support[i] - tp[i]);
                let f1 = if denom == 0 {
                    0.0
                } else {
                    2.0 * tp[i] as f64 / denom as f64
                };
                support[i] as f64 / total as f64 * f1
            })
            .sum();

        Ok(Self {
            accuracy,
            balanced_accuracy,
            specificity,
            weighted_f1,
            confusion,
        })
    }

    pub fn csv_header() -> &'static str {
        "accuracy,balanced_accuracy,specificity,weighted_f1"
    }

    pub fn csv_values(&self) -> String {
        format!(
            "{},{},{},{}",
            self.accuracy, self.balanced_accuracy, self.specificity, self.weighted_f1
        )
    }
}

/// Scores `(truth, predicted)` pairs over `classes` classes.
pub fn compute_metrics(pairs: &[(usize, usize)], classes: usize) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::Data("cannot compute metrics on an empty prediction list".into()));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    for &(t, p) in pairs {
        if t >= classes || p >= classes {
            return Err(Error::Data(format!(
                "label pair ({t}, {p}) out of range for {classes} classes"
            )));
        }
        confusion[t][p] += 1;
    }
    MetricsReport::from_confusion(confusion)
}
