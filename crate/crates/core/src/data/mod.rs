//! Feature bags on disk, the dataset manifest, the synthetic motif dataset,
//! stratified splitting and evaluation metrics.

pub mod bag;
pub mod manifest;
pub mod metrics;
pub mod split;
pub mod synth;

pub use bag::{read_bag, write_bag, FeatureBag};
pub use manifest::{Dataset, DatasetManifest, ManifestEntry, Split};
pub use metrics::{compute_metrics, MetricsReport};
pub use split::{split_dataset, DEFAULT_RATIOS};
pub use synth::{generate_synthetic, oracle_accuracy, synthesize, SyntheticData, SyntheticReport, SyntheticSpec};
