//! Plain-text dataset manifest:
//!
//! ```text
//! classes: name0,name1,...
//! id<TAB>relative_path<TAB>label_index<TAB>split
//! ```
//!
//! Bag paths are relative to the manifest's directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bag::{read_bag, FeatureBag};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            _ => Err(Error::Data(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub label: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn split_entries(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split_entries(split).count()
    }

    /// Bags per class, in class order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for e in &self.entries {
            counts[e.label] += 1;
        }
        counts
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("classes: {}\n", self.class_names.join(","));
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", e.id, e.path.display(), e.label, e.split));
        }
        out
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let err = |line: usize, reason: String| Error::Manifest {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty manifest".into()))?;
        let names = header
            .strip_prefix("classes:")
            .ok_or_else(|| err(1, format!("expected `classes:` header, found {header:?}")))?;
        let class_names: Vec<String> = names.trim().split(',').map(|s| s.trim().to_string()).collect();
        if class_names.iter().any(String::is_empty) {
            return Err(err(1, "empty class name".into()));
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(err(
                    i + 1,
                    format!("expected 4 tab-separated fields, found {}", fields.len()),
                ));
            }
            let label: usize = fields[2]
                .parse()
                .map_err(|_| err(i + 1, format!("bad label {:?}", fields[2])))?;
            if label >= class_names.len() {
                return Err(err(
                    i + 1,
                    format!("label {label} but only {} classes", class_names.len()),
                ));
            }
            entries.push(ManifestEntry {
                id: fields[0].to_string(),
                path: PathBuf::from(fields[1]),
                label,
                split: fields[3].parse().map_err(|e: Error| err(i + 1, e.to_string()))?,
            });
        }
        Ok(Self { class_names, entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::binio::write_file(path, self.to_text().as_bytes())
    }
}

/// A manifest together with the directory its bag paths are relative to.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::read(manifest_path)?;
        let root = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self { root, manifest })
    }

    /// Loads every bag of a split in manifest order, checking labels agree.
    pub fn load_split(&self, split: Split) -> Result<Vec<FeatureBag>> {
        self.manifest
            .split_entries(split)
            .map(|e| {
                let bag = read_bag(&self.root.join(&e.path))?;
                if bag.label != e.label {
                    return Err(Error::Data(format!(
                        "bag {} has label {} but manifest says {}",
                        e.id, bag.label, e.label
                    )));
                }
                Ok(bag)
            })
            .collect()
    }
}
