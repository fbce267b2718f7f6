//! Run configuration: the JSON document driving every command, plus the
//! dataset loading rules shared across commands.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rvfldl::data::{load_csv_matrix, load_idx, load_idx_images, load_idx_labels, LabeledDataset};
use rvfldl::train::TrainConfig;
use rvfldl::{Error, Result};
use serde::{Deserialize, Serialize};

/// What a run is supposed to do; mirrored by the CLI verb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskTag {
    TrainUnsup,
    TrainSup,
    Classify,
    Reconstruct,
    Eval,
    Sweep,
}

impl TaskTag {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskTag::TrainUnsup => "train-unsup",
            TaskTag::TrainSup => "train-sup",
            TaskTag::Classify => "classify",
            TaskTag::Reconstruct => "reconstruct",
            TaskTag::Eval => "eval",
            TaskTag::Sweep => "sweep",
        }
    }
}

/// Margin-classifier settings; the CLI flags override the file values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvcSettings {
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default = "default_reg_c")]
    pub reg_c: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Skip the margin classifier and predict by the argmax of the
    /// averaged label map.
    #[serde(default)]
    pub argmax: bool,
}

fn default_degree() -> u32 {
    2
}
fn default_reg_c() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-3
}

impl Default for SvcSettings {
    fn default() -> Self {
        Self {
            degree: default_degree(),
            reg_c: default_reg_c(),
            tol: default_tol(),
            argmax: false,
        }
    }
}

/// Grid lists for the sweep command. A missing list means "the base
/// config value only"; an explicitly empty list is a config error.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub mu1: Option<Vec<f64>>,
    #[serde(default)]
    pub mu2: Option<Vec<f64>>,
    #[serde(default)]
    pub mu3: Option<Vec<f64>>,
    #[serde(default)]
    pub degree: Option<Vec<u32>>,
    #[serde(default)]
    pub reg_c: Option<Vec<f64>>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

/// The JSON document a run is driven by. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskTag,
    #[serde(default)]
    pub train_images: Option<PathBuf>,
    #[serde(default)]
    pub train_labels: Option<PathBuf>,
    #[serde(default)]
    pub query_images: Option<PathBuf>,
    #[serde(default)]
    pub query_labels: Option<PathBuf>,
    #[serde(default)]
    pub model_in: Option<PathBuf>,
    #[serde(default)]
    pub model_out: Option<PathBuf>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub svc: SvcSettings,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    /// Dump reconstructed images as binary PGM files.
    #[serde(default)]
    pub write_pgm: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn require_train(&self) -> Result<&TrainConfig> {
        self.train
            .as_ref()
            .ok_or_else(|| Error::Config("this task needs a \"train\" section".into()))
    }

    pub fn require_path(&self, field: &str) -> Result<&Path> {
        let value = match field {
            "train_images" => &self.train_images,
            "query_images" => &self.query_images,
            "model_in" => &self.model_in,
            _ => unreachable!("unknown required path field {field}"),
        };
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("this task needs \"{field}\"")))
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Fails with the offending path when a configured input file is
/// missing, so the error names what to fix.
pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

/// Loads feature columns only: a CSV table (no label field) or an IDX
/// image file, decided by the extension.
pub fn load_features(path: &Path) -> Result<Array2<f64>> {
    require_file(path)?;
    if is_csv(path) {
        Ok(load_csv_matrix(path, false)?.data)
    } else {
        load_idx_images(path)
    }
}

/// Loads a labeled dataset. A CSV file embeds labels in its last field
/// when no separate label path is given (or when the label path is the
/// file itself); otherwise the label path names its own file. An IDX
/// image file always needs a companion label file.
pub fn load_labeled(images: &Path, labels: Option<&Path>) -> Result<LabeledDataset> {
    require_file(images)?;
    if is_csv(images) {
        match labels {
            None => load_csv_matrix(images, true),
            Some(p) if p == images => load_csv_matrix(images, true),
            Some(p) => {
                let data = load_csv_matrix(images, false)?.data;
                let labels = load_label_file(p)?;
                if labels.len() != data.ncols() {
                    return Err(Error::IdxCountMismatch {
                        images: data.ncols(),
                        labels: labels.len(),
                    });
                }
                let class_count = labels.iter().max().map_or(0, |m| m + 1);
                Ok(LabeledDataset {
                    data,
                    labels,
                    class_count,
                })
            }
        }
    } else {
        let labels = labels.ok_or_else(|| {
            Error::Config(format!(
                "idx dataset {} needs a companion label file",
                images.display()
            ))
        })?;
        require_file(labels)?;
        load_idx(images, labels)
    }
}

/// Loads a query dataset whose truth labels are optional: with no label
/// path the file is features only, so a CSV with an embedded label
/// column must declare it by naming itself as the label path.
pub fn load_query(
    images: &Path,
    labels: Option<&Path>,
) -> Result<(Array2<f64>, Option<Vec<usize>>)> {
    match labels {
        None => Ok((load_features(images)?, None)),
        Some(p) => {
            let ds = load_labeled(images, Some(p))?;
            Ok((ds.data, Some(ds.labels)))
        }
    }
}

/// Loads truth labels on their own: an IDX label file, or a text file
/// with one integer per line.
pub fn load_label_file(path: &Path) -> Result<Vec<usize>> {
    require_file(path)?;
    if is_csv(path)
        || path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("txt"))
    {
        let text = std::fs::read_to_string(path)?;
        let mut labels = Vec::new();
        for (index, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let label: usize = trimmed.parse().map_err(|_| Error::Parse {
                row: index + 1,
                column: 1,
                reason: format!("invalid integer label {trimmed:?}"),
            })?;
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(Error::Parse {
                row: 1,
                column: 1,
                reason: "the label file holds no labels".into(),
            });
        }
        Ok(labels)
    } else {
        load_idx_labels(path)
    }
}
