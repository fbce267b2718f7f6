//! Output writers: the JSON report every command emits, the separate
//! metadata file holding the non-deterministic bits, and the CSV and PGM
//! emitters. Everything in `report.json` and the CSVs is byte-stable for
//! a fixed config and seed; wall-clock facts live in `meta.json` only.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::ArrayView2;
use rvfldl::Result;
use serde::Serialize;

use crate::config::TaskTag;

/// One flat report schema for every command; fields irrelevant to a task
/// stay absent. `docs/report.schema.json` is the published contract.
#[derive(Debug, Default, Serialize)]
pub struct Report {
    pub task: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_unsupervised_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_joint_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictions_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pgm_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity_without: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity_with: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_reconstruction_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_accuracy_mean: Option<f64>,
}

impl Report {
    pub fn for_task(task: TaskTag) -> Self {
        Self {
            task: task.as_str(),
            ..Self::default()
        }
    }
}

/// Wall-clock and environment facts, deliberately quarantined away from
/// the deterministic outputs.
#[derive(Debug, Serialize)]
pub struct Meta {
    pub command: &'static str,
    pub package_version: &'static str,
    pub threads: usize,
    pub started_unix_ms: u128,
    pub wall_ms: u128,
}

pub fn unix_ms_now() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Predictions CSV: one row per query with its class and the per-class
/// decision scores, in `class_ids` order.
pub fn write_predictions_csv(
    path: &Path,
    class_ids: &[usize],
    predicted: &[usize],
    scores: &ArrayView2<'_, f64>,
) -> Result<()> {
    let mut out = String::from("index,predicted");
    for id in class_ids {
        out.push_str(&format!(",score_{id}"));
    }
    out.push('\n');
    for (j, &label) in predicted.iter().enumerate() {
        out.push_str(&format!("{j},{label}"));
        for i in 0..scores.nrows() {
            out.push_str(&format!(",{}", scores[[i, j]]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Per-image structural similarity CSV.
pub fn write_ssim_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::from("index,ssim\n");
    for (j, v) in values.iter().enumerate() {
        out.push_str(&format!("{j},{v}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Binary PGM (P5) dump of one square image; values are rounded and
/// clamped into `[0, 255]`.
pub fn write_pgm(path: &Path, pixels: &[f64], side: usize) -> Result<()> {
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    std::fs::write(path, out)?;
    Ok(())
}
