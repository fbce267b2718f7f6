//! Evaluation metrics: label accuracy, reconstruction error, and
//! structural similarity of images.

use crate::enhance::EnhancedMatrix;
use crate::error::{Error, Result};
use ndarray::ArrayView2;

/// Fraction of positions where the two label sequences agree.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            op: "accuracy",
            left: (predicted.len(), 1),
            right: (truth.len(), 1),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument {
            name: "predicted",
            reason: "accuracy of an empty prediction set is undefined".into(),
        });
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// `||Y - D1 X1||_F / ||Y||_F`.
pub fn relative_reconstruction_error(
    y: &ArrayView2<'_, f64>,
    d1: &ArrayView2<'_, f64>,
    x1: &EnhancedMatrix,
) -> Result<f64> {
    if y.ncols() != x1.cols() || y.nrows() != d1.nrows() {
        return Err(Error::ShapeMismatch {
            op: "relative_reconstruction_error",
            left: (y.nrows(), y.ncols()),
            right: (d1.nrows(), x1.cols()),
        });
    }
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if y_norm == 0.0 {
        return Err(Error::InvalidArgument {
            name: "y",
            reason: "relative error against an all-zero target is undefined".into(),
        });
    }
    let residual = y - &d1.dot(&x1.values);
    let res_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(res_norm / y_norm)
}

/// Side length of the square window used by windowed structural
/// similarity; windows slide with stride one.
pub const SSIM_WINDOW: usize = 8;

struct SsimStats {
    mean_a: f64,
    mean_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
}

fn ssim_stats(a: &[f64], b: &[f64]) -> SsimStats {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    let mut cov = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    SsimStats {
        mean_a,
        mean_b,
        var_a: var_a / n,
        var_b: var_b / n,
        cov: cov / n,
    }
}

fn ssim_from_stats(s: &SsimStats, c1: f64, c2: f64) -> f64 {
    let numer = (2.0 * s.mean_a * s.mean_b + c1) * (2.0 * s.cov + c2);
    let denom = (s.mean_a * s.mean_a + s.mean_b * s.mean_b + c1) * (s.var_a + s.var_b + c2);
    numer / denom
}

/// Structural similarity of two equally shaped images with dynamic range
/// `range`. Stabilizers are `(0.01 range)^2` and `(0.03 range)^2`; pixel
/// values are clamped into `[0, range]` before comparison.
///
/// With `windowed` unset the statistics run over the whole image; set, the
/// result is the mean over all 8x8 windows at stride one.
pub fn ssim(
    a: &ArrayView2<'_, f64>,
    b: &ArrayView2<'_, f64>,
    range: f64,
    windowed: bool,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            op: "ssim",
            left: a.dim(),
            right: b.dim(),
        });
    }
    if range <= 0.0 || !range.is_finite() {
        return Err(Error::InvalidArgument {
            name: "range",
            reason: format!("dynamic range must be positive and finite, got {range}"),
        });
    }
    let c1 = (0.01 * range) * (0.01 * range);
    let c2 = (0.03 * range) * (0.03 * range);
    let clamp = |v: f64| v.clamp(0.0, range);

    if !windowed {
        let flat_a: Vec<f64> = a.iter().map(|&v| clamp(v)).collect();
        let flat_b: Vec<f64> = b.iter().map(|&v| clamp(v)).collect();
        return Ok(ssim_from_stats(&ssim_stats(&flat_a, &flat_b), c1, c2));
    }

    let (rows, cols) = a.dim();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::InvalidArgument {
            name: "a",
            reason: format!(
                "windowed similarity needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {rows}x{cols}"
            ),
        });
    }
    let mut total = 0.0;
    let mut windows = 0usize;
    let mut buf_a = vec![0.0; SSIM_WINDOW * SSIM_WINDOW];
    let mut buf_b = vec![0.0; SSIM_WINDOW * SSIM_WINDOW];
    for top in 0..=(rows - SSIM_WINDOW) {
        for left in 0..=(cols - SSIM_WINDOW) {
            let mut idx = 0;
            for r in top..(top + SSIM_WINDOW) {
                for c in left..(left + SSIM_WINDOW) {
                    buf_a[idx] = clamp(a[[r, c]]);
                    buf_b[idx] = clamp(b[[r, c]]);
                    idx += 1;
                }
            }
            total += ssim_from_stats(&ssim_stats(&buf_a, &buf_b), c1, c2);
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}
