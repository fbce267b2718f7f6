//! Sparse coding of data against a dictionary under a global-local
//! shrinkage prior.
//!
//! Each coefficient gets its own Half-Cauchy scale draw; together with a
//! global scale `tau` this concentrates posterior mass near zero for most
//! coefficients while leaving heavy tails for the few that matter. The
//! posterior over a coefficient column is Gaussian with a closed form, so
//! coding is a pair of symmetric solves plus one sampling pass.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd_lower, spd_factor, symmetrize};
use crate::rng::{HalfCauchyParams, RandomStream};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// A matrix of raw observations, one sample per column.
pub type DataMatrix = Array2<f64>;

/// Scale parameters of the shrinkage prior and the pre-estimate ridge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsParams {
    /// Global shrinkage scale; smaller values pull the posterior mean
    /// toward zero across the board.
    pub tau: f64,
    /// Observation noise variance.
    pub sigma2: f64,
    /// Ridge weight of the pre-estimate solve.
    pub eta: f64,
}

impl Default for HsParams {
    fn default() -> Self {
        Self {
            tau: 1.0,
            sigma2: 1.0,
            eta: 0.01,
        }
    }
}

impl HsParams {
    fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 || !self.tau.is_finite() {
            return Err(Error::InvalidArgument {
                name: "HsParams.tau",
                reason: format!("must be positive and finite, got {}", self.tau),
            });
        }
        if self.sigma2 <= 0.0 || !self.sigma2.is_finite() {
            return Err(Error::InvalidArgument {
                name: "HsParams.sigma2",
                reason: format!("must be positive and finite, got {}", self.sigma2),
            });
        }
        if self.eta < 0.0 || !self.eta.is_finite() {
            return Err(Error::InvalidArgument {
                name: "HsParams.eta",
                reason: format!("must be nonnegative and finite, got {}", self.eta),
            });
        }
        Ok(())
    }
}

/// Gaussian posterior over coefficient columns: every column `j` of the
/// coded matrix is distributed `N(mean[:, j], covariance)`.
#[derive(Debug, Clone)]
pub struct HsPosterior {
    pub mean: Array2<f64>,
    pub covariance: Array2<f64>,
}

/// Sampled coefficients with the threshold that separates effective zeros
/// from active entries.
#[derive(Debug, Clone)]
pub struct CoefficientMatrix {
    pub values: Array2<f64>,
    /// `1e-3` times the largest absolute entry of `values`.
    pub effective_zero_threshold: f64,
}

/// Relative factor defining an effective zero.
pub const EFFECTIVE_ZERO_RELATIVE: f64 = 1e-3;

impl CoefficientMatrix {
    pub fn new(values: Array2<f64>) -> Self {
        let max_abs = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        Self {
            values,
            effective_zero_threshold: EFFECTIVE_ZERO_RELATIVE * max_abs,
        }
    }

    /// Average per-column count of entries above the effective-zero
    /// threshold.
    pub fn effective_sparsity(&self) -> f64 {
        let cols = self.values.ncols();
        if cols == 0 {
            return 0.0;
        }
        let active = self
            .values
            .iter()
            .filter(|v| v.abs() > self.effective_zero_threshold)
            .count();
        active as f64 / cols as f64
    }

    /// Sets every entry at or below the threshold to exactly zero. Not
    /// applied by default; callers opt in.
    pub fn hard_threshold(&mut self) {
        let threshold = self.effective_zero_threshold;
        self.values
            .mapv_inplace(|v| if v.abs() <= threshold { 0.0 } else { v });
    }
}

/// Average per-column count of entries above `relative` times that
/// column's own largest absolute value. Used for feature blocks whose
/// scale varies per sample.
pub fn effective_sparsity_per_column(values: &ArrayView2<'_, f64>, relative: f64) -> f64 {
    let cols = values.ncols();
    if cols == 0 {
        return 0.0;
    }
    let mut active = 0usize;
    for col in values.axis_iter(Axis(1)) {
        let max_abs = col.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let threshold = relative * max_abs;
        active += col.iter().filter(|v| v.abs() > threshold).count();
    }
    active as f64 / cols as f64
}

fn check_coding_shapes(
    op: &'static str,
    y: &ArrayView2<'_, f64>,
    d: &ArrayView2<'_, f64>,
) -> Result<()> {
    if y.nrows() != d.nrows() {
        return Err(Error::ShapeMismatch {
            op,
            left: (d.nrows(), d.ncols()),
            right: (y.nrows(), y.ncols()),
        });
    }
    Ok(())
}

/// Ridge pre-estimate `(D^T D + eta I)^-1 D^T Y` of the coefficients.
pub fn ridge_pre_estimate(
    y: &ArrayView2<'_, f64>,
    d: &ArrayView2<'_, f64>,
    eta: f64,
) -> Result<Array2<f64>> {
    check_coding_shapes("ridge_pre_estimate", y, d)?;
    let k = d.ncols();
    let mut gram = d.t().dot(d);
    for i in 0..k {
        gram[[i, i]] += eta;
    }
    let factor = spd_factor(&gram.view())?;
    let rhs = d.t().dot(y);
    factor.solve(&rhs.view())
}

/// Closed-form Gaussian posterior over the coefficients of `y` given the
/// dictionary `d` and per-coefficient scale draws `lambdas`.
///
/// With `Lambda = diag(lambdas^2)` and `G = D^T D + eta I`, the mean is
/// `tau^2 Lambda (tau^2 Lambda + sigma2 G^-1)^-1 X_hat` applied to the
/// ridge pre-estimate, and the covariance is
/// `(Lambda^-1 / tau^2 + D^T D / sigma2)^-1`.
pub fn hs_posterior(
    y: &ArrayView2<'_, f64>,
    d: &ArrayView2<'_, f64>,
    lambdas: &[f64],
    params: &HsParams,
) -> Result<HsPosterior> {
    params.validate()?;
    check_coding_shapes("hs_posterior", y, d)?;
    let k = d.ncols();
    if lambdas.len() != k {
        return Err(Error::InvalidArgument {
            name: "lambdas",
            reason: format!("expected {k} scale draws, got {}", lambdas.len()),
        });
    }
    if lambdas.iter().any(|l| *l <= 0.0 || !l.is_finite()) {
        return Err(Error::InvalidArgument {
            name: "lambdas",
            reason: "every scale draw must be positive and finite".into(),
        });
    }

    let gram = d.t().dot(d);
    let mut ridge_gram = gram.clone();
    for i in 0..k {
        ridge_gram[[i, i]] += params.eta;
    }
    let gram_factor = spd_factor(&ridge_gram.view())?;
    let pre_estimate = gram_factor.solve(&d.t().dot(y).view())?;

    let tau2 = params.tau * params.tau;
    let mut blend = gram_factor.inverse() * params.sigma2;
    for i in 0..k {
        blend[[i, i]] += tau2 * lambdas[i] * lambdas[i];
    }
    let blend_factor = spd_factor(&blend.view())?;
    let mut mean = blend_factor.solve(&pre_estimate.view())?;
    for (i, mut row) in mean.outer_iter_mut().enumerate() {
        let scale = tau2 * lambdas[i] * lambdas[i];
        row.mapv_inplace(|v| v * scale);
    }

    let mut precision = gram / params.sigma2;
    for i in 0..k {
        precision[[i, i]] += 1.0 / (tau2 * lambdas[i] * lambdas[i]);
    }
    let mut covariance = spd_factor(&precision.view())?.inverse();
    symmetrize(&mut covariance);

    Ok(HsPosterior { mean, covariance })
}

/// Draws one coefficient matrix from the posterior, column by column.
pub fn sample_coefficients(
    posterior: &HsPosterior,
    stream: &mut RandomStream,
) -> Result<CoefficientMatrix> {
    let k = posterior.mean.nrows();
    if posterior.covariance.nrows() != k || posterior.covariance.ncols() != k {
        return Err(Error::ShapeMismatch {
            op: "sample_coefficients",
            left: (k, posterior.mean.ncols()),
            right: (posterior.covariance.nrows(), posterior.covariance.ncols()),
        });
    }
    let lower = cholesky_psd_lower(&posterior.covariance.view())?;
    let mut values = posterior.mean.clone();
    for mut col in values.axis_iter_mut(Axis(1)) {
        let z = stream.standard_normals(k);
        for i in 0..k {
            let mut bump = 0.0;
            for (j, &zj) in z.iter().enumerate().take(i + 1) {
                bump += lower[[i, j]] * zj;
            }
            col[i] += bump;
        }
    }
    Ok(CoefficientMatrix::new(values))
}

/// Full coding pass: draws one Half-Cauchy scale per dictionary atom,
/// forms the posterior, and samples the coefficient matrix. The scale
/// draws always precede the sampling normals in the stream.
pub fn hs_sparse_code(
    y: &ArrayView2<'_, f64>,
    d: &ArrayView2<'_, f64>,
    params: &HsParams,
    stream: &mut RandomStream,
) -> Result<CoefficientMatrix> {
    let lambdas = stream.half_cauchy(&HalfCauchyParams::default(), d.ncols())?;
    let posterior = hs_posterior(y, d, &lambdas, params)?;
    sample_coefficients(&posterior, stream)
}

/// How the initial dictionary is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictInit {
    /// Standard normal entries, columns rescaled to unit norm.
    GaussianUnitColumns,
    /// A random subset of data columns, rescaled to unit norm.
    DataSubset,
}

/// Builds a `d x k` initial dictionary with unit-norm columns.
pub fn init_dictionary(
    data: &ArrayView2<'_, f64>,
    k: usize,
    init: DictInit,
    stream: &mut RandomStream,
) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument {
            name: "k",
            reason: "dictionary must have at least one atom".into(),
        });
    }
    let dim = data.nrows();
    let mut dict = match init {
        DictInit::GaussianUnitColumns => stream.standard_normal_matrix(dim, k),
        DictInit::DataSubset => {
            let n = data.ncols();
            if k > n {
                return Err(Error::InvalidArgument {
                    name: "k",
                    reason: format!("data subset init needs k <= {n} samples, got k = {k}"),
                });
            }
            let mut indices: Vec<usize> = (0..n).collect();
            stream.shuffle(&mut indices);
            let mut dict = Array2::<f64>::zeros((dim, k));
            for (col, &src) in indices[..k].iter().enumerate() {
                dict.column_mut(col).assign(&data.column(src));
            }
            dict
        }
    };
    for (index, mut col) in dict.axis_iter_mut(Axis(1)).enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNormColumn { index });
        }
        col.mapv_inplace(|v| v / norm);
    }
    Ok(dict)
}
