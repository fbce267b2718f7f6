//! Random sigmoid feature enhancement of coefficient matrices.
//!
//! A fixed random affine map followed by a sigmoid appends `l` nonlinear
//! feature rows to each `k`-row coefficient column. The map is drawn once
//! per training run and never trained; only the solves downstream see the
//! enhanced rows.

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Name of the only activation this map applies.
pub const ACTIVATION_TAG: &str = "sigmoid";

/// Numerically stable logistic function, strictly inside (0, 1) for
/// arguments of magnitude up to about 700. Positive arguments large enough
/// to round to one clamp to the largest double below one instead, so the
/// open interval holds even where the true value is closer to one than
/// machine epsilon allows.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;
    if t >= 0.0 {
        (1.0 / (1.0 + (-t).exp())).min(BELOW_ONE)
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// A frozen random affine map into sigmoid feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementMap {
    weights: Array2<f64>,
    biases: Array1<f64>,
}

impl EnhancementMap {
    /// Draws an `l x k` weight matrix (row-major) and then `l` biases from
    /// `stream`, all standard normal.
    pub fn draw(k: usize, l: usize, stream: &mut RandomStream) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::InvalidArgument {
                name: "EnhancementMap",
                reason: format!("both dimensions must be positive, got k = {k}, l = {l}"),
            });
        }
        let weights = stream.standard_normal_matrix(l, k);
        let biases = Array1::from_vec(stream.standard_normals(l));
        Ok(Self { weights, biases })
    }

    pub fn from_parts(weights: Array2<f64>, biases: Array1<f64>) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::ShapeMismatch {
                op: "EnhancementMap::from_parts",
                left: (weights.nrows(), weights.ncols()),
                right: (biases.len(), 1),
            });
        }
        Ok(Self { weights, biases })
    }

    /// Number of base rows the map expects.
    pub fn base_rows(&self) -> usize {
        self.weights.ncols()
    }

    /// Number of feature rows the map appends.
    pub fn enhanced_rows(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }
}

/// A coefficient matrix stacked on top of its sigmoid feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedMatrix {
    pub values: Array2<f64>,
    pub base_rows: usize,
    pub enhanced_rows: usize,
}

impl EnhancedMatrix {
    pub fn new(values: Array2<f64>, base_rows: usize) -> Result<Self> {
        if base_rows > values.nrows() {
            return Err(Error::InvalidArgument {
                name: "EnhancedMatrix.base_rows",
                reason: format!("base rows {base_rows} exceed total rows {}", values.nrows()),
            });
        }
        let enhanced_rows = values.nrows() - base_rows;
        Ok(Self {
            values,
            base_rows,
            enhanced_rows,
        })
    }

    pub fn rows(&self) -> usize {
        self.base_rows + self.enhanced_rows
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }
}

/// Stacks `x` on top of `sigmoid(W x + b)`, copying the base block
/// verbatim so any exact zero pattern in `x` survives unchanged.
pub fn enhance(x: &ArrayView2<'_, f64>, map: &EnhancementMap) -> Result<EnhancedMatrix> {
    let k = map.base_rows();
    let l = map.enhanced_rows();
    if x.nrows() != k {
        return Err(Error::ShapeMismatch {
            op: "enhance",
            left: (l, k),
            right: (x.nrows(), x.ncols()),
        });
    }
    let n = x.ncols();
    let mut values = Array2::<f64>::zeros((k + l, n));
    values.slice_mut(ndarray::s![..k, ..]).assign(x);
    let mut feature_block = map.weights.dot(x);
    for (row, mut feature_row) in feature_block.axis_iter_mut(Axis(0)).enumerate() {
        let bias = map.biases[row];
        feature_row.mapv_inplace(|t| sigmoid(t + bias));
    }
    values
        .slice_mut(ndarray::s![k.., ..])
        .assign(&feature_block);
    EnhancedMatrix::new(values, k)
}
