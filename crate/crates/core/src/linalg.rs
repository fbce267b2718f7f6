//! Dense symmetric positive definite factorization and solves.
//!
//! All ridge systems in this crate are symmetric positive definite (or
//! semidefinite before regularization), so a Cholesky factorization covers
//! every solve and inverse the library needs. The factor caches the inverse
//! of its triangle, turning each later solve into two matrix products.

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};

/// Diagonal jitter values tried, in order, after the unmodified matrix
/// fails to factor.
pub const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Lower-triangular Cholesky factor of `a + jitter * I`, or `None` when a
/// pivot is not strictly positive.
fn try_cholesky(a: &ArrayView2<'_, f64>, jitter: f64) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut pivot = a[[j, j]] + jitter;
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return None;
        }
        let root = pivot.sqrt();
        l[[j, j]] = root;
        for i in (j + 1)..n {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = sum / root;
        }
    }
    Some(l)
}

/// Lower-triangular factor of a symmetric positive *semi*definite matrix.
///
/// Zero pivots are tolerated: when a pivot falls within a small relative
/// tolerance of zero its column is zeroed, which is exact for a genuinely
/// semidefinite matrix. Used for sampling from possibly degenerate
/// covariances; solves go through [`spd_factor`] instead.
pub fn cholesky_psd_lower(a: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut pivot = a[[j, j]];
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if pivot < -1e-8 * scale || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite {
                order: n,
                last_jitter: 0.0,
            });
        }
        if pivot <= tol {
            for i in (j + 1)..n {
                let mut residual = a[[i, j]];
                for k in 0..j {
                    residual -= l[[i, k]] * l[[j, k]];
                }
                if residual.abs() > 1e-6 * scale {
                    return Err(Error::NotPositiveDefinite {
                        order: n,
                        last_jitter: 0.0,
                    });
                }
            }
            continue;
        }
        let root = pivot.sqrt();
        l[[j, j]] = root;
        for i in (j + 1)..n {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = sum / root;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix by forward substitution.
fn invert_lower(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    for col in 0..n {
        inv[[col, col]] = 1.0 / l[[col, col]];
        for row in (col + 1)..n {
            let mut sum = 0.0;
            for k in col..row {
                sum += l[[row, k]] * inv[[k, col]];
            }
            inv[[row, col]] = -sum / l[[row, row]];
        }
    }
    inv
}

/// Cached Cholesky factorization of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    lower: Array2<f64>,
    lower_inv: Array2<f64>,
    jitter: f64,
}

/// Factors `a`, climbing [`JITTER_LADDER`] if the unmodified matrix is not
/// positive definite. A successful jitter step is logged at warn level.
pub fn spd_factor(a: &ArrayView2<'_, f64>) -> Result<SpdFactor> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch {
            op: "spd_factor",
            left: (a.nrows(), a.ncols()),
            right: (a.ncols(), a.nrows()),
        });
    }
    if let Some(lower) = try_cholesky(a, 0.0) {
        let lower_inv = invert_lower(&lower);
        return Ok(SpdFactor {
            lower,
            lower_inv,
            jitter: 0.0,
        });
    }
    for &jitter in &JITTER_LADDER {
        if let Some(lower) = try_cholesky(a, jitter) {
            log::warn!(
                "matrix of order {} required diagonal jitter {jitter:e} to factor",
                a.nrows()
            );
            let lower_inv = invert_lower(&lower);
            return Ok(SpdFactor {
                lower,
                lower_inv,
                jitter,
            });
        }
    }
    Err(Error::NotPositiveDefinite {
        order: a.nrows(),
        last_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

impl SpdFactor {
    /// The lower-triangular factor `L` with `L * L^T = A + jitter * I`.
    pub fn lower(&self) -> &Array2<f64> {
        &self.lower
    }

    /// The jitter that was added to the diagonal; zero when the matrix
    /// factored as given.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Order of the factored matrix.
    pub fn order(&self) -> usize {
        self.lower.nrows()
    }

    /// Solves `A * X = B` for `X`.
    pub fn solve(&self, b: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if b.nrows() != self.order() {
            return Err(Error::ShapeMismatch {
                op: "SpdFactor::solve",
                left: (self.order(), self.order()),
                right: (b.nrows(), b.ncols()),
            });
        }
        let half = self.lower_inv.dot(b);
        Ok(self.lower_inv.t().dot(&half))
    }

    /// The dense inverse of the factored matrix.
    pub fn inverse(&self) -> Array2<f64> {
        self.lower_inv.t().dot(&self.lower_inv)
    }
}

/// Replaces `a` with its symmetric part `(a + a^T) / 2`.
pub fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let mean = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = mean;
            a[[j, i]] = mean;
        }
    }
}
