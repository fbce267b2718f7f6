//! Closed-form ridge solves for the dictionary, the label map, and the
//! enhanced coefficients, plus the objectives they minimize.
//!
//! Every update is the exact minimizer of a quadratic, so each solve is one
//! symmetric factorization and a pair of matrix products. No iterative
//! optimization happens anywhere in training.

use crate::enhance::EnhancedMatrix;
use crate::error::{Error, Result};
use crate::linalg::spd_factor;
use ndarray::{Array2, ArrayView2};

/// Ridge weights of the coupled solves.
///
/// `mu1` penalizes the dictionary, `mu2` the label map, `mu3` weighs the
/// label-fit term inside the coefficient update, and `eta` regularizes the
/// coefficient update itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeParams {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub eta: f64,
}

impl Default for RidgeParams {
    fn default() -> Self {
        Self {
            mu1: 0.2,
            mu2: 0.2,
            mu3: 0.1,
            eta: 0.01,
        }
    }
}

fn check_cols(op: &'static str, a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::ShapeMismatch {
            op,
            left: (a.nrows(), a.ncols()),
            right: (b.nrows(), b.ncols()),
        });
    }
    Ok(())
}

/// Ridge solve `B X1^T (X1 X1^T + mu I)^-1` shared by the dictionary and
/// classifier updates.
fn solve_against_features(
    b: &ArrayView2<'_, f64>,
    x1: &ArrayView2<'_, f64>,
    mu: f64,
) -> Result<Array2<f64>> {
    let m = x1.nrows();
    let mut gram = x1.dot(&x1.t());
    for i in 0..m {
        gram[[i, i]] += mu;
    }
    let factor = spd_factor(&gram.view())?;
    let rhs = x1.dot(&b.t());
    Ok(factor.solve(&rhs.view())?.t().to_owned())
}

/// Minimizer `D1` of `||Y - D1 X1||_F^2 + mu1 ||D1||_F^2`.
pub fn solve_dictionary(
    y: &ArrayView2<'_, f64>,
    x1: &EnhancedMatrix,
    mu1: f64,
) -> Result<Array2<f64>> {
    check_cols("solve_dictionary", y, &x1.values.view())?;
    solve_against_features(y, &x1.values.view(), mu1)
}

/// Minimizer `W` of `||H - W X1||_F^2 + (mu2 / mu3) ... `; concretely the
/// ridge solve `H X1^T (X1 X1^T + mu2 I)^-1`.
pub fn solve_classifier(
    h: &ArrayView2<'_, f64>,
    x1: &EnhancedMatrix,
    mu2: f64,
) -> Result<Array2<f64>> {
    check_cols("solve_classifier", h, &x1.values.view())?;
    solve_against_features(h, &x1.values.view(), mu2)
}

fn coefficient_system(
    d1: &ArrayView2<'_, f64>,
    w: &ArrayView2<'_, f64>,
    params: &RidgeParams,
) -> Result<crate::linalg::SpdFactor> {
    if w.nrows() > 0 && w.ncols() != d1.ncols() {
        return Err(Error::ShapeMismatch {
            op: "coefficient_system",
            left: (d1.nrows(), d1.ncols()),
            right: (w.nrows(), w.ncols()),
        });
    }
    let m = d1.ncols();
    let mut lhs = d1.t().dot(d1);
    if w.nrows() > 0 {
        lhs = lhs + params.mu3 * w.t().dot(w);
    }
    for i in 0..m {
        lhs[[i, i]] += params.eta;
    }
    spd_factor(&lhs.view())
}

/// Joint coefficient update: the minimizer over `X1` of
/// `||Y - D1 X1||_F^2 + mu3 ||H - W X1||_F^2 + eta ||X1||_F^2`,
/// i.e. `(D1^T D1 + mu3 W^T W + eta I)^-1 (D1^T Y + mu3 W^T H)`.
///
/// The result is treated as a full coefficient matrix; the sigmoid block is
/// not recomputed. `base_rows` records how many leading rows correspond to
/// dictionary atoms.
pub fn update_coefficients(
    y: &ArrayView2<'_, f64>,
    h: &ArrayView2<'_, f64>,
    d1: &ArrayView2<'_, f64>,
    w: &ArrayView2<'_, f64>,
    params: &RidgeParams,
    base_rows: usize,
) -> Result<EnhancedMatrix> {
    check_cols("update_coefficients", y, h)?;
    if y.nrows() != d1.nrows() {
        return Err(Error::ShapeMismatch {
            op: "update_coefficients",
            left: (d1.nrows(), d1.ncols()),
            right: (y.nrows(), y.ncols()),
        });
    }
    if w.nrows() != h.nrows() {
        return Err(Error::ShapeMismatch {
            op: "update_coefficients",
            left: (w.nrows(), w.ncols()),
            right: (h.nrows(), h.ncols()),
        });
    }
    let factor = coefficient_system(d1, w, params)?;
    let mut rhs = d1.t().dot(y);
    if w.nrows() > 0 {
        rhs = rhs + params.mu3 * w.t().dot(h);
    }
    EnhancedMatrix::new(factor.solve(&rhs.view())?, base_rows)
}

/// Codes query columns against a learned dictionary: the coefficient
/// update with the label term zeroed out, sharing one factorization across
/// all queries.
pub fn code_query(
    y_q: &ArrayView2<'_, f64>,
    d1: &ArrayView2<'_, f64>,
    w: &ArrayView2<'_, f64>,
    params: &RidgeParams,
) -> Result<Array2<f64>> {
    if y_q.nrows() != d1.nrows() {
        return Err(Error::ShapeMismatch {
            op: "code_query",
            left: (d1.nrows(), d1.ncols()),
            right: (y_q.nrows(), y_q.ncols()),
        });
    }
    let factor = coefficient_system(d1, w, params)?;
    factor.solve(&d1.t().dot(y_q).view())
}

/// Dual-form ridge coding `D^T (D D^T + mu I)^-1 Y`, algebraically equal
/// to the primal solve for positive `mu` but factoring a `d x d` system.
pub fn recode_dual(
    y: &ArrayView2<'_, f64>,
    d: &ArrayView2<'_, f64>,
    mu: f64,
) -> Result<Array2<f64>> {
    if y.nrows() != d.nrows() {
        return Err(Error::ShapeMismatch {
            op: "recode_dual",
            left: (d.nrows(), d.ncols()),
            right: (y.nrows(), y.ncols()),
        });
    }
    let n = d.nrows();
    let mut gram = d.dot(&d.t());
    for i in 0..n {
        gram[[i, i]] += mu;
    }
    let factor = spd_factor(&gram.view())?;
    Ok(d.t().dot(&factor.solve(y)?))
}

fn squared_frobenius(a: &ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// `||Y - D1 X1||_F^2 + mu1 ||D1||_F^2`.
pub fn objective_unsupervised(
    y: &ArrayView2<'_, f64>,
    d1: &ArrayView2<'_, f64>,
    x1: &EnhancedMatrix,
    mu1: f64,
) -> f64 {
    let residual = y - &d1.dot(&x1.values);
    squared_frobenius(&residual.view()) + mu1 * squared_frobenius(d1)
}

/// Gradient of [`objective_unsupervised`] in `D1`:
/// `2 (D1 X1 - Y) X1^T + 2 mu1 D1`.
pub fn objective_unsupervised_gradient(
    y: &ArrayView2<'_, f64>,
    d1: &ArrayView2<'_, f64>,
    x1: &EnhancedMatrix,
    mu1: f64,
) -> Array2<f64> {
    let residual = d1.dot(&x1.values) - y;
    2.0 * residual.dot(&x1.values.t()) + 2.0 * mu1 * d1
}

/// `||Y - D1 X1||_F^2 + mu1 ||D1||_F^2 + mu3 ||H - W X1||_F^2
///  + mu2 ||W||_F^2`.
pub fn objective_joint(
    y: &ArrayView2<'_, f64>,
    h: &ArrayView2<'_, f64>,
    d1: &ArrayView2<'_, f64>,
    w: &ArrayView2<'_, f64>,
    x1: &EnhancedMatrix,
    params: &RidgeParams,
) -> f64 {
    let mut total = objective_unsupervised(y, d1, x1, params.mu1);
    if w.nrows() > 0 {
        let label_residual = h - &w.dot(&x1.values);
        total += params.mu3 * squared_frobenius(&label_residual.view());
        total += params.mu2 * squared_frobenius(w);
    }
    total
}
