//! One-vs-rest support vector classification with a polynomial kernel,
//! trained by deterministic sequential minimal optimization.
//!
//! No randomness enters training: alphas start at zero, the first pair
//! member comes from sequential KKT scans, and the second maximizes the
//! error gap with lowest-index tie breaking. Identical inputs therefore
//! produce bitwise identical models.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView2, Axis};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Hard cap on pair updates per binary machine before training gives up.
pub const MAX_PAIR_UPDATES: usize = 1_000_000;

/// Inhomogeneous polynomial kernel `(a . b + 1)^degree`.
pub fn poly_kernel(a: &[f64], b: &[f64], degree: u32) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot + 1.0).powi(degree as i32)
}

/// Index of the largest score, preferring the lowest index on exact ties.
pub fn argmax_tie_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
struct BinaryMachine {
    /// Per-sample `alpha_i * y_i`; zero entries are non-support vectors.
    coefficients: Vec<f64>,
    bias: f64,
}

/// A trained one-vs-rest polynomial-kernel classifier.
#[derive(Debug, Clone)]
pub struct SvcModel {
    class_ids: Vec<usize>,
    machines: Vec<BinaryMachine>,
    training_codes: Array2<f64>,
    degree: u32,
}

struct SmoProblem<'a> {
    gram: &'a Array2<f64>,
    targets: &'a [f64],
    reg_c: f64,
    tol: f64,
    max_updates: usize,
}

#[derive(Debug)]
struct SmoOutcome {
    alphas: Vec<f64>,
    bias: f64,
}

/// Platt-style SMO on a precomputed Gram matrix. Deterministic: the outer
/// loop scans indices in order and the partner choice maximizes the error
/// gap, breaking ties toward the lowest index.
fn smo_binary(problem: &SmoProblem<'_>) -> Result<SmoOutcome> {
    let n = problem.targets.len();
    let gram = problem.gram;
    let c = problem.reg_c;
    let tol = problem.tol;
    let mut alphas = vec![0.0f64; n];
    let mut bias = 0.0f64;
    let mut errors: Vec<f64> = problem.targets.iter().map(|&y| -y).collect();
    let mut updates = 0usize;

    let take_step = |i1: usize,
                     i2: usize,
                     alphas: &mut Vec<f64>,
                     bias: &mut f64,
                     errors: &mut Vec<f64>|
     -> bool {
        if i1 == i2 {
            return false;
        }
        let y1 = problem.targets[i1];
        let y2 = problem.targets[i2];
        let alpha1 = alphas[i1];
        let alpha2 = alphas[i2];
        let e1 = errors[i1];
        let e2 = errors[i2];
        let s = y1 * y2;
        let (low, high) = if (s - 1.0).abs() < f64::EPSILON {
            let gamma = alpha1 + alpha2;
            ((gamma - c).max(0.0), gamma.min(c))
        } else {
            let gamma = alpha2 - alpha1;
            (gamma.max(0.0), (c + gamma).min(c))
        };
        if high - low < 1e-12 {
            return false;
        }
        let k11 = gram[[i1, i1]];
        let k12 = gram[[i1, i2]];
        let k22 = gram[[i2, i2]];
        let eta = k11 + k22 - 2.0 * k12;
        if eta <= 0.0 {
            return false;
        }
        let mut a2 = alpha2 + y2 * (e1 - e2) / eta;
        a2 = a2.clamp(low, high);
        if (a2 - alpha2).abs() < 1e-12 * (a2 + alpha2 + 1e-12) {
            return false;
        }
        let a1 = alpha1 + s * (alpha2 - a2);

        let b1 = *bias - e1 - y1 * (a1 - alpha1) * k11 - y2 * (a2 - alpha2) * k12;
        let b2 = *bias - e2 - y1 * (a1 - alpha1) * k12 - y2 * (a2 - alpha2) * k22;
        let new_bias = if a1 > 0.0 && a1 < c {
            b1
        } else if a2 > 0.0 && a2 < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let bias_delta = new_bias - *bias;
        let d1 = y1 * (a1 - alpha1);
        let d2 = y2 * (a2 - alpha2);
        for k in 0..n {
            errors[k] += d1 * gram[[i1, k]] + d2 * gram[[i2, k]] + bias_delta;
        }
        alphas[i1] = a1;
        alphas[i2] = a2;
        *bias = new_bias;
        true
    };

    let mut examine_all = true;
    loop {
        let mut changed = 0usize;
        for i2 in 0..n {
            let bound = alphas[i2] <= 0.0 || alphas[i2] >= c;
            if !examine_all && bound {
                continue;
            }
            let y2 = problem.targets[i2];
            let r2 = errors[i2] * y2;
            let violates = (r2 < -tol && alphas[i2] < c) || (r2 > tol && alphas[i2] > 0.0);
            if !violates {
                continue;
            }
            let e2 = errors[i2];
            let mut partner = None;
            let mut best_gap = 0.0;
            for (j, &ej) in errors.iter().enumerate() {
                if j == i2 || alphas[j] <= 0.0 || alphas[j] >= c {
                    continue;
                }
                let gap = (e2 - ej).abs();
                if gap > best_gap {
                    best_gap = gap;
                    partner = Some(j);
                }
            }
            let mut stepped = false;
            if let Some(j) = partner {
                stepped = take_step(j, i2, &mut alphas, &mut bias, &mut errors);
            }
            if !stepped {
                for j in 0..n {
                    if take_step(j, i2, &mut alphas, &mut bias, &mut errors) {
                        stepped = true;
                        break;
                    }
                }
            }
            if stepped {
                changed += 1;
                updates += 1;
                if updates >= problem.max_updates {
                    let worst = worst_kkt_violation(&alphas, &errors, problem);
                    if worst > tol {
                        return Err(Error::NonConvergence {
                            max_updates: problem.max_updates,
                            violation: worst,
                        });
                    }
                    return Ok(SmoOutcome { alphas, bias });
                }
            }
        }
        if examine_all {
            if changed == 0 {
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }
    Ok(SmoOutcome { alphas, bias })
}

fn worst_kkt_violation(alphas: &[f64], errors: &[f64], problem: &SmoProblem<'_>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..alphas.len() {
        let r = errors[i] * problem.targets[i];
        let violation = if alphas[i] <= 0.0 {
            (-r).max(0.0)
        } else if alphas[i] >= problem.reg_c {
            r.max(0.0)
        } else {
            r.abs()
        };
        worst = worst.max(violation);
    }
    worst
}

/// Trains one binary machine per distinct label against the rest.
///
/// `codes` holds one sample per column. Labels must contain at least two
/// distinct classes.
pub fn svc_train(
    codes: &ArrayView2<'_, f64>,
    labels: &[usize],
    degree: u32,
    reg_c: f64,
    tol: f64,
) -> Result<SvcModel> {
    if codes.ncols() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "svc_train",
            left: (codes.nrows(), codes.ncols()),
            right: (labels.len(), 1),
        });
    }
    if reg_c.is_nan() || reg_c <= 0.0 {
        return Err(Error::InvalidArgument {
            name: "reg_c",
            reason: format!("must be positive, got {reg_c}"),
        });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    if degree == 0 {
        return Err(Error::InvalidArgument {
            name: "degree",
            reason: "kernel degree must be at least one".into(),
        });
    }
    let mut class_ids: Vec<usize> = labels.to_vec();
    class_ids.sort_unstable();
    class_ids.dedup();
    if class_ids.len() < 2 {
        return Err(Error::SingleClass {
            class: class_ids.first().copied().unwrap_or(0),
        });
    }

    let mut gram = codes.t().dot(codes);
    gram.mapv_inplace(|v| (v + 1.0).powi(degree as i32));

    let train_one = |&class: &usize| -> Result<BinaryMachine> {
        let targets: Vec<f64> = labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let outcome = smo_binary(&SmoProblem {
            gram: &gram,
            targets: &targets,
            reg_c,
            tol,
            max_updates: MAX_PAIR_UPDATES,
        })?;
        let coefficients = outcome
            .alphas
            .iter()
            .zip(&targets)
            .map(|(&a, &y)| a * y)
            .collect();
        Ok(BinaryMachine {
            coefficients,
            bias: outcome.bias,
        })
    };

    #[cfg(feature = "parallel")]
    let machines: Result<Vec<BinaryMachine>> = class_ids.par_iter().map(train_one).collect();
    #[cfg(not(feature = "parallel"))]
    let machines: Result<Vec<BinaryMachine>> = class_ids.iter().map(train_one).collect();

    Ok(SvcModel {
        class_ids,
        machines: machines?,
        training_codes: codes.to_owned(),
        degree,
    })
}

impl SvcModel {
    /// Distinct class labels in ascending order, one machine each.
    pub fn class_ids(&self) -> &[usize] {
        &self.class_ids
    }

    /// Per-class decision values for each query column; rows follow
    /// [`Self::class_ids`] order.
    pub fn decision_values(&self, queries: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if queries.nrows() != self.training_codes.nrows() {
            return Err(Error::ShapeMismatch {
                op: "SvcModel::decision_values",
                left: (self.training_codes.nrows(), self.training_codes.ncols()),
                right: (queries.nrows(), queries.ncols()),
            });
        }
        let mut kernel = self.training_codes.t().dot(queries);
        kernel.mapv_inplace(|v| (v + 1.0).powi(self.degree as i32));
        let mut decisions = Array2::<f64>::zeros((self.machines.len(), queries.ncols()));
        for (row, machine) in self.machines.iter().enumerate() {
            let coef = Array1::from_vec(machine.coefficients.clone());
            let vals = coef.dot(&kernel);
            for (col, &v) in vals.iter().enumerate() {
                decisions[[row, col]] = v + machine.bias;
            }
        }
        Ok(decisions)
    }

    /// Predicted class for each query column: the machine with the largest
    /// decision value, lowest class id on ties.
    pub fn predict(&self, queries: &ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let decisions = self.decision_values(queries)?;
        Ok(decisions
            .axis_iter(Axis(1))
            .map(|col| {
                let scores: Vec<f64> = col.to_vec();
                self.class_ids[argmax_tie_lowest(&scores)]
            })
            .collect())
    }

    /// Fraction of training samples that are support vectors in at least
    /// one machine.
    pub fn support_fraction(&self) -> f64 {
        let n = self.training_codes.ncols();
        if n == 0 {
            return 0.0;
        }
        let support = (0..n)
            .filter(|&i| self.machines.iter().any(|m| m.coefficients[i] != 0.0))
            .count();
        support as f64 / n as f64
    }

    #[cfg(test)]
    fn machine_alphas(&self, machine: usize, targets: &[f64]) -> Vec<f64> {
        self.machines[machine]
            .coefficients
            .iter()
            .zip(targets)
            .map(|(&c, &y)| c * y)
            .collect()
    }
}
