//! Symmetric stochastic ultrametric matrices and their roots.
//!
//! Every U-th root of such a matrix is again stochastic, which yields a
//! chain of increasingly garbled sensors B^{1/U} ⪰ B^{2/U} ⪰ … ⪰ B.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{OrderCheckReport, Witness, Worst};
use crate::error::{Error, Result};

const ULTRAMETRIC_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;
const ROOT_STOCHASTIC_TOL: f64 = 1e-10;
const ROOT_POWER_TOL: f64 = 1e-8;

fn entries(condition: &str, indices: &[usize]) -> Witness {
    Witness::Entries {
        condition: condition.to_string(),
        indices: indices.iter().map(|i| i + 1).collect(),
    }
}

/// Checks symmetry, stochasticity, B_ij ≥ min(B_ik, B_kj) for all (i, j, k)
/// and strict diagonal dominance B_ii > max_{k≠i} B_ik.
///
/// Non-strict conditions allow 1e-12 of slack; the diagonal must beat the
/// rest of its row by more than that.
pub fn is_ultrametric(b: &DMatrix<f64>) -> OrderCheckReport {
    let n = b.nrows();
    if n != b.ncols() {
        return OrderCheckReport::new(
            "ultrametric",
            Some((f64::INFINITY, entries("square", &[b.nrows() - 1, b.ncols() - 1]))),
            ULTRAMETRIC_TOL,
            0,
        );
    }
    let mut worst = Worst::none();
    let mut order = 0u64;
    let mut next = || {
        order += 1;
        order
    };
    for i in 0..n {
        let sum: f64 = b.row(i).iter().sum();
        worst.offer((sum - 1.0).abs(), next(), || entries("row_sum", &[i]));
        for j in 0..n {
            worst.offer(-b[(i, j)], next(), || entries("nonnegative", &[i, j]));
            worst.offer((b[(i, j)] - b[(j, i)]).abs(), next(), || entries("symmetric", &[i, j]));
            for k in 0..n {
                let defect = b[(i, k)].min(b[(k, j)]) - b[(i, j)];
                worst.offer(defect, next(), || entries("min_inequality", &[i, j, k]));
            }
        }
        let off = (0..n)
            .filter(|&k| k != i)
            .map(|k| b[(i, k)])
            .fold(f64::NEG_INFINITY, f64::max);
        if off.is_finite() {
            worst.offer(off - b[(i, i)] + 2.0 * ULTRAMETRIC_TOL, next(), || {
                entries("diagonal_dominance", &[i])
            });
        }
    }
    OrderCheckReport::new("ultrametric", worst.into_option(), ULTRAMETRIC_TOL, n * n * (n + 3))
}

/// Integer power by repeated squaring.
pub fn matrix_power(m: &DMatrix<f64>, mut exponent: u32) -> DMatrix<f64> {
    let mut result = DMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    while exponent > 0 {
        if exponent & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        exponent >>= 1;
    }
    result
}

/// Principal U-th root of a symmetric stochastic ultrametric matrix by
/// spectral decomposition B = QΛQ', root = QΛ^{1/U}Q'.
///
/// The root is checked to be row-stochastic and nonnegative within 1e-10
/// and to reproduce B when raised to the U-th power within 1e-8.
pub fn matrix_root(b: &DMatrix<f64>, degree: u32) -> Result<DMatrix<f64>> {
    if degree == 0 {
        return Err(Error::InvalidParameter {
            field: "root_degree".into(),
            reason: "must be at least 1".into(),
        });
    }
    let report = is_ultrametric(b);
    if !report.holds {
        return Err(Error::PreconditionFailed(format!(
            "matrix is not symmetric stochastic ultrametric (worst defect {:e}, {:?})",
            report.worst_violation, report.witness
        )));
    }
    if degree == 1 {
        return Ok(b.clone());
    }
    let eig = SymmetricEigen::new(b.clone());
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -EIGEN_TOL {
            return Err(Error::NegativeEigenvalue(*v));
        }
        *v = v.max(0.0).powf(1.0 / degree as f64);
    }
    let q = &eig.eigenvectors;
    let root = q * DMatrix::from_diagonal(&roots) * q.transpose();

    for (i, row) in root.row_iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROOT_STOCHASTIC_TOL {
            return Err(Error::PostconditionFailed(format!(
                "root row {} sums to {sum}",
                i + 1
            )));
        }
    }
    let min = root.min();
    if min < -ROOT_STOCHASTIC_TOL {
        return Err(Error::PostconditionFailed(format!("root has negative entry {min}")));
    }
    let err = (matrix_power(&root, degree) - b).amax();
    if err > ROOT_POWER_TOL {
        return Err(Error::PostconditionFailed(format!(
            "root raised to power {degree} misses the matrix by {err:e}"
        )));
    }
    Ok(root)
}
