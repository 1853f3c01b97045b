//! Dense kernels: products, norms, Jacobi SVD, rank with tolerance and the
//! iterative solve for the residual-propagation fixed point.

mod dense;
mod solve;
mod svd;

pub use dense::DenseMatrix;
pub use solve::{solve_residual_system, SolveOptions};
pub use svd::{svd, SvdResult, MAX_SWEEPS, OFF_DIAGONAL_TOL};

use thiserror::Error;

/// Relative rank tolerance used when callers do not pick one.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("{op}: dimension mismatch (expected {expected:?}, found {found:?})")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("matrix contains NaN or infinite entries")]
    NonFiniteInput,
    #[error("matrix has no entries")]
    EmptyMatrix,
    #[error("iteration did not converge within {iterations} iterations")]
    ConvergenceFailure { iterations: usize },
    #[error("matrix is numerically zero")]
    ZeroMatrix,
    #[error("relative tolerance {0} is outside (0, 1)")]
    InvalidTolerance(f64),
    #[error("residual strength {value} at node {node} is not below 1; the propagation does not contract")]
    NonContractive { node: usize, value: f64 },
}

fn check_rel_tol(rel_tol: f64) -> Result<(), LinalgError> {
    if rel_tol > 0.0 && rel_tol < 1.0 {
        Ok(())
    } else {
        Err(LinalgError::InvalidTolerance(rel_tol))
    }
}

/// Number of singular values strictly above `rel_tol · σ₁`. Zero for the
/// zero matrix.
pub fn numerical_rank(m: &DenseMatrix, rel_tol: f64) -> Result<usize, LinalgError> {
    check_rel_tol(rel_tol)?;
    Ok(rank_from_singular_values(&svd(m)?.singular_values, rel_tol))
}

pub fn rank_from_singular_values(sv: &[f64], rel_tol: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Smallest singular value that survives the `numerical_rank` threshold.
pub fn smallest_nonzero_singular(m: &DenseMatrix, rel_tol: f64) -> Result<f64, LinalgError> {
    check_rel_tol(rel_tol)?;
    let sv = svd(m)?.singular_values;
    let r = rank_from_singular_values(&sv, rel_tol);
    if r == 0 {
        return Err(LinalgError::ZeroMatrix);
    }
    Ok(sv[r - 1])
}

/// Entropy-based effective rank `exp(-Σ pᵢ ln pᵢ)` with `pᵢ = σᵢ / Σσ`.
/// Returns 0 for the zero matrix.
pub fn effective_rank_from_singular_values(sv: &[f64]) -> f64 {
    let total: f64 = sv.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let entropy: f64 = sv
        .iter()
        .map(|&s| s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    entropy.exp()
}

pub fn effective_rank(m: &DenseMatrix) -> Result<f64, LinalgError> {
    Ok(effective_rank_from_singular_values(&svd(m)?.singular_values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn rank_of_zero_and_outer_product() {
        assert_eq!(numerical_rank(&DenseMatrix::zeros(4, 4), 1e-9).unwrap(), 0);
        let mut rng = rng::seeded(11);
        let a = DenseMatrix::random_normal(5, 1, &mut rng);
        let b = DenseMatrix::random_normal(1, 4, &mut rng);
        assert_eq!(numerical_rank(&a.matmul(&b).unwrap(), 1e-10).unwrap(), 1);
    }

    #[test]
    fn rank_rejects_bad_tolerance() {
        let m = DenseMatrix::identity(2);
        assert!(matches!(numerical_rank(&m, 0.0), Err(LinalgError::InvalidTolerance(_))));
        assert!(matches!(numerical_rank(&m, 1.0), Err(LinalgError::InvalidTolerance(_))));
    }

    #[test]
    fn smallest_nonzero_examples() {
        let d = DenseMatrix::diagonal(&[3.0, 2.0, 0.0]);
        assert_eq!(smallest_nonzero_singular(&d, 1e-9).unwrap(), 2.0);
        assert_eq!(smallest_nonzero_singular(&DenseMatrix::identity(4), 1e-9).unwrap(), 1.0);
        assert!(matches!(
            smallest_nonzero_singular(&DenseMatrix::zeros(3, 2), 1e-9),
            Err(LinalgError::ZeroMatrix)
        ));
    }

    #[test]
    fn effective_rank_bounds() {
        assert!((effective_rank(&DenseMatrix::identity(5)).unwrap() - 5.0).abs() < 1e-12);
        assert!((effective_rank(&DenseMatrix::diagonal(&[2.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(effective_rank(&DenseMatrix::zeros(3, 3)).unwrap(), 0.0);
    }
}
