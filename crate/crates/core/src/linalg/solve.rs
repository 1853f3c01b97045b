use super::{DenseMatrix, LinalgError};
use crate::graph::NormalizedAdjacency;
use crate::residual::ResidualStrengths;

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Stop once `‖(I − ΛA)Y − (I − Λ)H⁰‖_F ≤ rel_tol · ‖(I − Λ)H⁰‖_F`.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub check_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 100_000,
            check_every: 10,
        }
    }
}

/// Solve `(I − ΛA) Y = (I − Λ) H⁰` by the fixed-point iteration
/// `Y ← ΛAY + (I − Λ)H⁰`, which converges because `ρ(ΛA) ≤ max λᵢ < 1`.
///
/// Only sparse products are used, so the cost per iteration is `O(|E| d)`.
pub fn solve_residual_system(
    lambda: &ResidualStrengths,
    adj: &NormalizedAdjacency,
    h0: &DenseMatrix,
    opts: SolveOptions,
) -> Result<DenseMatrix, LinalgError> {
    let n = adj.n();
    if h0.rows() != n || lambda.len() != n {
        return Err(LinalgError::DimensionMismatch {
            op: "solve_residual_system",
            expected: (n, h0.cols()),
            found: (h0.rows(), lambda.len()),
        });
    }
    h0.ensure_finite()?;
    for (node, &value) in lambda.values().iter().enumerate() {
        if value.abs() >= 1.0 || !value.is_finite() {
            return Err(LinalgError::NonContractive { node, value });
        }
    }

    let lam = lambda.values();
    let keep: Vec<f64> = lam.iter().map(|l| 1.0 - l).collect();
    let rhs = h0.scale_rows(&keep)?;
    let rhs_norm = rhs.frobenius_norm();
    if rhs_norm == 0.0 {
        return Ok(DenseMatrix::zeros(n, h0.cols()));
    }

    let step = |y: &DenseMatrix| -> DenseMatrix {
        let mut next = adj.apply(y).scale_rows(lam).expect("row count checked");
        next.axpy(1.0, &rhs).expect("shape checked");
        next
    };

    let check_every = opts.check_every.max(1);
    let mut y = rhs.clone();
    for iter in 1..=opts.max_iter {
        let next = step(&y);
        if iter % check_every == 0 {
            // residual of the linear system at the current iterate: Y − ΛAY − b
            let residual = y.sub(&next)?.frobenius_norm();
            if residual <= opts.rel_tol * rhs_norm {
                return Ok(next);
            }
        }
        y = next;
    }
    Err(LinalgError::ConvergenceFailure {
        iterations: opts.max_iter,
    })
}
