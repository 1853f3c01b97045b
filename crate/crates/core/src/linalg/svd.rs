//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of a working copy of the matrix are rotated pairwise until every
//! pair is orthogonal to relative precision [`OFF_DIAGONAL_TOL`]; the column
//! norms are then the singular values and the accumulated rotations give `V`.
//! Accurate for the small and medium matrices used here (a few hundred
//! columns at most).

use super::{DenseMatrix, LinalgError};

pub const MAX_SWEEPS: usize = 60;
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Thin SVD `M = U diag(s) Vᵀ` with `U: m×k`, `V: n×k`, `k = min(m, n)`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    /// `U diag(s) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let us = self
            .u
            .transpose()
            .scale_rows(&self.singular_values)
            .expect("factor shapes agree")
            .transpose();
        us.matmul_t(&self.v).expect("factor shapes agree")
    }
}

pub fn svd(m: &DenseMatrix) -> Result<SvdResult, LinalgError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(LinalgError::EmptyMatrix);
    }
    m.ensure_finite()?;
    let mut result = if m.rows() >= m.cols() {
        jacobi_tall(m)?
    } else {
        let t = jacobi_tall(&m.transpose())?;
        SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        }
    };
    apply_sign_convention(&mut result);
    Ok(result)
}

fn jacobi_tall(m: &DenseMatrix) -> Result<SvdResult, LinalgError> {
    let (rows, n) = m.shape();
    // column-major working copies
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // columns at rounding level relative to ‖M‖_F are numerically zero;
    // rotating against them only stirs noise and can cycle forever
    let frob = m.frobenius_norm();
    let noise = rows as f64 * f64::EPSILON * frob;
    let floor = noise * noise;
    let mut converged = n < 2;
    for _sweep in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (ap, aq) = (&a[p], &a[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for i in 0..rows {
                        alpha += ap[i] * ap[i];
                        beta += aq[i] * aq[i];
                        gamma += ap[i] * aq[i];
                    }
                    (alpha, beta, gamma)
                };
                let scale = (alpha * beta).sqrt();
                if gamma == 0.0
                    || scale < f64::MIN_POSITIVE
                    || alpha <= floor
                    || beta <= floor
                    || gamma.abs() <= OFF_DIAGONAL_TOL * scale
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(LinalgError::ConvergenceFailure { iterations: MAX_SWEEPS });
    }

    let norms: Vec<f64> = a
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let sigma_max = norms[order[0]];
    let negligible = sigma_max * 1e-13;
    let mut u = DenseMatrix::zeros(rows, n);
    let mut vm = DenseMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        singular_values.push(sigma);
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
        if sigma > negligible && sigma > 0.0 {
            for i in 0..rows {
                u[(i, k)] = a[j][i] / sigma;
            }
        } else {
            missing.push(k);
        }
    }
    complete_orthonormal_columns(&mut u, &missing);
    Ok(SvdResult {
        u,
        singular_values,
        v: vm,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fill the listed columns of `u` with unit vectors orthogonal to all other
/// columns (used for numerically null singular directions).
fn complete_orthonormal_columns(u: &mut DenseMatrix, missing: &[usize]) {
    let rows = u.rows();
    let mut filled: Vec<usize> = (0..u.cols()).filter(|k| !missing.contains(k)).collect();
    for &k in missing {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..rows {
            let mut cand = vec![0.0; rows];
            cand[e] = 1.0;
            for _ in 0..2 {
                for &f in &filled {
                    let dot: f64 = (0..rows).map(|i| u[(i, f)] * cand[i]).sum();
                    for (i, c) in cand.iter_mut().enumerate() {
                        *c -= dot * u[(i, f)];
                    }
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, cand));
            }
            if norm > 0.7 {
                break;
            }
        }
        let (norm, cand) = best.expect("at least one basis vector");
        for (i, c) in cand.iter().enumerate() {
            u[(i, k)] = c / norm;
        }
        filled.push(k);
    }
}

/// Make the largest-magnitude entry of every left singular vector
/// nonnegative, flipping the matching right vector with it.
fn apply_sign_convention(r: &mut SvdResult) {
    for k in 0..r.u.cols() {
        let mut best = 0;
        for i in 1..r.u.rows() {
            if r.u[(i, k)].abs() > r.u[(best, k)].abs() {
                best = i;
            }
        }
        if r.u[(best, k)] < 0.0 {
            for i in 0..r.u.rows() {
                r.u[(i, k)] = -r.u[(i, k)];
            }
            for i in 0..r.v.rows() {
                r.v[(i, k)] = -r.v[(i, k)];
            }
        }
    }
}
