//! Dirichlet energy and the spectral lower bounds built on it.
//!
//! The canonical energy is the trace form `tr(Xᵀ(I − A)X)`, evaluated with a
//! single sparse product and a Frobenius inner product. The edge-sum form is
//! kept as an independent path for cross-checking.

use thiserror::Error;

use crate::graph::{Graph, NormMode, NormalizedAdjacency};
use crate::linalg::{self, DenseMatrix, LinalgError};
use crate::residual::ResidualStrengths;
use crate::rng;

/// Absolute-plus-relative slack for inequality checks.
pub const BOUND_SLACK: f64 = 1e-10;

/// Above this many nodes σ_r(A) is estimated iteratively instead of by a
/// dense SVD.
pub const DENSE_SVD_MAX_NODES: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("{op}: shape mismatch ({expected:?} vs {found:?})")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("leaky-ReLU slope {0} must lie in (0, 1)")]
    InvalidSlope(f64),
    #[error("eta * sigma_bar_w = {0} >= 1; the geometric series diverges")]
    DivergentSeries(f64),
    #[error("invalid residual strengths: lambda_min = {lambda_min}, lambda_max = {lambda_max}")]
    InvalidLambda { lambda_min: f64, lambda_max: f64 },
    #[error("invalid bound input {name} = {value}")]
    InvalidInput { name: &'static str, value: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn check_rows(adj: &NormalizedAdjacency, x: &DenseMatrix, op: &'static str) -> Result<(), EnergyError> {
    if x.rows() != adj.n() {
        return Err(EnergyError::DimensionMismatch {
            op,
            expected: (adj.n(), x.cols()),
            found: x.shape(),
        });
    }
    Ok(())
}

/// `tr(xᵀ(I − A)x)`. Rounding can push an exactly-smooth signal a few ulps
/// below zero; the result is floored at 0.
pub fn dirichlet_energy(adj: &NormalizedAdjacency, x: &DenseMatrix) -> Result<f64, EnergyError> {
    check_rows(adj, x, "dirichlet_energy")?;
    let ax = adj.apply(x);
    let smooth = x.sub(&ax)?;
    Ok(x.frobenius_dot(&smooth)?.max(0.0))
}

/// `½ Σ_{(i,j)} a_ij ‖xᵢ/√d̂ᵢ − xⱼ/√d̂ⱼ‖²` over ordered pairs, where `d̂` is the
/// degree used by `mode` (`dᵢ` or `1 + dᵢ`).
pub fn dirichlet_energy_edge_sum(g: &Graph, mode: NormMode, x: &DenseMatrix) -> Result<f64, EnergyError> {
    if x.rows() != g.n() {
        return Err(EnergyError::DimensionMismatch {
            op: "dirichlet_energy_edge_sum",
            expected: (g.n(), x.cols()),
            found: x.shape(),
        });
    }
    let scale: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| 1.0 / mode.effective_degree(d).sqrt())
        .collect();
    let mut total = 0.0;
    for i in 0..g.n() {
        for (j, w) in g.neighbors(i) {
            let diff: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| {
                    let d = a * scale[i] - b * scale[j];
                    d * d
                })
                .sum();
            total += w * diff;
        }
    }
    Ok(0.5 * total)
}

/// `tr(xᵀ(I − A)y)`, the cross term of the energy of a sum.
pub fn trace_alignment(adj: &NormalizedAdjacency, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, EnergyError> {
    check_rows(adj, x, "trace_alignment")?;
    if x.shape() != y.shape() {
        return Err(EnergyError::DimensionMismatch {
            op: "trace_alignment",
            expected: x.shape(),
            found: y.shape(),
        });
    }
    let smooth = y.sub(&adj.apply(y))?;
    Ok(x.frobenius_dot(&smooth)?)
}

/// Energy lower bound for a stack of adaptive residual layers.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLowerBound {
    pub alpha: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub sigma_r_adj: f64,
    /// Infimum over layers of σ_r(W)².
    pub sigma_bar_w: f64,
    /// Infimum over layers of σ_r(Θ)².
    pub sigma_bar_theta: f64,
    /// `α² λ_min² σ_r(A)²`
    pub eta: f64,
    /// `α² (1 − λ_max)²`
    pub zeta: f64,
    pub bound_value: f64,
}

/// `ζ σ̄_Θ e0 / (1 − η σ̄_W)` with `η = α²λ_min²σ_r(A)²`, `ζ = α²(1 − λ_max)²`.
pub fn energy_lower_bound(
    alpha: f64,
    lambda_min: f64,
    lambda_max: f64,
    sigma_r_adj: f64,
    sigma_bar_w: f64,
    sigma_bar_theta: f64,
    e0: f64,
) -> Result<EnergyLowerBound, EnergyError> {
    if !(lambda_min > 0.0 && lambda_min <= lambda_max && lambda_max < 1.0) {
        return Err(EnergyError::InvalidLambda { lambda_min, lambda_max });
    }
    for (name, value) in [
        ("alpha", alpha),
        ("sigma_r_adj", sigma_r_adj),
        ("sigma_bar_w", sigma_bar_w),
        ("sigma_bar_theta", sigma_bar_theta),
        ("e0", e0),
    ] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(EnergyError::InvalidInput { name, value });
        }
    }
    if alpha == 0.0 {
        return Err(EnergyError::InvalidInput {
            name: "alpha",
            value: alpha,
        });
    }
    let a2 = alpha * alpha;
    let eta = a2 * lambda_min * lambda_min * sigma_r_adj * sigma_r_adj;
    let zeta = a2 * (1.0 - lambda_max) * (1.0 - lambda_max);
    let ratio = eta * sigma_bar_w;
    if ratio >= 1.0 {
        return Err(EnergyError::DivergentSeries(ratio));
    }
    Ok(EnergyLowerBound {
        alpha,
        lambda_min,
        lambda_max,
        sigma_r_adj,
        sigma_bar_w,
        sigma_bar_theta,
        eta,
        zeta,
        bound_value: zeta * sigma_bar_theta * e0 / (1.0 - ratio),
    })
}

/// Energies of a scalar signal before and after leaky ReLU with slope `alpha`.
pub fn leaky_relu_energy_ratio(adj: &NormalizedAdjacency, f: &[f64], alpha: f64) -> Result<(f64, f64), EnergyError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EnergyError::InvalidSlope(alpha));
    }
    let before = DenseMatrix::column_vector(f);
    let after = before.map(|v| if v >= 0.0 { v } else { alpha * v });
    Ok((dirichlet_energy(adj, &before)?, dirichlet_energy(adj, &after)?))
}

/// Outcome of a single inequality check `lhs ≥ rhs` (up to slack).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs - rhs >= -BOUND_SLACK * (1.0 + rhs.abs()),
        }
    }

    pub fn slack(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// `‖f W‖ ≥ σ_r(W) ‖f‖` for a row vector `f`. Only guaranteed when `f` lies
/// in the span of W's leading left singular vectors.
pub fn weight_bound_check(w: &DenseMatrix, f: &[f64], rel_tol: f64) -> Result<BoundCheck, EnergyError> {
    if f.len() != w.rows() {
        return Err(EnergyError::DimensionMismatch {
            op: "weight_bound_check",
            expected: (1, w.rows()),
            found: (1, f.len()),
        });
    }
    let row = DenseMatrix::from_vec(1, f.len(), f.to_vec())?;
    let lhs = row.matmul(w)?.frobenius_norm();
    let sigma_r = linalg::smallest_nonzero_singular(w, rel_tol)?;
    Ok(BoundCheck::new(lhs, sigma_r * row.frobenius_norm()))
}

/// `‖Λ A f‖ ≥ λ_min σ_r(A) ‖f‖` for `f` in the row space of A.
pub fn aggregation_bound_check(
    adj: &NormalizedAdjacency,
    lambda: &ResidualStrengths,
    f: &[f64],
    sigma_r_adj: f64,
) -> Result<BoundCheck, EnergyError> {
    if f.len() != adj.n() || lambda.len() != adj.n() {
        return Err(EnergyError::DimensionMismatch {
            op: "aggregation_bound_check",
            expected: (adj.n(), 1),
            found: (f.len(), lambda.len()),
        });
    }
    let col = DenseMatrix::column_vector(f);
    let lhs = adj.apply(&col).scale_rows(lambda.values())?.frobenius_norm();
    Ok(BoundCheck::new(
        lhs,
        lambda.lambda_min() * sigma_r_adj * col.frobenius_norm(),
    ))
}

/// `ℰ(Λ A X W) ≥ λ_min² σ_r(A)² σ_r(W)² ℰ(X)`.
pub fn composite_energy_check(
    adj: &NormalizedAdjacency,
    lambda: &ResidualStrengths,
    x: &DenseMatrix,
    w: &DenseMatrix,
    sigma_r_adj: f64,
    rel_tol: f64,
) -> Result<BoundCheck, EnergyError> {
    check_rows(adj, x, "composite_energy_check")?;
    let out = adj.apply(x).matmul(w)?.scale_rows(lambda.values())?;
    let sigma_w = linalg::smallest_nonzero_singular(w, rel_tol)?;
    let lm = lambda.lambda_min();
    let factor = lm * lm * sigma_r_adj * sigma_r_adj * sigma_w * sigma_w;
    Ok(BoundCheck::new(
        dirichlet_energy(adj, &out)?,
        factor * dirichlet_energy(adj, x)?,
    ))
}

/// Smallest nonzero singular value of the normalised adjacency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaEstimate {
    pub value: f64,
    /// Set when the value came from the iterative estimate rather than a
    /// dense SVD.
    pub approximate: bool,
}

/// σ_r(A) by dense SVD for up to [`DENSE_SVD_MAX_NODES`] nodes. Larger
/// operators use power iteration on `I − A²` (whose top eigenvalue is
/// `1 − σ_min²` because `‖A‖₂ ≤ 1`); if the estimate falls under the rank
/// threshold the threshold itself is returned.
pub fn adjacency_sigma_r(adj: &NormalizedAdjacency, rel_tol: f64) -> Result<SigmaEstimate, EnergyError> {
    if adj.n() <= DENSE_SVD_MAX_NODES {
        return Ok(SigmaEstimate {
            value: linalg::smallest_nonzero_singular(&adj.to_dense(), rel_tol)?,
            approximate: false,
        });
    }
    let n = adj.n();
    let mut rng = rng::seeded(0x0515_7a11);
    let mut v = DenseMatrix::random_normal(n, 1, &mut rng);
    let norm = v.frobenius_norm();
    v = v.scale(1.0 / norm);
    let mut mu = 0.0;
    for _ in 0..2000 {
        let a2v = adj.apply(&adj.apply(&v));
        let bv = v.sub(&a2v)?;
        let next_mu = v.frobenius_dot(&bv)?;
        let norm = bv.frobenius_norm();
        if norm == 0.0 {
            break;
        }
        v = bv.scale(1.0 / norm);
        let done = (next_mu - mu).abs() <= 1e-12;
        mu = next_mu;
        if done {
            break;
        }
    }
    let sigma_min = (1.0 - mu).max(0.0).sqrt();
    Ok(SigmaEstimate {
        value: sigma_min.max(rel_tol),
        approximate: true,
    })
}

/// Per-layer diagnostics of a propagation run. Layer 0 is the input.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyReport {
    pub per_layer_energy: Vec<f64>,
    pub per_layer_rank: Vec<usize>,
    pub per_layer_effective_rank: Vec<f64>,
    pub bound: Option<EnergyLowerBound>,
    /// σ_r(A) behind `bound` was estimated, not computed exactly.
    pub bound_approximate: bool,
}

impl EnergyReport {
    pub fn push_layer(&mut self, adj: &NormalizedAdjacency, h: &DenseMatrix, rank_tol: f64) -> Result<(), EnergyError> {
        let energy = dirichlet_energy(adj, h)?;
        let sv = linalg::svd(h)?.singular_values;
        self.per_layer_energy.push(energy);
        self.per_layer_rank
            .push(linalg::rank_from_singular_values(&sv, rank_tol));
        self.per_layer_effective_rank
            .push(linalg::effective_rank_from_singular_values(&sv));
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.per_layer_energy.len()
    }

    /// Last-layer energy over input energy.
    pub fn energy_ratio(&self) -> Option<f64> {
        let first = *self.per_layer_energy.first()?;
        let last = *self.per_layer_energy.last()?;
        (first > 0.0).then(|| last / first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, gnp_random_graph, normalize};

    #[test]
    fn null_space_has_zero_energy() {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (0, 3, 1.0)], 4).unwrap();
        let adj = normalize(&g, NormMode::Augmented).unwrap();
        let c = [1.5, -2.0];
        let x = DenseMatrix::from_fn(4, 2, |i, j| (1.0 + g.degrees()[i]).sqrt() * c[j]);
        assert!(dirichlet_energy(&adj, &x).unwrap() < 1e-14);
    }

    #[test]
    fn k2_augmented_unit_impulse() {
        // oracle: ½ Σ over both orientations of the single edge, each (1/√2 − 0)²
        let g = build_graph(&[(0, 1, 1.0)], 2).unwrap();
        let adj = normalize(&g, NormMode::Augmented).unwrap();
        let x = DenseMatrix::from_rows(&[[1.0], [0.0]]);
        let oracle = 0.5 * 2.0 * (1.0 / 2f64.sqrt()).powi(2);
        assert!((dirichlet_energy(&adj, &x).unwrap() - oracle).abs() < 1e-15);
        assert!((dirichlet_energy(&adj, &x).unwrap() - 0.5).abs() < 1e-15);
        assert!((dirichlet_energy_edge_sum(&g, NormMode::Augmented, &x).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trace_and_edge_sum_agree() {
        let mut r = rng::seeded(21);
        for mode in [NormMode::Augmented, NormMode::Plain] {
            for _ in 0..20 {
                let g = gnp_random_graph(15, 0.4, true, &mut r).unwrap();
                if mode == NormMode::Plain && !g.isolated_nodes().is_empty() {
                    continue;
                }
                let adj = normalize(&g, mode).unwrap();
                let x = DenseMatrix::random_normal(15, 3, &mut r);
                let t = dirichlet_energy(&adj, &x).unwrap();
                let e = dirichlet_energy_edge_sum(&g, mode, &x).unwrap();
                assert!((t - e).abs() <= 1e-10 * e.max(1e-300), "{t} vs {e}");
            }
        }
    }

    #[test]
    fn trace_alignment_examples() {
        let mut r = rng::seeded(22);
        let g = gnp_random_graph(5, 0.7, false, &mut r).unwrap();
        let adj = normalize(&g, NormMode::Augmented).unwrap();
        let x = DenseMatrix::random_normal(5, 2, &mut r);
        let y = DenseMatrix::random_normal(5, 2, &mut r);
        assert!((trace_alignment(&adj, &x, &x).unwrap() - dirichlet_energy(&adj, &x).unwrap()).abs() < 1e-12);
        assert_eq!(trace_alignment(&adj, &x, &DenseMatrix::zeros(5, 2)).unwrap(), 0.0);
        // dense Laplacian oracle
        let lap = DenseMatrix::identity(5).sub(&adj.to_dense()).unwrap();
        let oracle: f64 = {
            let ly = lap.matmul(&y).unwrap();
            (0..5)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| x[(i, j)] * ly[(i, j)])
                .sum()
        };
        assert!((trace_alignment(&adj, &x, &y).unwrap() - oracle).abs() < 1e-12);
        assert!(matches!(
            trace_alignment(&adj, &x, &DenseMatrix::zeros(5, 3)),
            Err(EnergyError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn energy_bound_arithmetic() {
        let b = energy_lower_bound(1.0, 0.5, 0.5, 1.0, 0.0, 1.0, 4.0).unwrap();
        assert_eq!((b.eta, b.zeta, b.bound_value), (0.25, 0.25, 1.0));
        let near_one = energy_lower_bound(1.0, 0.5, 1.0 - 1e-9, 1.0, 0.0, 1.0, 4.0).unwrap();
        assert!(near_one.zeta < 1e-17 && near_one.bound_value < 1e-16);
        assert!(matches!(
            energy_lower_bound(1.0, 0.5, 1.0, 1.0, 0.0, 1.0, 4.0),
            Err(EnergyError::InvalidLambda { .. })
        ));
        assert!(matches!(
            energy_lower_bound(2.0, 0.9, 0.9, 1.0, 1.0, 1.0, 4.0),
            Err(EnergyError::DivergentSeries(_))
        ));
    }

    #[test]
    fn leaky_relu_sign_cases() {
        let mut r = rng::seeded(23);
        let g = gnp_random_graph(12, 0.5, true, &mut r).unwrap();
        let adj = normalize(&g, NormMode::Augmented).unwrap();
        let pos: Vec<f64> = (0..12).map(|_| rng::uniform(&mut r, 0.0, 2.0)).collect();
        let (b, a) = leaky_relu_energy_ratio(&adj, &pos, 0.2).unwrap();
        assert_eq!(a, b);
        let neg: Vec<f64> = pos.iter().map(|v| -v - 0.1).collect();
        let (b, a) = leaky_relu_energy_ratio(&adj, &neg, 0.2).unwrap();
        assert!((a - 0.04 * b).abs() <= 1e-12 * b);
        assert!(matches!(
            leaky_relu_energy_ratio(&adj, &pos, 1.0),
            Err(EnergyError::InvalidSlope(_))
        ));
    }

    #[test]
    fn weight_bound_boundary_and_counterexample() {
        let w = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]);
        let inside = weight_bound_check(&w, &[2.0, 0.0], 1e-9).unwrap();
        assert!(inside.holds);
        assert_eq!(inside.slack(), 0.0);
        let outside = weight_bound_check(&w, &[0.0, 1.0], 1e-9).unwrap();
        assert_eq!((outside.lhs, outside.rhs), (0.0, 1.0));
        assert!(!outside.holds);
    }

    #[test]
    fn composite_bound_fails_when_aggregation_lands_in_null_space() {
        // X = A⁻¹ Λ⁻¹ √d̂ has ΛAX = √d̂, whose energy is zero, while ℰ(X) > 0.
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], 4).unwrap();
        let adj = normalize(&g, NormMode::Augmented).unwrap();
        let dense = adj.to_dense();
        let dec = linalg::svd(&dense).unwrap();
        assert!(dec.singular_values[3] > 0.05, "operator must be invertible");
        let lam = ResidualStrengths::from_raw(vec![0.3, 0.6, 0.8, 0.4]);
        let target: Vec<f64> = g.degrees().iter().map(|d| (1.0 + d).sqrt() / 1.0).collect();
        let rhs: Vec<f64> = target.iter().zip(lam.values()).map(|(t, l)| t / l).collect();
        let ut_b = dec.u.t_matmul(&DenseMatrix::column_vector(&rhs)).unwrap();
        let scaled = DenseMatrix::from_fn(4, 1, |i, _| ut_b[(i, 0)] / dec.singular_values[i]);
        let x = dec.v.matmul(&scaled).unwrap();
        let sigma = smallest_nonzero(&dense);
        let check = composite_energy_check(&adj, &lam, &x, &DenseMatrix::identity(1), sigma, 1e-9).unwrap();
        assert!(
            check.lhs < 1e-12,
            "aggregated signal should be smooth, got {}",
            check.lhs
        );
        assert!(check.rhs > 1e-3);
        assert!(!check.holds);
    }

    fn smallest_nonzero(m: &DenseMatrix) -> f64 {
        linalg::smallest_nonzero_singular(m, 1e-9).unwrap()
    }

    #[test]
    fn sigma_estimate_dense_path_on_k2() {
        let g = build_graph(&[(0, 1, 1.0)], 2).unwrap();
        let plain = normalize(&g, NormMode::Plain).unwrap();
        let s = adjacency_sigma_r(&plain, 1e-9).unwrap();
        assert_eq!(
            s,
            SigmaEstimate {
                value: 1.0,
                approximate: false
            }
        );
        // augmented K2 is rank one: the only nonzero singular value is 1
        let aug = normalize(&g, NormMode::Augmented).unwrap();
        assert!((adjacency_sigma_r(&aug, 1e-9).unwrap().value - 1.0).abs() < 1e-14);
    }
}
