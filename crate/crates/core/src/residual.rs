//! Residual strengths Λ: learnable (logistic of a linear read-out of the
//! input features), PageRank top-k assignment, and the static `βI` case.

use std::fmt;

use thiserror::Error;

use crate::graph::Graph;
use crate::linalg::DenseMatrix;

/// Floor and ceiling for learned strengths; keeps every λ strictly inside
/// (0, 1) even when the logistic saturates.
pub const LAMBDA_CLAMP_LO: f64 = 1e-4;
pub const LAMBDA_CLAMP_HI: f64 = 1.0 - 1e-4;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_PAGERANK_TOL: f64 = 1e-10;
pub const DEFAULT_PAGERANK_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResidualError {
    #[error("feature dimension {features} does not match attention vector length {w_att}")]
    DimensionMismatch { features: usize, w_att: usize },
    #[error("PageRank did not converge in {iterations} iterations (last L1 change {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("damping {0} must lie in (0, 1)")]
    InvalidDamping(f64),
    #[error("tolerance {0} must be positive")]
    InvalidTolerance(f64),
    #[error("top fraction {0} must lie in (0, 1)")]
    InvalidFraction(f64),
    #[error("need 0 < lambda_min < lambda_max < 1, got lambda_min = {min}, lambda_max = {max}")]
    InvalidLambdaOrder { min: f64, max: f64 },
    #[error("beta {0} must lie in (0, 1)")]
    InvalidBeta(f64),
    #[error("residual strength {value} at node {node} is outside the admissible range")]
    OutOfRange { node: usize, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Learnable,
    PageRank,
    Static,
    /// Built directly from values; not validated.
    Manual,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Learnable => "learnable",
            Provenance::PageRank => "pagerank",
            Provenance::Static => "static",
            Provenance::Manual => "manual",
        })
    }
}

/// Per-node residual strengths, the diagonal of Λ.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualStrengths {
    values: Vec<f64>,
    provenance: Provenance,
    clamp: (f64, f64),
}

impl ResidualStrengths {
    /// Validated constructor: every value must lie in `[clamp.0, clamp.1]`
    /// and strictly inside (0, 1).
    pub fn new(values: Vec<f64>, provenance: Provenance, clamp: (f64, f64)) -> Result<Self, ResidualError> {
        for (node, &value) in values.iter().enumerate() {
            if !(value > 0.0 && value < 1.0 && value >= clamp.0 && value <= clamp.1) {
                return Err(ResidualError::OutOfRange { node, value });
            }
        }
        Ok(Self {
            values,
            provenance,
            clamp,
        })
    }

    /// Unvalidated strengths, e.g. Λ = 0 or λ = 1 for analysis of the
    /// degenerate cases. Consumers that need contraction check for it.
    pub fn from_raw(values: Vec<f64>) -> Self {
        Self {
            values,
            provenance: Provenance::Manual,
            clamp: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn clamp(&self) -> (f64, f64) {
        self.clamp
    }

    pub fn lambda_min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `1 − λᵢ` for every node.
    pub fn complement(&self) -> Vec<f64> {
        self.values.iter().map(|l| 1.0 - l).collect()
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `clamp(logistic(H⁰ w_att), 1e-4, 1 − 1e-4)` row by row.
pub fn learnable_lambda(h0: &DenseMatrix, w_att: &[f64]) -> Result<ResidualStrengths, ResidualError> {
    if h0.cols() != w_att.len() {
        return Err(ResidualError::DimensionMismatch {
            features: h0.cols(),
            w_att: w_att.len(),
        });
    }
    let values = (0..h0.rows())
        .map(|i| {
            let z: f64 = h0.row(i).iter().zip(w_att).map(|(x, w)| x * w).sum();
            logistic(z).clamp(LAMBDA_CLAMP_LO, LAMBDA_CLAMP_HI)
        })
        .collect();
    Ok(ResidualStrengths {
        values,
        provenance: Provenance::Learnable,
        clamp: (LAMBDA_CLAMP_LO, LAMBDA_CLAMP_HI),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PageRankScores {
    pub scores: Vec<f64>,
    pub damping: f64,
    pub iterations_used: usize,
    /// L1 change of the final iteration.
    pub residual: f64,
}

/// Power iteration on the weighted random walk `P = D⁻¹A` with uniform
/// teleportation. Dangling (isolated) nodes spread their mass uniformly.
pub fn pagerank(g: &Graph, damping: f64, tol: f64, max_iter: usize) -> Result<PageRankScores, ResidualError> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(ResidualError::InvalidDamping(damping));
    }
    if !(tol > 0.0) {
        return Err(ResidualError::InvalidTolerance(tol));
    }
    let n = g.n();
    if n == 0 {
        return Ok(PageRankScores {
            scores: Vec::new(),
            damping,
            iterations_used: 0,
            residual: 0.0,
        });
    }
    let degrees = g.degrees();
    let uniform = 1.0 / n as f64;
    let mut x = vec![uniform; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let dangling: f64 = (0..n).filter(|&i| degrees[i] == 0.0).map(|i| x[i]).sum();
        let base = (1.0 - damping) * uniform + damping * dangling * uniform;
        for (i, out) in next.iter_mut().enumerate() {
            // the graph is symmetric, so the in-neighbours of i are its row
            let inflow: f64 = g.neighbors(i).map(|(j, w)| w / degrees[j] * x[j]).sum();
            *out = base + damping * inflow;
        }
        let total: f64 = next.iter().sum();
        for v in next.iter_mut() {
            *v /= total;
        }
        residual = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if residual <= tol {
            return Ok(PageRankScores {
                scores: x,
                damping,
                iterations_used: iter,
                residual,
            });
        }
    }
    Err(ResidualError::ConvergenceFailure {
        iterations: max_iter,
        residual,
    })
}

/// Number of nodes receiving `lambda_max` for a top fraction `k` of `n`
/// nodes: `⌈k·n⌉`, guarded against `k·n` landing one ulp above an integer.
pub fn top_count(k: f64, n: usize) -> usize {
    let raw = k * n as f64;
    let rounded = raw.round();
    let count = if (raw - rounded).abs() <= 1e-9 * raw.max(1.0) {
        rounded
    } else {
        raw.ceil()
    };
    (count as usize).min(n)
}

/// Assign `lambda_max` to the `⌈k·n⌉` highest-scoring nodes (ties broken by
/// lower node index) and `lambda_min` to the rest.
pub fn pagerank_lambda(
    scores: &PageRankScores,
    k: f64,
    lambda_max: f64,
    lambda_min: f64,
) -> Result<ResidualStrengths, ResidualError> {
    top_k_lambda(&scores.scores, k, lambda_max, lambda_min)
}

/// Top-k assignment on an arbitrary score vector.
pub fn top_k_lambda(
    scores: &[f64],
    k: f64,
    lambda_max: f64,
    lambda_min: f64,
) -> Result<ResidualStrengths, ResidualError> {
    if !(k > 0.0 && k < 1.0) {
        return Err(ResidualError::InvalidFraction(k));
    }
    if !(0.0 < lambda_min && lambda_min < lambda_max && lambda_max < 1.0) {
        return Err(ResidualError::InvalidLambdaOrder {
            min: lambda_min,
            max: lambda_max,
        });
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut values = vec![lambda_min; n];
    for &i in order.iter().take(top_count(k, n)) {
        values[i] = lambda_max;
    }
    Ok(ResidualStrengths {
        values,
        provenance: Provenance::PageRank,
        clamp: (lambda_min, lambda_max),
    })
}

/// Λ = βI.
pub fn static_lambda(beta: f64, n: usize) -> Result<ResidualStrengths, ResidualError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(ResidualError::InvalidBeta(beta));
    }
    Ok(ResidualStrengths {
        values: vec![beta; n],
        provenance: Provenance::Static,
        clamp: (beta, beta),
    })
}

/// Spearman rank correlation (average ranks for ties). `None` when either
/// input is constant or the lengths differ.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && x[order[end + 1]] == x[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0;
        for &i in &order[start..=end] {
            ranks[i] = avg;
        }
        start = end + 1;
    }
    ranks
}
