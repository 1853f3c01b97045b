//! Forward dynamics: the linear residual propagation, its fixed point, the
//! adaptive residual layer and the plain GCN layer.

use thiserror::Error;

use crate::energy::{self, EnergyError, EnergyReport};
use crate::graph::NormalizedAdjacency;
use crate::linalg::{self, DenseMatrix, LinalgError};
use crate::residual::ResidualStrengths;
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagateError {
    #[error("{op}: shape mismatch (expected {expected:?}, found {found:?})")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("leaky-ReLU slope {0} must lie in (0, 1)")]
    InvalidSlope(f64),
    #[error("non-contractive: residual strength {value} at node {node} is not below 1")]
    NonContractive { node: usize, value: f64 },
    #[error("propagation did not settle within {steps} steps")]
    ConvergenceFailure { steps: usize },
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
}

impl Activation {
    pub fn validate(self) -> Result<Self, PropagateError> {
        match self {
            Activation::LeakyRelu(a) if !(a > 0.0 && a < 1.0) => Err(PropagateError::InvalidSlope(a)),
            other => Ok(other),
        }
    }

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(0.0),
            Activation::LeakyRelu(a) => {
                if v >= 0.0 {
                    v
                } else {
                    a * v
                }
            }
        }
    }

    /// Derivative at `v`; the kink at 0 takes the right-hand value.
    #[inline]
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(a) => {
                if v >= 0.0 {
                    1.0
                } else {
                    a
                }
            }
        }
    }

    /// Slope entering the energy lower bound, if the activation has one.
    pub fn energy_slope(self) -> Option<f64> {
        match self {
            Activation::Identity => Some(1.0),
            Activation::LeakyRelu(a) => Some(a),
            Activation::Relu => None,
        }
    }
}

/// A parameter tensor with its gradient slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
}

impl Param {
    pub fn new(value: DenseMatrix) -> Self {
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }
}

/// `w` maps the previous layer, `theta` always maps from the input width.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub w: Param,
    pub theta: Param,
}

impl LayerParams {
    pub fn new(w: DenseMatrix, theta: DenseMatrix) -> Self {
        Self {
            w: Param::new(w),
            theta: Param::new(theta),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::new(DenseMatrix::identity(d), DenseMatrix::identity(d))
    }
}

/// How a layer mixes aggregation with the initial features.
#[derive(Clone, Copy, Debug)]
pub enum Propagation<'a> {
    Adaptive(&'a ResidualStrengths),
    /// Residual branch skipped: `σ(A H W)`.
    ExactGcn,
}

fn check_nodes(
    op: &'static str,
    adj: &NormalizedAdjacency,
    lambda: Option<&ResidualStrengths>,
    h_l: &DenseMatrix,
    h0: &DenseMatrix,
) -> Result<(), PropagateError> {
    let n = adj.n();
    if h_l.rows() != n {
        return Err(PropagateError::DimensionMismatch {
            op,
            expected: (n, h_l.cols()),
            found: h_l.shape(),
        });
    }
    if h0.rows() != n {
        return Err(PropagateError::DimensionMismatch {
            op,
            expected: (n, h0.cols()),
            found: h0.shape(),
        });
    }
    if let Some(l) = lambda {
        if l.len() != n {
            return Err(PropagateError::DimensionMismatch {
                op,
                expected: (n, 1),
                found: (l.len(), 1),
            });
        }
    }
    Ok(())
}

/// `Λ A H + (I − Λ) H⁰`.
pub fn simplified_step(
    lambda: &ResidualStrengths,
    adj: &NormalizedAdjacency,
    h_l: &DenseMatrix,
    h0: &DenseMatrix,
) -> Result<DenseMatrix, PropagateError> {
    check_nodes("simplified_step", adj, Some(lambda), h_l, h0)?;
    if h_l.cols() != h0.cols() {
        return Err(PropagateError::DimensionMismatch {
            op: "simplified_step",
            expected: h0.shape(),
            found: h_l.shape(),
        });
    }
    let mut out = adj.apply(h_l).scale_rows(lambda.values())?;
    out.axpy(1.0, &h0.scale_rows(&lambda.complement())?)?;
    Ok(out)
}

/// Iterate [`simplified_step`] from `H⁰` until the relative change drops to
/// `tol`. Returns the final iterate and the number of steps taken.
pub fn simplified_limit(
    lambda: &ResidualStrengths,
    adj: &NormalizedAdjacency,
    h0: &DenseMatrix,
    max_steps: usize,
    tol: f64,
) -> Result<(DenseMatrix, usize), PropagateError> {
    simplified_limit_observed(lambda, adj, h0, max_steps, tol, |_, _| {})
}

/// As [`simplified_limit`], calling `observe(step, &H)` on `H⁰` (step 0) and
/// every later iterate.
pub fn simplified_limit_observed(
    lambda: &ResidualStrengths,
    adj: &NormalizedAdjacency,
    h0: &DenseMatrix,
    max_steps: usize,
    tol: f64,
    mut observe: impl FnMut(usize, &DenseMatrix),
) -> Result<(DenseMatrix, usize), PropagateError> {
    check_nodes("simplified_limit", adj, Some(lambda), h0, h0)?;
    for (node, &value) in lambda.values().iter().enumerate() {
        if value.abs() >= 1.0 || !value.is_finite() {
            return Err(PropagateError::NonContractive { node, value });
        }
    }
    observe(0, h0);
    let mut h = h0.clone();
    for step in 1..=max_steps {
        let next = simplified_step(lambda, adj, &h, h0)?;
        observe(step, &next);
        let change = next.sub(&h)?.frobenius_norm();
        let scale = h.frobenius_norm();
        h = next;
        if change <= tol * scale {
            return Ok((h, step));
        }
    }
    Err(PropagateError::ConvergenceFailure { steps: max_steps })
}

/// `σ(Λ A H W + (I − Λ) H⁰ Θ)`, or `σ((A H) W)` for [`Propagation::ExactGcn`].
pub fn airc_layer_forward(
    prop: Propagation<'_>,
    adj: &NormalizedAdjacency,
    h_l: &DenseMatrix,
    h0: &DenseMatrix,
    params: &LayerParams,
    activation: Activation,
) -> Result<DenseMatrix, PropagateError> {
    let activation = activation.validate()?;
    let w = &params.w.value;
    if h_l.cols() != w.rows() {
        return Err(PropagateError::DimensionMismatch {
            op: "airc_layer_forward",
            expected: (h_l.rows(), w.rows()),
            found: h_l.shape(),
        });
    }
    let pre = match prop {
        Propagation::ExactGcn => {
            check_nodes("airc_layer_forward", adj, None, h_l, h0)?;
            adj.apply(h_l).matmul(w)?
        }
        Propagation::Adaptive(lambda) => {
            check_nodes("airc_layer_forward", adj, Some(lambda), h_l, h0)?;
            let theta = &params.theta.value;
            if h0.cols() != theta.rows() || theta.cols() != w.cols() {
                return Err(PropagateError::DimensionMismatch {
                    op: "airc_layer_forward",
                    expected: (h0.cols(), w.cols()),
                    found: theta.shape(),
                });
            }
            let mut agg = adj.apply(h_l).matmul(w)?.scale_rows(lambda.values())?;
            let res = h0.matmul(theta)?.scale_rows(&lambda.complement())?;
            agg.axpy(1.0, &res)?;
            agg
        }
    };
    Ok(pre.map(|v| activation.apply(v)))
}

/// Vanilla GCN layer `σ(A H W)`.
pub fn gcn_layer_forward(
    adj: &NormalizedAdjacency,
    h: &DenseMatrix,
    w: &DenseMatrix,
    activation: Activation,
) -> Result<DenseMatrix, PropagateError> {
    let params = LayerParams::new(w.clone(), DenseMatrix::zeros(0, 0));
    airc_layer_forward(Propagation::ExactGcn, adj, h, h, &params, activation)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightInit {
    Identity,
    /// Independent random orthogonal `W` and `Θ` per layer, gain 1.
    Orthogonal {
        seed: u64,
    },
}

#[derive(Clone, Debug)]
pub enum DepthModel {
    Gcn,
    Adaptive(ResidualStrengths),
}

#[derive(Clone, Debug)]
pub struct DepthSpec {
    pub model: DepthModel,
    pub activation: Activation,
    pub weights: WeightInit,
    pub depth: usize,
    pub snapshot: bool,
    pub rank_tol: f64,
}

impl DepthSpec {
    pub fn new(model: DepthModel, depth: usize) -> Self {
        Self {
            model,
            activation: Activation::LeakyRelu(0.2),
            weights: WeightInit::Identity,
            depth,
            snapshot: false,
            rank_tol: linalg::DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthTrace {
    /// `H⁰ … H^L` when snapshots were requested.
    pub embeddings: Option<Vec<DenseMatrix>>,
    pub energy_report: EnergyReport,
    /// `tr(Xᵀ(I − A)Y)` per layer with `X = ΛAHW`, `Y = (I − Λ)H⁰Θ`. Empty
    /// for GCN runs.
    pub alignments: Vec<f64>,
}

impl DepthTrace {
    pub fn alignments_nonnegative(&self) -> bool {
        self.alignments.iter().all(|&a| a >= 0.0)
    }

    pub fn final_energy(&self) -> f64 {
        *self
            .energy_report
            .per_layer_energy
            .last()
            .expect("trace has the input layer")
    }
}

/// Apply the chosen layer `depth` times with square weights, recording energy,
/// rank and effective rank of every layer. Adaptive runs with an activation
/// that admits an energy slope also carry the lower bound.
pub fn run_depth_experiment(
    spec: &DepthSpec,
    adj: &NormalizedAdjacency,
    h0: &DenseMatrix,
) -> Result<DepthTrace, PropagateError> {
    if spec.depth == 0 {
        return Err(PropagateError::ZeroDepth);
    }
    let activation = spec.activation.validate()?;
    let d = h0.cols();
    let mut rng = match spec.weights {
        WeightInit::Orthogonal { seed } => Some(rng::seeded(seed)),
        WeightInit::Identity => None,
    };
    let layers: Vec<LayerParams> = (0..spec.depth)
        .map(|_| match rng.as_mut() {
            Some(r) => {
                let w = DenseMatrix::random_orthogonal(d, d, r);
                let theta = DenseMatrix::random_orthogonal(d, d, r);
                LayerParams::new(w, theta)
            }
            None => LayerParams::identity(d),
        })
        .collect();

    let mut report = EnergyReport::default();
    report.push_layer(adj, h0, spec.rank_tol)?;
    let mut snaps = spec.snapshot.then(|| vec![h0.clone()]);
    let mut alignments = Vec::new();
    let mut h = h0.clone();
    for params in &layers {
        let prop = match &spec.model {
            DepthModel::Gcn => Propagation::ExactGcn,
            DepthModel::Adaptive(lambda) => {
                let x = adj.apply(&h).matmul(&params.w.value)?.scale_rows(lambda.values())?;
                let y = h0.matmul(&params.theta.value)?.scale_rows(&lambda.complement())?;
                alignments.push(energy::trace_alignment(adj, &x, &y)?);
                Propagation::Adaptive(lambda)
            }
        };
        h = airc_layer_forward(prop, adj, &h, h0, params, activation)?;
        report.push_layer(adj, &h, spec.rank_tol)?;
        if let Some(s) = snaps.as_mut() {
            s.push(h.clone());
        }
    }

    if let (DepthModel::Adaptive(lambda), Some(alpha)) = (&spec.model, activation.energy_slope()) {
        let sigma = energy::adjacency_sigma_r(adj, spec.rank_tol)?;
        let mut sigma_bar_w = f64::INFINITY;
        let mut sigma_bar_theta = f64::INFINITY;
        for p in &layers {
            sigma_bar_w = sigma_bar_w.min(linalg::smallest_nonzero_singular(&p.w.value, spec.rank_tol)?.powi(2));
            sigma_bar_theta =
                sigma_bar_theta.min(linalg::smallest_nonzero_singular(&p.theta.value, spec.rank_tol)?.powi(2));
        }
        let bound = energy::energy_lower_bound(
            alpha,
            lambda.lambda_min(),
            lambda.lambda_max(),
            sigma.value,
            sigma_bar_w,
            sigma_bar_theta,
            report.per_layer_energy[0],
        )?;
        report.bound = Some(bound);
        report.bound_approximate = sigma.approximate;
    }

    Ok(DepthTrace {
        embeddings: snaps,
        energy_report: report,
        alignments,
    })
}
