use super::{build_graph, Graph, GraphError};
use crate::linalg::DenseMatrix;
use crate::rng;

/// Two-block stochastic block model with Gaussian node features.
///
/// Nodes `0..n/2` form class 0 and the rest class 1. Class `c` features are
/// drawn i.i.d. from `N(mu_c, std²)` in every dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SbmParams {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub std: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SbmParams {
    /// 200 nodes, `p = 0.2`, `q = 0.05`, means ±0.5, std 2, two features.
    fn default() -> Self {
        Self {
            n: 200,
            p: 0.2,
            q: 0.05,
            mu1: -0.5,
            mu2: 0.5,
            std: 2.0,
            dim: 2,
            seed: 0,
        }
    }
}

impl SbmParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |msg: String| Err(GraphError::InvalidSbmParams(msg));
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return bad(format!("n = {} must be positive and even", self.n));
        }
        if !(0.0 <= self.q && self.q <= self.p && self.p <= 1.0) {
            return bad(format!("need 0 <= q <= p <= 1, got p = {}, q = {}", self.p, self.q));
        }
        if !(self.std > 0.0 && self.std.is_finite()) {
            return bad(format!("std = {} must be positive", self.std));
        }
        if !(self.mu1.is_finite() && self.mu2.is_finite()) {
            return bad("class means must be finite".into());
        }
        Ok(())
    }
}

/// Sample a graph, features and labels. Edge draws come first (pairs in
/// lexicographic order), then features row by row; the output is a pure
/// function of `params`. Isolated nodes are kept.
pub fn sbm_generate(params: &SbmParams) -> Result<(Graph, DenseMatrix, Vec<usize>), GraphError> {
    params.validate()?;
    let n = params.n;
    let half = n / 2;
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= half)).collect();
    let mut rng = rng::seeded(params.seed);

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let prob = if labels[i] == labels[j] { params.p } else { params.q };
            if rng::unit(&mut rng) < prob {
                edges.push((i, j, 1.0));
            }
        }
    }
    let graph = build_graph(&edges, n)?;

    let features = DenseMatrix::from_fn(n, params.dim, |i, _| {
        let mean = if labels[i] == 0 { params.mu1 } else { params.mu2 };
        rng::normal(&mut rng, mean, params.std)
    });
    Ok((graph, features, labels))
}
