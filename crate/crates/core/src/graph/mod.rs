//! Undirected weighted graphs in CSR form, their symmetric normalisation and
//! the sparse–dense product used by every propagation step.

mod normalize;
mod random;
mod sbm;

pub use normalize::{normalize, spmm, NormMode, NormalizedAdjacency};
pub use random::{gnm_random_graph, gnp_random_graph};
pub use sbm::{sbm_generate, SbmParams};

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge ({i}, {j}) references a node outside 0..{n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("self-loop at node {0} (self-loops are added during normalisation, not stored)")]
    SelfLoopRejected(usize),
    #[error("edge ({i}, {j}) listed with conflicting weights {first} and {second}")]
    DuplicateEdgeConflict {
        i: usize,
        j: usize,
        first: f64,
        second: f64,
    },
    #[error("edge ({i}, {j}) has weight {weight}; weights must be finite and positive")]
    InvalidWeight { i: usize, j: usize, weight: f64 },
    #[error("node {0} has degree zero; plain normalisation is undefined")]
    IsolatedNodeInPlainMode(usize),
    #[error("{op}: expected {expected} rows, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("graph has no edges")]
    EmptyEdgeSet,
    #[error("invalid stochastic block model parameters: {0}")]
    InvalidSbmParams(String),
}

/// Immutable undirected weighted graph.
///
/// Both directions of every edge are stored, rows have strictly increasing
/// column indices, and self-loops are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
}

/// Build a [`Graph`] from an edge list.
///
/// Each undirected edge may appear once or in both directions; repeats must
/// carry the same weight.
pub fn build_graph(edges: &[(usize, usize, f64)], n: usize) -> Result<Graph, GraphError> {
    let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(i, j, w) in edges {
        if i >= n || j >= n {
            return Err(GraphError::IndexOutOfRange { i, j, n });
        }
        if i == j {
            return Err(GraphError::SelfLoopRejected(i));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(GraphError::InvalidWeight { i, j, weight: w });
        }
        for key in [(i, j), (j, i)] {
            match map.get(&key) {
                Some(&prev) if prev != w => {
                    return Err(GraphError::DuplicateEdgeConflict {
                        i,
                        j,
                        first: prev,
                        second: w,
                    })
                }
                Some(_) => {}
                None => {
                    map.insert(key, w);
                }
            }
        }
    }

    let mut row_ptr = vec![0usize; n + 1];
    let mut col_idx = Vec::with_capacity(map.len());
    let mut weights = Vec::with_capacity(map.len());
    for (&(i, j), &w) in &map {
        row_ptr[i + 1] += 1;
        col_idx.push(j);
        weights.push(w);
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    let degrees = (0..n)
        .map(|i| weights[row_ptr[i]..row_ptr[i + 1]].iter().sum())
        .collect();
    Ok(Graph {
        n,
        row_ptr,
        col_idx,
        weights,
        degrees,
    })
}

impl Graph {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored (directed) entries: twice the undirected edge count.
    pub fn num_directed_entries(&self) -> usize {
        self.col_idx.len()
    }

    pub fn num_edges(&self) -> usize {
        self.col_idx.len() / 2
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(neighbour, weight)` pairs of node `i` in ascending neighbour order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    /// Each undirected edge once, as `(i, j, w)` with `i < j`.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.row_ptr[i] == self.row_ptr[i + 1])
            .collect()
    }
}

/// Edge homophily: fraction of undirected edges whose endpoints share a label.
pub fn homophily_ratio(g: &Graph, labels: &[usize]) -> Result<f64, GraphError> {
    if labels.len() != g.n() {
        return Err(GraphError::DimensionMismatch {
            op: "homophily_ratio",
            expected: g.n(),
            found: labels.len(),
        });
    }
    let mut same = 0usize;
    let mut total = 0usize;
    for (i, j, _) in g.undirected_edges() {
        total += 1;
        if labels[i] == labels[j] {
            same += 1;
        }
    }
    if total == 0 {
        return Err(GraphError::EmptyEdgeSet);
    }
    Ok(same as f64 / total as f64)
}
