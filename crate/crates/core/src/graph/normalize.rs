use rayon::prelude::*;

use super::{Graph, GraphError};
use crate::linalg::DenseMatrix;

/// Sparse products with at least this many multiply-adds run row-parallel.
const PAR_THRESHOLD: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormMode {
    /// `D^{-1/2} A D^{-1/2}`
    Plain,
    /// `(D+I)^{-1/2} (A+I) (D+I)^{-1/2}`
    Augmented,
}

impl NormMode {
    /// Degree used in the normalisation for a node of weighted degree `d`.
    #[inline]
    pub fn effective_degree(self, d: f64) -> f64 {
        match self {
            NormMode::Plain => d,
            NormMode::Augmented => 1.0 + d,
        }
    }
}

/// Symmetrically normalised adjacency operator in CSR form. In augmented
/// mode the unit self-loops appear as explicit diagonal entries.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    mode: NormMode,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

pub fn normalize(g: &Graph, mode: NormMode) -> Result<NormalizedAdjacency, GraphError> {
    let n = g.n();
    let deg: Vec<f64> = g.degrees().iter().map(|&d| mode.effective_degree(d)).collect();
    if mode == NormMode::Plain {
        if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
            return Err(GraphError::IsolatedNodeInPlainMode(i));
        }
    }

    let extra = if mode == NormMode::Augmented { n } else { 0 };
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(g.num_directed_entries() + extra);
    let mut values = Vec::with_capacity(g.num_directed_entries() + extra);
    row_ptr.push(0);
    for i in 0..n {
        let mut diag_pending = mode == NormMode::Augmented;
        for (j, w) in g.neighbors(i) {
            if diag_pending && j > i {
                col_idx.push(i);
                values.push(1.0 / deg[i]);
                diag_pending = false;
            }
            col_idx.push(j);
            values.push(w / (deg[i] * deg[j]).sqrt());
        }
        if diag_pending {
            col_idx.push(i);
            values.push(1.0 / deg[i]);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(NormalizedAdjacency {
        n,
        mode,
        row_ptr,
        col_idx,
        values,
    })
}

impl NormalizedAdjacency {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> NormMode {
        self.mode
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `self · x`; panics if `x` does not have `n` rows. See [`spmm`] for the
    /// checked form.
    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.rows(), self.n, "operand must have one row per node");
        let d = x.cols();
        let mut out = DenseMatrix::zeros(self.n, d);
        if d == 0 {
            return out;
        }
        let xd = x.data();
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.values[k];
                let src = &xd[self.col_idx[k] * d..(self.col_idx[k] + 1) * d];
                for (o, s) in out_row.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        };
        if self.nnz() * d >= PAR_THRESHOLD {
            out.data_mut().par_chunks_mut(d).enumerate().for_each(kernel);
        } else {
            out.data_mut().chunks_mut(d).enumerate().for_each(kernel);
        }
        out
    }
}

/// Exact CSR sparse–dense product `A·x`. Every output entry accumulates its
/// terms in ascending column order, so results are bit-stable.
pub fn spmm(adj: &NormalizedAdjacency, x: &DenseMatrix) -> Result<DenseMatrix, GraphError> {
    if x.rows() != adj.n() {
        return Err(GraphError::DimensionMismatch {
            op: "spmm",
            expected: adj.n(),
            found: x.rows(),
        });
    }
    Ok(adj.apply(x))
}
