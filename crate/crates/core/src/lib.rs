//! Adaptive initial-residual graph convolution: sparse propagation with
//! per-node residual strengths, Dirichlet-energy diagnostics and a small
//! full-batch training stack.

pub mod energy;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod propagate;
pub mod residual;
pub mod rng;
pub mod train;

pub use linalg::DenseMatrix;

pub type FeatureMatrix = DenseMatrix;
