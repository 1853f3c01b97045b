//! Full-batch node classification: differentiable model, Adam, and the
//! training loop with early stopping.

mod adam;
mod model;
mod tape;
mod trainer;

pub use adam::{adam_update, Adam, AdamConfig};
pub use model::{forward_model, Dropout, ForwardOutput, LambdaSource, ModelParams, Strategy};
pub use tape::{Gradients, NodeId, Tape};
pub use trainer::{
    accuracy, evaluate, resolve_lambda, stratified_split, train, EpochRecord, Metrics, TrainConfig, TrainOutcome,
};

use thiserror::Error;

use crate::energy::EnergyError;
use crate::graph::GraphError;
use crate::linalg::LinalgError;
use crate::residual::ResidualError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("shape mismatch in {0}")]
    Shape(&'static str),
    #[error("evaluation mask selects no nodes")]
    EmptyMask,
    #[error("tape already differentiated; run a new forward pass")]
    TapeConsumed,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}
