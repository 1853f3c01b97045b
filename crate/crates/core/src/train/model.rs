use std::borrow::Cow;
use std::fmt;

use crate::linalg::DenseMatrix;
use crate::propagate::{Activation, LayerParams, Param};
use crate::residual::{ResidualStrengths, LAMBDA_CLAMP_HI, LAMBDA_CLAMP_LO};
use crate::rng::{self, Rng};

use super::tape::{NodeId, Tape};
use super::TrainError;

/// How Λ is produced for a model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strategy {
    /// `clamp(logistic(H⁰ W_att))`, trained jointly.
    Learnable,
    PageRank {
        k: f64,
        lambda_max: f64,
        lambda_min: f64,
    },
    Static {
        beta: f64,
    },
    /// Residual branch removed.
    Gcn,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Learnable => "learnable",
            Strategy::PageRank { .. } => "pagerank",
            Strategy::Static { .. } => "static",
            Strategy::Gcn => "gcn",
        })
    }
}

/// Trainable tensors. Flat ids: layer `l` owns `2l` (W) and `2l + 1` (Θ),
/// then `W_att`, the head weight and the head bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
    pub w_att: Param,
    pub head_w: Param,
    pub head_b: Param,
}

fn glorot(fan_in: usize, fan_out: usize, rng: &mut Rng) -> DenseMatrix {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    DenseMatrix::from_fn(fan_in, fan_out, |_, _| rng::uniform(rng, -a, a))
}

impl ModelParams {
    /// Glorot-uniform weights, zero attention vector and zero bias.
    pub fn init(d0: usize, hidden: usize, num_layers: usize, classes: usize, rng: &mut Rng) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let d_in = if l == 0 { d0 } else { hidden };
                let w = glorot(d_in, hidden, rng);
                let theta = glorot(d0, hidden, rng);
                LayerParams::new(w, theta)
            })
            .collect();
        let head_w = glorot(hidden, classes, rng);
        Self {
            layers,
            w_att: Param::new(DenseMatrix::zeros(d0, 1)),
            head_w: Param::new(head_w),
            head_b: Param::new(DenseMatrix::zeros(1, classes)),
        }
    }

    pub fn num_tensors(&self) -> usize {
        2 * self.layers.len() + 3
    }

    pub fn w_att_id(&self) -> usize {
        2 * self.layers.len()
    }

    pub fn tensor(&self, id: usize) -> &Param {
        let l = self.layers.len();
        match id {
            _ if id < 2 * l && id.is_multiple_of(2) => &self.layers[id / 2].w,
            _ if id < 2 * l => &self.layers[id / 2].theta,
            _ if id == 2 * l => &self.w_att,
            _ if id == 2 * l + 1 => &self.head_w,
            _ if id == 2 * l + 2 => &self.head_b,
            _ => panic!("parameter id {id} out of range"),
        }
    }

    pub fn tensor_mut(&mut self, id: usize) -> &mut Param {
        let l = self.layers.len();
        match id {
            _ if id < 2 * l && id.is_multiple_of(2) => &mut self.layers[id / 2].w,
            _ if id < 2 * l => &mut self.layers[id / 2].theta,
            _ if id == 2 * l => &mut self.w_att,
            _ if id == 2 * l + 1 => &mut self.head_w,
            _ if id == 2 * l + 2 => &mut self.head_b,
            _ => panic!("parameter id {id} out of range"),
        }
    }

    /// Every tensor with its weight-decay flag (`W_att` is not decayed).
    pub fn tensors_mut(&mut self) -> Vec<(&mut Param, bool)> {
        let mut out = Vec::with_capacity(self.num_tensors());
        for layer in &mut self.layers {
            out.push((&mut layer.w, true));
            out.push((&mut layer.theta, true));
        }
        out.push((&mut self.w_att, false));
        out.push((&mut self.head_w, true));
        out.push((&mut self.head_b, true));
        out
    }

    /// Overwrite every gradient slot from `grads`; tensors absent from the
    /// tape get zero.
    pub fn set_grads(&mut self, grads: &super::Gradients) {
        for id in 0..self.num_tensors() {
            let p = self.tensor_mut(id);
            match grads.get(id) {
                Some(g) => p.grad = g.clone(),
                None => p.zero_grad(),
            }
        }
    }
}

/// Where Λ comes from in a forward pass.
#[derive(Clone, Copy, Debug)]
pub enum LambdaSource<'a> {
    Learnable,
    Fixed(&'a ResidualStrengths),
    /// Plain GCN layers.
    None,
}

/// Dropout rate and the generator that draws the masks.
pub struct Dropout<'r> {
    pub rate: f64,
    pub rng: &'r mut Rng,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub logits: NodeId,
    pub log_probs: NodeId,
    /// Outputs `H¹ … H^L` of the residual layers.
    pub layer_outputs: Vec<NodeId>,
    /// Per layer, the aggregation branch `ΛAHW` and residual branch
    /// `(I − Λ)H⁰Θ` before they are summed. Empty for GCN.
    pub branches: Vec<(NodeId, NodeId)>,
    pub lambda: Option<NodeId>,
}

fn dropout_node(tape: &mut Tape<'_>, x: NodeId, drop: &mut Option<Dropout<'_>>) -> Result<NodeId, TrainError> {
    let Some(d) = drop.as_mut() else { return Ok(x) };
    if d.rate <= 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - d.rate);
    let len = tape.value(x).data().len();
    let mask = (0..len)
        .map(|_| if rng::unit(d.rng) >= d.rate { keep } else { 0.0 })
        .collect();
    tape.dropout(x, mask)
}

/// Record `L` residual layers, the linear head and log-softmax on `tape`.
/// Passing `dropout = None` gives the evaluation-mode forward.
pub fn forward_model<'a>(
    tape: &mut Tape<'a>,
    params: &'a ModelParams,
    h0: &'a DenseMatrix,
    lambda: LambdaSource<'_>,
    activation: Activation,
    mut dropout: Option<Dropout<'_>>,
) -> Result<ForwardOutput, TrainError> {
    if params.layers.first().is_some_and(|l| l.w.value.rows() != h0.cols()) {
        return Err(TrainError::Shape("forward_model input width"));
    }
    let x = tape.input(Cow::Borrowed(h0));
    let (lam, comp) = match lambda {
        LambdaSource::Learnable => {
            let w_att = tape.param(2 * params.layers.len(), &params.w_att.value);
            let z = tape.matmul(x, w_att)?;
            let s = tape.logistic(z);
            let lam = tape.clamp(s, LAMBDA_CLAMP_LO, LAMBDA_CLAMP_HI);
            let comp = tape.affine(lam, -1.0, 1.0);
            (Some(lam), Some(comp))
        }
        LambdaSource::Fixed(l) => {
            if l.len() != h0.rows() {
                return Err(TrainError::Shape("forward_model lambda length"));
            }
            let lam = tape.input(Cow::Owned(DenseMatrix::column_vector(l.values())));
            let comp = tape.input(Cow::Owned(DenseMatrix::column_vector(&l.complement())));
            (Some(lam), Some(comp))
        }
        LambdaSource::None => (None, None),
    };

    let mut h = x;
    let mut layer_outputs = Vec::with_capacity(params.layers.len());
    let mut branches = Vec::new();
    for (l, layer) in params.layers.iter().enumerate() {
        let h_in = dropout_node(tape, h, &mut dropout)?;
        let w = tape.param(2 * l, &layer.w.value);
        let agg = tape.spmm(h_in)?;
        let agg = tape.matmul(agg, w)?;
        let pre = match (lam, comp) {
            (Some(lam), Some(comp)) => {
                let agg = tape.row_scale(agg, lam)?;
                let x_in = dropout_node(tape, x, &mut dropout)?;
                let theta = tape.param(2 * l + 1, &layer.theta.value);
                let res = tape.matmul(x_in, theta)?;
                let res = tape.row_scale(res, comp)?;
                branches.push((agg, res));
                tape.add(agg, res)?
            }
            _ => agg,
        };
        h = tape.activation(pre, activation);
        layer_outputs.push(h);
    }

    let l = params.layers.len();
    let hw = tape.param(2 * l + 1, &params.head_w.value);
    let hb = tape.param(2 * l + 2, &params.head_b.value);
    let logits = tape.matmul(h, hw)?;
    let logits = tape.add_row(logits, hb)?;
    let log_probs = tape.log_softmax(logits);
    Ok(ForwardOutput {
        logits,
        log_probs,
        layer_outputs,
        branches,
        lambda: lam,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gnp_random_graph, normalize, NormMode};

    #[test]
    fn zero_head_gives_uniform_log_probs() {
        let mut r = rng::seeded(1);
        let g = gnp_random_graph(6, 0.5, false, &mut r).unwrap();
        let adj = normalize(&g, NormMode::Augmented).unwrap();
        let x = DenseMatrix::random_normal(6, 3, &mut r);
        let mut params = ModelParams::init(3, 3, 1, 4, &mut r);
        params.head_w.value = DenseMatrix::zeros(3, 4);
        let mut tape = Tape::new(&adj);
        let out = forward_model(&mut tape, &params, &x, LambdaSource::Learnable, Activation::Relu, None).unwrap();
        let lp = tape.value(out.log_probs);
        for v in lp.data() {
            assert!((v + 4f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn log_softmax_rows_normalised_and_forward_deterministic() {
        let mut r = rng::seeded(2);
        let g = gnp_random_graph(10, 0.4, true, &mut r).unwrap();
        let adj = normalize(&g, NormMode::Augmented).unwrap();
        let x = DenseMatrix::random_normal(10, 4, &mut r);
        let params = ModelParams::init(4, 8, 3, 3, &mut r);
        let run = || {
            let mut tape = Tape::new(&adj);
            let out = forward_model(&mut tape, &params, &x, LambdaSource::Learnable, Activation::Relu, None).unwrap();
            tape.value(out.log_probs).clone()
        };
        let a = run();
        assert_eq!(a, run());
        for i in 0..10 {
            let lse: f64 = a.row(i).iter().map(|v| v.exp()).sum::<f64>().ln();
            assert!(lse.abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_ids_round_trip() {
        let mut r = rng::seeded(3);
        let mut p = ModelParams::init(5, 4, 2, 3, &mut r);
        assert_eq!(p.num_tensors(), 7);
        assert_eq!(p.tensor(0).value.shape(), (5, 4));
        assert_eq!(p.tensor(1).value.shape(), (5, 4));
        assert_eq!(p.tensor(2).value.shape(), (4, 4));
        assert_eq!(p.tensor(p.w_att_id()).value.shape(), (5, 1));
        assert_eq!(p.tensor(6).value.shape(), (1, 3));
        let flags: Vec<bool> = p.tensors_mut().into_iter().map(|(_, d)| d).collect();
        assert_eq!(flags, vec![true, true, true, true, false, true, true]);
    }
}
