//! Reverse-mode differentiation over a fixed set of matrix primitives.
//!
//! Every recorded node keeps its forward value; backward walks the node list
//! in reverse and pushes adjoints to inputs. Parameter leaves carry an id so
//! gradients can be routed back to the owning tensor.

use std::borrow::Cow;

use crate::graph::NormalizedAdjacency;
use crate::linalg::DenseMatrix;
use crate::propagate::Activation;

use super::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(usize),
    Spmm(NodeId),
    MatMul(NodeId, NodeId),
    /// `x` with row `i` multiplied by `s[i]`; `s` is an `n × 1` node.
    RowScale(NodeId, NodeId),
    /// `a·x + b` elementwise.
    Affine(NodeId, f64),
    Add(NodeId, NodeId),
    /// `x + 1·bᵀ` with `b` a `1 × c` node.
    AddRow(NodeId, NodeId),
    Act(NodeId, Activation),
    Logistic(NodeId),
    Clamp(NodeId, f64, f64),
    /// Elementwise multiply by a fixed mask (0 or `1/(1 − p)`).
    Dropout(NodeId, Vec<f64>),
    LogSoftmax(NodeId),
    /// Mean negative log-likelihood over `rows`; a `1 × 1` node.
    MaskedNll(NodeId, Vec<(usize, usize)>),
}

struct Node<'a> {
    value: Cow<'a, DenseMatrix>,
    op: Op,
}

/// Per-parameter gradients produced by [`Tape::backward`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    pub by_param: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    pub fn get(&self, id: usize) -> Option<&DenseMatrix> {
        self.by_param.get(id).and_then(|g| g.as_ref())
    }
}

pub struct Tape<'a> {
    adj: &'a NormalizedAdjacency,
    nodes: Vec<Node<'a>>,
    consumed: bool,
}

impl<'a> Tape<'a> {
    pub fn new(adj: &'a NormalizedAdjacency) -> Self {
        Self {
            adj,
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Cow<'a, DenseMatrix>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn owned(&mut self, value: DenseMatrix, op: Op) -> NodeId {
        self.push(Cow::Owned(value), op)
    }

    pub fn input(&mut self, value: Cow<'a, DenseMatrix>) -> NodeId {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: usize, value: &'a DenseMatrix) -> NodeId {
        self.push(Cow::Borrowed(value), Op::Param(id))
    }

    pub fn spmm(&mut self, x: NodeId) -> Result<NodeId, TrainError> {
        let v = self.value(x);
        if v.rows() != self.adj.n() {
            return Err(TrainError::Shape("spmm"));
        }
        let out = self.adj.apply(v);
        Ok(self.owned(out, Op::Spmm(x)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TrainError> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.owned(out, Op::MatMul(a, b)))
    }

    pub fn row_scale(&mut self, x: NodeId, s: NodeId) -> Result<NodeId, TrainError> {
        let sv = self.value(s);
        if sv.cols() != 1 {
            return Err(TrainError::Shape("row_scale"));
        }
        let out = self.value(x).scale_rows(sv.data())?;
        Ok(self.owned(out, Op::RowScale(x, s)))
    }

    pub fn affine(&mut self, x: NodeId, a: f64, b: f64) -> NodeId {
        let out = self.value(x).map(|v| a * v + b);
        self.owned(out, Op::Affine(x, a))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TrainError> {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.owned(out, Op::Add(a, b)))
    }

    pub fn add_row(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId, TrainError> {
        let b = self.value(bias);
        let xv = self.value(x);
        if b.rows() != 1 || b.cols() != xv.cols() {
            return Err(TrainError::Shape("add_row"));
        }
        let mut out = xv.clone();
        let c = out.cols();
        if c > 0 {
            for row in out.data_mut().chunks_mut(c) {
                for (o, bb) in row.iter_mut().zip(b.data()) {
                    *o += bb;
                }
            }
        }
        Ok(self.owned(out, Op::AddRow(x, bias)))
    }

    pub fn activation(&mut self, x: NodeId, act: Activation) -> NodeId {
        let out = self.value(x).map(|v| act.apply(v));
        self.owned(out, Op::Act(x, act))
    }

    pub fn logistic(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(crate::residual::logistic);
        self.owned(out, Op::Logistic(x))
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let out = self.value(x).map(|v| v.clamp(lo, hi));
        self.owned(out, Op::Clamp(x, lo, hi))
    }

    /// Multiply by `mask`, which must already include the `1/(1 − p)` rescale.
    pub fn dropout(&mut self, x: NodeId, mask: Vec<f64>) -> Result<NodeId, TrainError> {
        let xv = self.value(x);
        if mask.len() != xv.data().len() {
            return Err(TrainError::Shape("dropout"));
        }
        let data: Vec<f64> = xv.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = DenseMatrix::from_vec(xv.rows(), xv.cols(), data)?;
        Ok(self.owned(out, Op::Dropout(x, mask)))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let c = xv.cols();
        let mut out = xv.clone();
        if c > 0 {
            for row in out.data_mut().chunks_mut(c) {
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                for v in row.iter_mut() {
                    *v -= lse;
                }
            }
        }
        self.owned(out, Op::LogSoftmax(x))
    }

    /// `−mean_{i ∈ rows} logp[i, label_i]` for `(row, label)` pairs.
    pub fn masked_nll(&mut self, logp: NodeId, targets: Vec<(usize, usize)>) -> Result<NodeId, TrainError> {
        if targets.is_empty() {
            return Err(TrainError::EmptyMask);
        }
        let lv = self.value(logp);
        let mut total = 0.0;
        for &(i, c) in &targets {
            if i >= lv.rows() || c >= lv.cols() {
                return Err(TrainError::Shape("masked_nll"));
            }
            total -= lv[(i, c)];
        }
        let out = DenseMatrix::filled(1, 1, total / targets.len() as f64);
        Ok(self.owned(out, Op::MaskedNll(logp, targets)))
    }

    /// Propagate `seed` (the adjoint of `output`) back through the tape. A
    /// tape can be differentiated once.
    pub fn backward(&mut self, output: NodeId, seed: &DenseMatrix) -> Result<Gradients, TrainError> {
        if self.consumed {
            return Err(TrainError::TapeConsumed);
        }
        if seed.shape() != self.value(output).shape() {
            return Err(TrainError::Shape("backward seed"));
        }
        self.consumed = true;

        let mut adj_of: Vec<Option<DenseMatrix>> = vec![None; output.0 + 1];
        adj_of[output.0] = Some(seed.clone());
        let mut grads = Gradients::default();

        fn acc(slot: &mut Option<DenseMatrix>, g: DenseMatrix) {
            match slot {
                Some(s) => s.axpy(1.0, &g).expect("adjoint shapes match forward values"),
                None => *slot = Some(g),
            }
        }

        for idx in (0..=output.0).rev() {
            let Some(g) = adj_of[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(pid) => {
                    if grads.by_param.len() <= *pid {
                        grads.by_param.resize(pid + 1, None);
                    }
                    acc(&mut grads.by_param[*pid], g);
                }
                Op::Spmm(x) => {
                    // the normalised operator is symmetric
                    acc(&mut adj_of[x.0], self.adj.apply(&g));
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b))?;
                    let gb = self.value(*a).t_matmul(&g)?;
                    acc(&mut adj_of[a.0], ga);
                    acc(&mut adj_of[b.0], gb);
                }
                Op::RowScale(x, s) => {
                    let sv = self.value(*s);
                    let xv = self.value(*x);
                    let gx = g.scale_rows(sv.data())?;
                    let c = g.cols();
                    let gs: Vec<f64> = (0..g.rows())
                        .map(|i| {
                            g.data()[i * c..(i + 1) * c]
                                .iter()
                                .zip(&xv.data()[i * c..(i + 1) * c])
                                .map(|(a, b)| a * b)
                                .sum()
                        })
                        .collect();
                    acc(&mut adj_of[x.0], gx);
                    acc(&mut adj_of[s.0], DenseMatrix::column_vector(&gs));
                }
                Op::Affine(x, a) => acc(&mut adj_of[x.0], g.scale(*a)),
                Op::Add(a, b) => {
                    acc(&mut adj_of[a.0], g.clone());
                    acc(&mut adj_of[b.0], g);
                }
                Op::AddRow(x, b) => {
                    let gb = DenseMatrix::from_vec(1, g.cols(), g.column_sums())?;
                    acc(&mut adj_of[b.0], gb);
                    acc(&mut adj_of[x.0], g);
                }
                Op::Act(x, act) => {
                    let xv = self.value(*x);
                    let data = g
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(gg, v)| gg * act.derivative(*v))
                        .collect();
                    acc(&mut adj_of[x.0], DenseMatrix::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::Logistic(x) => {
                    let data = g
                        .data()
                        .iter()
                        .zip(node.value.data())
                        .map(|(gg, y)| gg * y * (1.0 - y))
                        .collect();
                    acc(&mut adj_of[x.0], DenseMatrix::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::Clamp(x, lo, hi) => {
                    let xv = self.value(*x);
                    let data = g
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(gg, v)| if *v >= *lo && *v <= *hi { *gg } else { 0.0 })
                        .collect();
                    acc(&mut adj_of[x.0], DenseMatrix::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::Dropout(x, mask) => {
                    let data = g.data().iter().zip(mask).map(|(gg, m)| gg * m).collect();
                    acc(&mut adj_of[x.0], DenseMatrix::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::LogSoftmax(x) => {
                    let c = g.cols();
                    let mut gx = g.clone();
                    if c > 0 {
                        for (grow, yrow) in gx.data_mut().chunks_mut(c).zip(node.value.data().chunks(c)) {
                            let s: f64 = grow.iter().sum();
                            for (gg, y) in grow.iter_mut().zip(yrow) {
                                *gg -= y.exp() * s;
                            }
                        }
                    }
                    acc(&mut adj_of[x.0], gx);
                }
                Op::MaskedNll(lp, targets) => {
                    let shape = self.value(*lp).shape();
                    let mut gl = DenseMatrix::zeros(shape.0, shape.1);
                    let w = g[(0, 0)] / targets.len() as f64;
                    for &(i, c) in targets {
                        gl[(i, c)] -= w;
                    }
                    acc(&mut adj_of[lp.0], gl);
                }
            }
        }
        Ok(grads)
    }
}
