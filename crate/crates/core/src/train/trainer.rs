use std::time::Instant;

use rand::seq::SliceRandom;

use crate::energy;
use crate::graph::{normalize, Graph, NormMode, NormalizedAdjacency};
use crate::io::{DatasetBundle, Masks};
use crate::linalg::DenseMatrix;
use crate::propagate::Activation;
use crate::residual::{self, ResidualStrengths};
use crate::rng;

use super::adam::{Adam, AdamConfig};
use super::model::{forward_model, Dropout, LambdaSource, ModelParams, Strategy};
use super::tape::Tape;
use super::TrainError;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub dropout: f64,
    pub activation: Activation,
    pub strategy: Strategy,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub norm_mode: NormMode,
    /// Trace alignments are logged every `log_every` epochs.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            weight_decay: 1e-4,
            hidden_dim: 64,
            num_layers: 4,
            dropout: 0.4,
            activation: Activation::Relu,
            strategy: Strategy::Learnable,
            epochs: 1000,
            patience: 100,
            seed: 0,
            norm_mode: NormMode::Augmented,
            log_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr = {} must be positive", self.lr));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight_decay = {} must be non-negative", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout = {} must lie in [0, 1)", self.dropout));
        }
        if self.num_layers == 0 || self.hidden_dim == 0 {
            return bad("num_layers and hidden_dim must be at least 1".into());
        }
        if let Activation::LeakyRelu(a) = self.activation {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("leaky-ReLU slope {a} must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    /// Training loss of the step taken in this epoch.
    pub loss: f64,
    pub energy_last_layer: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub seed: u64,
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
    /// `(epoch, per-layer trace alignment)` for the logged epochs.
    pub alignment_log: Vec<(usize, Vec<f64>)>,
    /// Spearman correlation of learned λ with PageRank (learnable strategy).
    pub lambda_pagerank_spearman: Option<f64>,
}

impl Metrics {
    pub fn alignments_nonnegative(&self) -> bool {
        self.alignment_log.iter().all(|(_, a)| a.iter().all(|&v| v >= 0.0))
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub metrics: Metrics,
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
    /// Λ used by (or learned by) the restored model.
    pub lambda: Option<ResidualStrengths>,
}

/// Fraction of `idx` whose row argmax equals the label; ties go to the
/// lowest class index.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize], idx: &[usize]) -> Result<f64, TrainError> {
    if idx.is_empty() {
        return Err(TrainError::EmptyMask);
    }
    let mut hits = 0usize;
    for &i in idx {
        let row = logits.row(i);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        if best == labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / idx.len() as f64)
}

/// Per class, a seeded shuffle split 60/20/20 (rounded, test takes the rest).
pub fn stratified_split(labels: &[usize], num_classes: usize, seed: u64) -> Masks {
    let n = labels.len();
    let mut masks = Masks {
        train: vec![false; n],
        val: vec![false; n],
        test: vec![false; n],
    };
    let mut r = rng::seeded(seed);
    for c in 0..num_classes {
        let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut r);
        let n_train = (0.6 * idx.len() as f64).round() as usize;
        let n_val = (0.2 * idx.len() as f64).round() as usize;
        for (k, &i) in idx.iter().enumerate() {
            if k < n_train {
                masks.train[i] = true;
            } else if k < n_train + n_val {
                masks.val[i] = true;
            } else {
                masks.test[i] = true;
            }
        }
    }
    masks
}

/// Fixed Λ for the PageRank and static strategies; `None` otherwise.
pub fn resolve_lambda(strategy: Strategy, graph: &Graph) -> Result<Option<ResidualStrengths>, TrainError> {
    Ok(match strategy {
        Strategy::PageRank {
            k,
            lambda_max,
            lambda_min,
        } => {
            let scores = residual::pagerank(
                graph,
                residual::DEFAULT_DAMPING,
                residual::DEFAULT_PAGERANK_TOL,
                residual::DEFAULT_PAGERANK_MAX_ITER,
            )?;
            Some(residual::pagerank_lambda(&scores, k, lambda_max, lambda_min)?)
        }
        Strategy::Static { beta } => Some(residual::static_lambda(beta, graph.n())?),
        Strategy::Learnable | Strategy::Gcn => None,
    })
}

fn lambda_source<'a>(strategy: Strategy, fixed: Option<&'a ResidualStrengths>) -> LambdaSource<'a> {
    match (strategy, fixed) {
        (Strategy::Gcn, _) => LambdaSource::None,
        (Strategy::Learnable, _) => LambdaSource::Learnable,
        (_, Some(l)) => LambdaSource::Fixed(l),
        (_, None) => LambdaSource::None,
    }
}

/// Evaluation-mode accuracy on `idx`.
pub fn evaluate(
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    h0: &DenseMatrix,
    lambda: LambdaSource<'_>,
    activation: Activation,
    labels: &[usize],
    idx: &[usize],
) -> Result<f64, TrainError> {
    let mut tape = Tape::new(adj);
    let out = forward_model(&mut tape, params, h0, lambda, activation, None)?;
    accuracy(tape.value(out.logits), labels, idx)
}

struct EvalSnapshot {
    train: f64,
    val: f64,
    test: f64,
    energy_last: f64,
    alignments: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn eval_snapshot(
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    h0: &DenseMatrix,
    lambda: LambdaSource<'_>,
    activation: Activation,
    labels: &[usize],
    split: &(Vec<usize>, Vec<usize>, Vec<usize>),
    with_alignment: bool,
) -> Result<EvalSnapshot, TrainError> {
    let mut tape = Tape::new(adj);
    let out = forward_model(&mut tape, params, h0, lambda, activation, None)?;
    let logits = tape.value(out.logits);
    let last = *out.layer_outputs.last().expect("at least one layer");
    let mut alignments = Vec::new();
    if with_alignment {
        for &(x, y) in &out.branches {
            alignments.push(energy::trace_alignment(adj, tape.value(x), tape.value(y))?);
        }
    }
    Ok(EvalSnapshot {
        train: accuracy(logits, labels, &split.0)?,
        val: accuracy(logits, labels, &split.1)?,
        test: accuracy(logits, labels, &split.2)?,
        energy_last: energy::dirichlet_energy(adj, tape.value(last))?,
        alignments,
    })
}

/// Full-batch training with early stopping on validation accuracy. The
/// split, initialisation and dropout masks are drawn from independent
/// streams derived from `config.seed`.
pub fn train(config: &TrainConfig, bundle: &DatasetBundle) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let adj = normalize(&bundle.graph, config.norm_mode)?;
    let h0 = &bundle.features;
    let labels = &bundle.labels;
    let classes = bundle.num_classes.max(1);
    let masks = match &bundle.masks {
        Some(m) => m.clone(),
        None => stratified_split(labels, classes, rng::derive_seed(config.seed, 1)),
    };
    let split = (masks.train_idx(), masks.val_idx(), masks.test_idx());
    let targets: Vec<(usize, usize)> = split.0.iter().map(|&i| (i, labels[i])).collect();

    let mut init_rng = rng::seeded(rng::derive_seed(config.seed, 2));
    let mut drop_rng = rng::seeded(rng::derive_seed(config.seed, 3));
    let mut params = ModelParams::init(h0.cols(), config.hidden_dim, config.num_layers, classes, &mut init_rng);
    let fixed = resolve_lambda(config.strategy, &bundle.graph)?;
    let source = lambda_source(config.strategy, fixed.as_ref());
    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..AdamConfig::default()
    });

    let log_every = config.log_every.max(1);
    let mut metrics = Metrics {
        seed: config.seed,
        ..Metrics::default()
    };
    let first = eval_snapshot(&params, &adj, h0, source, config.activation, labels, &split, true)?;
    metrics.alignment_log.push((0, first.alignments));
    let mut best_val = first.val;
    let mut best_test = first.test;
    let mut best_epoch = 0;
    let mut best_params = params.clone();
    let mut since_best = 0usize;

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let (loss, grads) = {
            let mut tape = Tape::new(&adj);
            let drop = (config.dropout > 0.0).then_some(Dropout {
                rate: config.dropout,
                rng: &mut drop_rng,
            });
            let out = forward_model(&mut tape, &params, h0, source, config.activation, drop)?;
            let loss_node = tape.masked_nll(out.log_probs, targets.clone())?;
            let loss = tape.value(loss_node)[(0, 0)];
            (loss, tape.backward(loss_node, &DenseMatrix::filled(1, 1, 1.0))?)
        };
        params.set_grads(&grads);
        adam.step(params.tensors_mut());

        let log_now = epoch % log_every == 0;
        let snap = eval_snapshot(&params, &adj, h0, source, config.activation, labels, &split, log_now)?;
        if log_now {
            metrics.alignment_log.push((epoch, snap.alignments));
        }
        metrics.records.push(EpochRecord {
            epoch,
            train_acc: snap.train,
            val_acc: snap.val,
            test_acc: snap.test,
            loss,
            energy_last_layer: snap.energy_last,
            seconds: start.elapsed().as_secs_f64(),
        });
        if snap.val > best_val {
            best_val = snap.val;
            best_test = snap.test;
            best_epoch = epoch;
            best_params = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    metrics.best_epoch = best_epoch;
    metrics.best_val_acc = best_val;
    metrics.test_acc = best_test;
    let lambda = match config.strategy {
        Strategy::Learnable => {
            let learned = residual::learnable_lambda(h0, best_params.w_att.value.data())?;
            let pr = residual::pagerank(
                &bundle.graph,
                residual::DEFAULT_DAMPING,
                residual::DEFAULT_PAGERANK_TOL,
                residual::DEFAULT_PAGERANK_MAX_ITER,
            )?;
            metrics.lambda_pagerank_spearman = residual::spearman(learned.values(), &pr.scores);
            Some(learned)
        }
        _ => fixed,
    };
    Ok(TrainOutcome {
        metrics,
        params: best_params,
        lambda,
    })
}
