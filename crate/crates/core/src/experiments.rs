//! Experiment drivers shared by the command-line tool and the acceptance
//! suite.

use std::time::Instant;

use thiserror::Error;

use crate::graph::{gnm_random_graph, gnp_random_graph, normalize, sbm_generate, GraphError, NormMode, SbmParams};
use crate::io::DatasetBundle;
use crate::linalg::{self, solve_residual_system, DenseMatrix, LinalgError, SolveOptions};
use crate::propagate::{
    airc_layer_forward, run_depth_experiment, simplified_limit_observed, Activation, DepthModel, DepthSpec, DepthTrace,
    LayerParams, PropagateError, Propagation, WeightInit,
};
use crate::residual::{self, ResidualError, ResidualStrengths};
use crate::rng;
use crate::train::{self, Strategy, TrainConfig, TrainError, TrainOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid experiment parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error(transparent)]
    Propagate(#[from] PropagateError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Clone, Debug)]
pub struct OversmoothingConfig {
    pub sbm: SbmParams,
    pub depth: usize,
    pub slope: f64,
    pub weight_seed: u64,
    pub k: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub norm_mode: NormMode,
    pub snapshot: bool,
}

impl Default for OversmoothingConfig {
    fn default() -> Self {
        Self {
            sbm: SbmParams::default(),
            depth: 16,
            slope: 0.2,
            weight_seed: 0,
            k: 0.1,
            lambda_max: 0.7,
            lambda_min: 0.3,
            norm_mode: NormMode::Augmented,
            snapshot: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OversmoothingResult {
    pub gcn: DepthTrace,
    pub airc_pagerank: DepthTrace,
    pub airc_learnable: DepthTrace,
    pub pagerank_lambda: ResidualStrengths,
    pub learnable_lambda: ResidualStrengths,
}

/// Energy-versus-depth on the synthetic block model for plain GCN and the
/// adaptive layer with PageRank and learnable-style Λ. All three runs share
/// the same orthogonal weights. The learnable Λ uses a Gaussian `W_att`
/// drawn from the weight seed, since no training happens here.
pub fn oversmoothing(cfg: &OversmoothingConfig) -> Result<OversmoothingResult, ExperimentError> {
    let (g, x, _) = sbm_generate(&cfg.sbm)?;
    let adj = normalize(&g, cfg.norm_mode)?;
    let scores = residual::pagerank(
        &g,
        residual::DEFAULT_DAMPING,
        residual::DEFAULT_PAGERANK_TOL,
        residual::DEFAULT_PAGERANK_MAX_ITER,
    )?;
    let pr_lambda = residual::pagerank_lambda(&scores, cfg.k, cfg.lambda_max, cfg.lambda_min)?;
    let mut att_rng = rng::seeded(rng::derive_seed(cfg.weight_seed, 7));
    let w_att: Vec<f64> = (0..x.cols()).map(|_| rng::standard_normal(&mut att_rng)).collect();
    let learned = residual::learnable_lambda(&x, &w_att)?;

    let spec = |model| DepthSpec {
        model,
        activation: Activation::LeakyRelu(cfg.slope),
        weights: WeightInit::Orthogonal { seed: cfg.weight_seed },
        depth: cfg.depth,
        snapshot: cfg.snapshot,
        rank_tol: linalg::DEFAULT_RANK_TOL,
    };
    Ok(OversmoothingResult {
        gcn: run_depth_experiment(&spec(DepthModel::Gcn), &adj, &x)?,
        airc_pagerank: run_depth_experiment(&spec(DepthModel::Adaptive(pr_lambda.clone())), &adj, &x)?,
        airc_learnable: run_depth_experiment(&spec(DepthModel::Adaptive(learned.clone())), &adj, &x)?,
        pagerank_lambda: pr_lambda,
        learnable_lambda: learned,
    })
}

#[derive(Clone, Debug)]
pub struct LimitCheckConfig {
    pub instances: usize,
    pub max_n: usize,
    pub max_d: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Stopping tolerance of the unrolled iteration.
    pub tol: f64,
    pub max_steps: usize,
    /// Agreement required between unrolled and solved limits.
    pub match_tol: f64,
    pub rank_tol: f64,
    pub seed: u64,
    /// Replace one λ of the first instance by 1 to exercise the error path.
    pub inject_unit_lambda: bool,
}

impl Default for LimitCheckConfig {
    fn default() -> Self {
        Self {
            instances: 50,
            max_n: 64,
            max_d: 8,
            lambda_lo: 0.05,
            lambda_hi: 0.95,
            tol: 1e-12,
            max_steps: 100_000,
            match_tol: 1e-8,
            rank_tol: 1e-9,
            seed: 0,
            inject_unit_lambda: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitInstance {
    pub index: usize,
    pub n: usize,
    pub d: usize,
    pub steps: usize,
    pub rel_error: f64,
    pub rank0: usize,
    /// Every recorded iterate kept the rank of `H⁰`.
    pub rank_preserved: bool,
    pub error: Option<String>,
}

impl LimitInstance {
    pub fn passed(&self, match_tol: f64) -> bool {
        self.error.is_none() && self.rank_preserved && self.rel_error <= match_tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitReport {
    pub instances: Vec<LimitInstance>,
    pub tol: f64,
    pub match_tol: f64,
    pub seconds: f64,
}

impl LimitReport {
    pub fn all_passed(&self) -> bool {
        self.instances.iter().all(|i| i.passed(self.match_tol))
    }
}

/// Random graphs, Λ and Gaussian `H⁰`: iterate the linear residual dynamics
/// to convergence, compare with the iterative solve of the fixed-point
/// system, and track the rank of every iterate.
pub fn limit_check(cfg: &LimitCheckConfig) -> Result<LimitReport, ExperimentError> {
    if cfg.instances == 0 || cfg.max_n < 2 || cfg.max_d == 0 {
        return Err(ExperimentError::InvalidParams(
            "need at least one instance, max_n >= 2 and max_d >= 1".into(),
        ));
    }
    if !(0.0 < cfg.lambda_lo && cfg.lambda_lo < cfg.lambda_hi && cfg.lambda_hi < 1.0) {
        return Err(ExperimentError::InvalidParams(
            "need 0 < lambda_lo < lambda_hi < 1".into(),
        ));
    }
    let start = Instant::now();
    let mut r = rng::seeded(cfg.seed);
    let mut out = Vec::with_capacity(cfg.instances);
    for index in 0..cfg.instances {
        let n = 2 + rng::index(&mut r, cfg.max_n - 1);
        let d = 1 + rng::index(&mut r, cfg.max_d);
        let p = rng::uniform(&mut r, 0.05, 0.6);
        let g = gnp_random_graph(n, p, true, &mut r)?;
        let adj = normalize(&g, NormMode::Augmented)?;
        let h0 = DenseMatrix::random_normal(n, d, &mut r);
        let mut values: Vec<f64> = (0..n)
            .map(|_| rng::uniform(&mut r, cfg.lambda_lo, cfg.lambda_hi))
            .collect();
        if cfg.inject_unit_lambda && index == 0 {
            values[0] = 1.0;
        }
        let lambda = ResidualStrengths::from_raw(values);
        let rank0 = linalg::numerical_rank(&h0, cfg.rank_tol)?;

        let mut rank_preserved = true;
        let mut rank_err = None;
        let limit =
            simplified_limit_observed(
                &lambda,
                &adj,
                &h0,
                cfg.max_steps,
                cfg.tol,
                |_, h| match linalg::numerical_rank(h, cfg.rank_tol) {
                    Ok(rk) => rank_preserved &= rk == rank0,
                    Err(e) => rank_err = Some(e.to_string()),
                },
            );
        let mut inst = LimitInstance {
            index,
            n,
            d,
            steps: 0,
            rel_error: f64::NAN,
            rank0,
            rank_preserved,
            error: rank_err,
        };
        match limit {
            Ok((y, steps)) => {
                inst.steps = steps;
                let opts = SolveOptions {
                    rel_tol: cfg.tol,
                    ..SolveOptions::default()
                };
                match solve_residual_system(&lambda, &adj, &h0, opts) {
                    Ok(z) => inst.rel_error = y.sub(&z)?.frobenius_norm() / z.frobenius_norm().max(f64::MIN_POSITIVE),
                    Err(e) => inst.error = Some(e.to_string()),
                }
            }
            Err(e) => inst.error = Some(e.to_string()),
        }
        out.push(inst);
    }
    Ok(LimitReport {
        instances: out,
        tol: cfg.tol,
        match_tol: cfg.match_tol,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub outcomes: Vec<TrainOutcome>,
    pub mean: f64,
    /// Population standard deviation of the test accuracies.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Train once per seed and summarise the test accuracies.
pub fn train_sweep(base: &TrainConfig, bundle: &DatasetBundle, seeds: &[u64]) -> Result<SweepResult, ExperimentError> {
    if seeds.is_empty() {
        return Err(ExperimentError::InvalidParams("at least one seed is required".into()));
    }
    let mut outcomes = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = TrainConfig { seed, ..base.clone() };
        outcomes.push(train::train(&cfg, bundle)?);
    }
    let accs: Vec<f64> = outcomes.iter().map(|o| o.metrics.test_acc).collect();
    let (mean, std) = mean_std(&accs);
    Ok(SweepResult { outcomes, mean, std })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthRow {
    pub variant: String,
    pub depth: usize,
    pub mean: f64,
    pub std: f64,
    pub accuracies: Vec<f64>,
}

/// Accuracy versus depth for each `(name, strategy)` variant.
pub fn depth_sweep(
    base: &TrainConfig,
    bundle: &DatasetBundle,
    depths: &[usize],
    variants: &[(String, Strategy)],
    seeds: &[u64],
) -> Result<Vec<DepthRow>, ExperimentError> {
    if depths.is_empty() || depths.contains(&0) {
        return Err(ExperimentError::InvalidParams(
            "depths must be non-empty and positive".into(),
        ));
    }
    let mut rows = Vec::new();
    for (name, strategy) in variants {
        for &depth in depths {
            let cfg = TrainConfig {
                num_layers: depth,
                strategy: *strategy,
                ..base.clone()
            };
            let sweep = train_sweep(&cfg, bundle, seeds)?;
            rows.push(DepthRow {
                variant: name.clone(),
                depth,
                mean: sweep.mean,
                std: sweep.std,
                accuracies: sweep.outcomes.iter().map(|o| o.metrics.test_acc).collect(),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchPoint {
    pub n: usize,
    pub edges: usize,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub point: BenchPoint,
    pub median_seconds: f64,
    pub samples: Vec<f64>,
}

/// Median wall-clock of one adaptive layer forward (`d → d`) per grid point.
pub fn bench(grid: &[BenchPoint], repeats: usize, seed: u64) -> Result<Vec<BenchRow>, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::InvalidParams("benchmark grid is empty".into()));
    }
    let repeats = repeats.max(1);
    let mut rows = Vec::with_capacity(grid.len());
    for (k, &point) in grid.iter().enumerate() {
        let mut r = rng::seeded(rng::derive_seed(seed, k as u64));
        let g = gnm_random_graph(point.n, point.edges, &mut r)?;
        let adj = normalize(&g, NormMode::Augmented)?;
        let h = DenseMatrix::random_normal(point.n, point.d, &mut r);
        let params = LayerParams::new(
            DenseMatrix::random_normal(point.d, point.d, &mut r),
            DenseMatrix::random_normal(point.d, point.d, &mut r),
        );
        let lambda = ResidualStrengths::from_raw((0..point.n).map(|_| rng::uniform(&mut r, 0.1, 0.9)).collect());
        let run = || airc_layer_forward(Propagation::Adaptive(&lambda), &adj, &h, &h, &params, Activation::Relu);
        run()?;
        let mut samples = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t = Instant::now();
            let out = run()?;
            samples.push(t.elapsed().as_secs_f64());
            std::hint::black_box(out);
        }
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        rows.push(BenchRow {
            point,
            median_seconds: median,
            samples,
        });
    }
    Ok(rows)
}
