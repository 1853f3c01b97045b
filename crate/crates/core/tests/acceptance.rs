//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! Failures are reported but do not abort the process unless
//! `AIRC_ACCEPTANCE_STRICT=1` is set. Benchmark bundles are read from the
//! directory named by `AIRC_BUNDLES` (subdirectories `cora/`, `chameleon/`).

use std::path::PathBuf;
use std::time::Instant;

use airc::energy::{
    self, aggregation_bound_check, composite_energy_check, dirichlet_energy, energy_lower_bound,
    leaky_relu_energy_ratio, trace_alignment, weight_bound_check,
};
use airc::experiments::{
    bench, limit_check, oversmoothing, train_sweep, BenchPoint, LimitCheckConfig, OversmoothingConfig,
};
use airc::graph::{gnp_random_graph, normalize, sbm_generate, Graph, NormMode, NormalizedAdjacency, SbmParams};
use airc::io::{load_bundle, DatasetBundle};
use airc::linalg::{self, svd};
use airc::propagate::{
    airc_layer_forward, gcn_layer_forward, run_depth_experiment, Activation, DepthModel, DepthSpec, LayerParams,
    Propagation, WeightInit,
};
use airc::residual::{self, ResidualStrengths};
use airc::rng::{self, Rng};
use airc::train::{forward_model, train, Dropout, LambdaSource, ModelParams, Strategy, Tape, TrainConfig};
use airc::DenseMatrix;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict, String> {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

type Check = fn() -> Result<Verdict, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn pagerank_strategy() -> Strategy {
    Strategy::PageRank {
        k: 0.1,
        lambda_max: 0.7,
        lambda_min: 0.3,
    }
}

fn random_lambda(n: usize, r: &mut Rng) -> ResidualStrengths {
    ResidualStrengths::from_raw((0..n).map(|_| rng::uniform(r, 0.05, 0.95)).collect())
}

fn random_graph(r: &mut Rng, n_lo: usize, n_hi: usize) -> Result<(Graph, NormalizedAdjacency), String> {
    let n = n_lo + rng::index(r, n_hi - n_lo + 1);
    let p = rng::uniform(r, 0.1, 0.7);
    let weighted = rng::unit(r) < 0.5;
    let g = gnp_random_graph(n, p, weighted, r).map_err(err)?;
    let adj = normalize(&g, NormMode::Augmented).map_err(err)?;
    Ok((g, adj))
}

fn sbm_bundle() -> Result<DatasetBundle, String> {
    let (g, x, y) = sbm_generate(&SbmParams::default()).map_err(err)?;
    DatasetBundle::new("sbm", g, x, y, None).map_err(err)
}

fn limit_and_rank() -> Result<(Verdict, Verdict), String> {
    let report = limit_check(&LimitCheckConfig::default()).map_err(err)?;
    let worst = report
        .instances
        .iter()
        .map(|i| if i.error.is_some() { f64::INFINITY } else { i.rel_error })
        .fold(0.0, f64::max);
    let converged = report.instances.iter().all(|i| i.error.is_none());
    let ranks_kept = report.instances.iter().filter(|i| i.rank_preserved).count();
    let n = report.instances.len();
    let eq = Verdict {
        pass: n == 50 && converged && worst <= 1e-8 && report.seconds < 10.0,
        detail: format!(
            "{n} instances, max rel err {worst:.2e} (<= 1e-8), {:.2}s (< 10s)",
            report.seconds
        ),
    };
    let rank = Verdict {
        pass: converged && ranks_kept == n,
        detail: format!("{ranks_kept}/{n} instances kept rank(H0) at every iterate (rel_tol 1e-9)"),
    };
    Ok((eq, rank))
}

fn leaky_relu_suite() -> Result<Verdict, String> {
    let mut r = rng::seeded(3);
    let alphas = [0.01, 0.2, 0.5];
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for t in 0..10_000 {
        let (_, adj) = random_graph(&mut r, 2, 30)?;
        let shift = rng::normal(&mut r, 0.0, 1.0);
        let f: Vec<f64> = (0..adj.n()).map(|_| rng::standard_normal(&mut r) + shift).collect();
        let alpha = alphas[t % 3];
        let (before, after) = leaky_relu_energy_ratio(&adj, &f, alpha).map_err(err)?;
        let slack = after - alpha * alpha * before;
        worst = worst.min(slack);
        if slack < -1e-12 {
            violations += 1;
        }
    }
    verdict(
        violations == 0,
        format!("10000 triples, {violations} violations, min slack {worst:.3e}"),
    )
}

/// Orthonormal basis (as columns of `basis`) of the singular vectors whose
/// singular value exceeds `1e-9 · σ_max`.
fn leading_vectors(basis: &DenseMatrix, sv: &[f64]) -> Vec<Vec<f64>> {
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter()
        .enumerate()
        .filter(|(_, &s)| s > 1e-9 * smax)
        .map(|(j, _)| basis.column(j))
        .collect()
}

fn combine(vectors: &[Vec<f64>], r: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; vectors[0].len()];
    for v in vectors {
        let c = rng::standard_normal(r);
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}

fn projector(vectors: &[Vec<f64>]) -> DenseMatrix {
    let n = vectors[0].len();
    DenseMatrix::from_fn(n, n, |i, j| vectors.iter().map(|v| v[i] * v[j]).sum())
}

fn low_rank(m: usize, k: usize, r: &mut Rng) -> Result<DenseMatrix, String> {
    let rank = 1 + rng::index(r, m.min(k));
    let a = DenseMatrix::random_normal(m, rank, r);
    let b = DenseMatrix::random_normal(rank, k, r);
    a.matmul(&b).map_err(err)
}

fn bound_suites() -> Result<Verdict, String> {
    let mut r = rng::seeded(4);
    let mut worst = [f64::INFINITY; 3];
    let mut violations = [0usize; 3];
    for _ in 0..500 {
        let m = 1 + rng::index(&mut r, 8);
        let k = 1 + rng::index(&mut r, 8);
        let w = low_rank(m, k, &mut r)?;
        let dec = svd(&w).map_err(err)?;
        let f = combine(&leading_vectors(&dec.u, &dec.singular_values), &mut r);
        let c = weight_bound_check(&w, &f, 1e-9).map_err(err)?;
        worst[0] = worst[0].min(c.slack());
        violations[0] += (c.slack() < -1e-10) as usize;
    }
    for _ in 0..500 {
        let (_, adj) = random_graph(&mut r, 3, 30)?;
        let dense = adj.to_dense();
        let dec = svd(&dense).map_err(err)?;
        let sigma = linalg::smallest_nonzero_singular(&dense, 1e-9).map_err(err)?;
        let f = combine(&leading_vectors(&dec.v, &dec.singular_values), &mut r);
        let lambda = random_lambda(adj.n(), &mut r);
        let c = aggregation_bound_check(&adj, &lambda, &f, sigma).map_err(err)?;
        worst[1] = worst[1].min(c.slack());
        violations[1] += (c.slack() < -1e-10) as usize;
    }
    for _ in 0..500 {
        let (_, adj) = random_graph(&mut r, 3, 30)?;
        let dense = adj.to_dense();
        let dec = svd(&dense).map_err(err)?;
        let sigma = linalg::smallest_nonzero_singular(&dense, 1e-9).map_err(err)?;
        let p_adj = projector(&leading_vectors(&dec.v, &dec.singular_values));
        let d = 1 + rng::index(&mut r, 6);
        let d_out = 1 + rng::index(&mut r, 6);
        let w = low_rank(d, d_out, &mut r)?;
        let wd = svd(&w).map_err(err)?;
        let p_w = projector(&leading_vectors(&wd.u, &wd.singular_values));
        let z = DenseMatrix::random_normal(adj.n(), d, &mut r);
        let x = p_adj.matmul(&z).and_then(|m| m.matmul(&p_w)).map_err(err)?;
        let lambda = random_lambda(adj.n(), &mut r);
        let c = composite_energy_check(&adj, &lambda, &x, &w, sigma, 1e-9).map_err(err)?;
        worst[2] = worst[2].min(c.slack());
        violations[2] += (c.slack() < -1e-10) as usize;
    }
    let cex = weight_bound_check(&DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]), &[0.0, 1.0], 1e-9).map_err(err)?;
    let held = worst.iter().all(|&s| s >= -1e-10);
    verdict(
        held && !cex.holds,
        format!(
            "500 each, violations/min slack: weight {}/{:.3e}, aggregation {}/{:.3e}, composite {}/{:.3e}; \
             counterexample ||fW||={} < {} (violates: {})",
            violations[0], worst[0], violations[1], worst[1], violations[2], worst[2], cex.lhs, cex.rhs, !cex.holds
        ),
    )
}

fn oversmoothing_separation() -> Result<Verdict, String> {
    let cfg = OversmoothingConfig {
        depth: 64,
        ..OversmoothingConfig::default()
    };
    let res = oversmoothing(&cfg).map_err(err)?;
    let gcn = res.gcn.energy_report.energy_ratio().ok_or("gcn ratio undefined")?;
    let irc = res
        .airc_pagerank
        .energy_report
        .energy_ratio()
        .ok_or("irc ratio undefined")?;
    verdict(
        gcn <= 1e-3 && irc >= 1e-2,
        format!("depth 64: GCN ratio {gcn:.3e} (<= 1e-3), IRC PageRank ratio {irc:.3e} (>= 1e-2)"),
    )
}

/// Energy of the last layer, per-layer alignments and the bound for a
/// trained model evaluated without dropout.
fn trained_bound(
    outcome: &airc::train::TrainOutcome,
    bundle: &DatasetBundle,
    alpha: f64,
) -> Result<(f64, Vec<f64>, f64), String> {
    let adj = normalize(&bundle.graph, NormMode::Augmented).map_err(err)?;
    let lambda = outcome.lambda.as_ref().ok_or("trained model has no lambda")?;
    let mut tape = Tape::new(&adj);
    let out = forward_model(
        &mut tape,
        &outcome.params,
        &bundle.features,
        LambdaSource::Fixed(lambda),
        Activation::LeakyRelu(alpha),
        None,
    )
    .map_err(err)?;
    let last = tape.value(*out.layer_outputs.last().ok_or("no layers")?);
    let measured = dirichlet_energy(&adj, last).map_err(err)?;
    let mut alignments = Vec::new();
    for &(x, y) in &out.branches {
        alignments.push(trace_alignment(&adj, tape.value(x), tape.value(y)).map_err(err)?);
    }
    let sigma = energy::adjacency_sigma_r(&adj, 1e-9).map_err(err)?;
    let mut sbw = f64::INFINITY;
    let mut sbt = f64::INFINITY;
    for l in &outcome.params.layers {
        sbw = sbw.min(
            linalg::smallest_nonzero_singular(&l.w.value, 1e-9)
                .map_err(err)?
                .powi(2),
        );
        sbt = sbt.min(
            linalg::smallest_nonzero_singular(&l.theta.value, 1e-9)
                .map_err(err)?
                .powi(2),
        );
    }
    let e0 = dirichlet_energy(&adj, &bundle.features).map_err(err)?;
    let b = energy_lower_bound(
        alpha,
        lambda.lambda_min(),
        lambda.lambda_max(),
        sigma.value,
        sbw,
        sbt,
        e0,
    )
    .map_err(err)?;
    Ok((measured, alignments, b.bound_value))
}

fn energy_bound_audit() -> Result<Verdict, String> {
    let mut qualifying = 0;
    let mut excluded = 0;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for seed in 0..5u64 {
        let sbm = SbmParams {
            seed,
            ..SbmParams::default()
        };
        let (g, x, _) = sbm_generate(&sbm).map_err(err)?;
        let adj = normalize(&g, NormMode::Augmented).map_err(err)?;
        let scores = residual::pagerank(&g, 0.85, 1e-10, 10_000).map_err(err)?;
        let pr = residual::pagerank_lambda(&scores, 0.1, 0.7, 0.3).map_err(err)?;
        let mut att = rng::seeded(rng::derive_seed(seed, 7));
        let w_att: Vec<f64> = (0..x.cols()).map(|_| rng::standard_normal(&mut att)).collect();
        let learned = residual::learnable_lambda(&x, &w_att).map_err(err)?;
        for lambda in [pr, learned] {
            for weights in [WeightInit::Identity, WeightInit::Orthogonal { seed }] {
                for depth in [4, 16, 64] {
                    let spec = DepthSpec {
                        weights,
                        ..DepthSpec::new(DepthModel::Adaptive(lambda.clone()), depth)
                    };
                    let t = run_depth_experiment(&spec, &adj, &x).map_err(err)?;
                    let bound = t.energy_report.bound.as_ref().ok_or("missing bound")?.bound_value;
                    if !t.alignments_nonnegative() {
                        excluded += 1;
                        continue;
                    }
                    qualifying += 1;
                    min_margin = min_margin.min(t.final_energy() - bound);
                    if t.final_energy() < bound {
                        violations += 1;
                    }
                }
            }
        }
    }

    let bundle = sbm_bundle()?;
    let mut trained_q = 0;
    for seed in 0..3u64 {
        for strategy in [Strategy::Learnable, pagerank_strategy()] {
            let cfg = TrainConfig {
                strategy,
                num_layers: 4,
                activation: Activation::LeakyRelu(0.2),
                epochs: 200,
                patience: 50,
                seed,
                ..TrainConfig::default()
            };
            let outcome = train(&cfg, &bundle).map_err(err)?;
            let (measured, alignments, bound) = trained_bound(&outcome, &bundle, 0.2)?;
            if alignments.iter().any(|&a| a < 0.0) {
                excluded += 1;
                continue;
            }
            trained_q += 1;
            qualifying += 1;
            min_margin = min_margin.min(measured - bound);
            if measured < bound {
                violations += 1;
            }
        }
    }
    verdict(
        qualifying > 0 && violations == 0,
        format!(
            "{qualifying} qualifying runs ({trained_q} trained), {excluded} excluded for negative alignment, \
             {violations} violations, min margin {min_margin:.3e}"
        ),
    )
}

fn fd_loss(
    adj: &NormalizedAdjacency,
    params: &ModelParams,
    h0: &DenseMatrix,
    targets: &[(usize, usize)],
) -> Result<f64, String> {
    let mut tape = Tape::new(adj);
    let mut drop_rng = rng::seeded(99);
    let drop = Dropout {
        rate: 0.3,
        rng: &mut drop_rng,
    };
    let out = forward_model(
        &mut tape,
        params,
        h0,
        LambdaSource::Learnable,
        Activation::LeakyRelu(0.2),
        Some(drop),
    )
    .map_err(err)?;
    let loss = tape.masked_nll(out.log_probs, targets.to_vec()).map_err(err)?;
    Ok(tape.value(loss)[(0, 0)])
}

fn gradient_check() -> Result<Verdict, String> {
    let mut r = rng::seeded(7);
    let g = gnp_random_graph(20, 0.3, true, &mut r).map_err(err)?;
    let adj = normalize(&g, NormMode::Augmented).map_err(err)?;
    let h0 = DenseMatrix::random_normal(20, 3, &mut r);
    let targets: Vec<(usize, usize)> = (0..20).map(|i| (i, rng::index(&mut r, 3))).collect();
    let mut params = ModelParams::init(3, 4, 2, 3, &mut r);
    params.w_att.value = DenseMatrix::random_normal(3, 1, &mut r).scale(0.5);
    params.head_b.value = DenseMatrix::random_normal(1, 3, &mut r).scale(0.1);

    let grads = {
        let mut tape = Tape::new(&adj);
        let mut drop_rng = rng::seeded(99);
        let drop = Dropout {
            rate: 0.3,
            rng: &mut drop_rng,
        };
        let out = forward_model(
            &mut tape,
            &params,
            &h0,
            LambdaSource::Learnable,
            Activation::LeakyRelu(0.2),
            Some(drop),
        )
        .map_err(err)?;
        let loss = tape.masked_nll(out.log_probs, targets.clone()).map_err(err)?;
        tape.backward(loss, &DenseMatrix::filled(1, 1, 1.0)).map_err(err)?
    };

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for id in 0..params.num_tensors() {
        let shape = params.tensor(id).value.shape();
        let analytic = grads
            .get(id)
            .cloned()
            .unwrap_or_else(|| DenseMatrix::zeros(shape.0, shape.1));
        let mut numeric = DenseMatrix::zeros(shape.0, shape.1);
        for k in 0..shape.0 * shape.1 {
            let mut p = params.clone();
            p.tensor_mut(id).value.data_mut()[k] += h;
            let up = fd_loss(&adj, &p, &h0, &targets)?;
            p.tensor_mut(id).value.data_mut()[k] -= 2.0 * h;
            let down = fd_loss(&adj, &p, &h0, &targets)?;
            numeric.data_mut()[k] = (up - down) / (2.0 * h);
        }
        let scale = numeric.frobenius_norm().max(analytic.frobenius_norm()).max(1e-12);
        let rel = numeric.sub(&analytic).map_err(err)?.frobenius_norm() / scale;
        worst = worst.max(rel);
    }
    verdict(
        worst <= 1e-5,
        format!(
            "{} tensors, max relative error {worst:.3e} (<= 1e-5)",
            params.num_tensors()
        ),
    )
}

/// Naive dense GCN layer built straight from the graph's edge list.
fn reference_gcn(g: &Graph, h: &DenseMatrix, w: &DenseMatrix, relu: bool) -> DenseMatrix {
    let n = g.n();
    let deg: Vec<f64> = g.degrees().iter().map(|d| d + 1.0).collect();
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0 / deg[i];
        for (j, wt) in g.neighbors(i) {
            row[j] = wt / (deg[i] * deg[j]).sqrt();
        }
    }
    let d_in = h.cols();
    let d_out = w.cols();
    let mut ah = vec![vec![0.0; d_in]; n];
    for i in 0..n {
        for c in 0..d_in {
            let mut s = 0.0;
            for j in 0..n {
                if a[i][j] != 0.0 {
                    s += a[i][j] * h[(j, c)];
                }
            }
            ah[i][c] = s;
        }
    }
    DenseMatrix::from_fn(n, d_out, |i, c| {
        let mut s = 0.0;
        for k in 0..d_in {
            if ah[i][k] != 0.0 {
                s += ah[i][k] * w[(k, c)];
            }
        }
        if relu && s <= 0.0 {
            0.0
        } else {
            s
        }
    })
}

fn gcn_recovery() -> Result<Verdict, String> {
    let mut r = rng::seeded(8);
    let mut matched = 0;
    for t in 0..100 {
        let (g, adj) = random_graph(&mut r, 2, 40)?;
        let d_in = 1 + rng::index(&mut r, 8);
        let d_out = 1 + rng::index(&mut r, 8);
        let h = DenseMatrix::random_normal(g.n(), d_in, &mut r);
        let w = DenseMatrix::random_normal(d_in, d_out, &mut r);
        let relu = t % 2 == 0;
        let act = if relu { Activation::Relu } else { Activation::Identity };
        let reference = reference_gcn(&g, &h, &w, relu);
        let layer = gcn_layer_forward(&adj, &h, &w, act).map_err(err)?;
        let params = LayerParams::new(w.clone(), DenseMatrix::random_normal(d_in, d_out, &mut r));
        let exact = airc_layer_forward(Propagation::ExactGcn, &adj, &h, &h, &params, act).map_err(err)?;
        let same = |m: &DenseMatrix| {
            m.shape() == reference.shape() && m.data().iter().zip(reference.data()).all(|(a, b)| a == b)
        };
        if same(&layer) && same(&exact) {
            matched += 1;
        }
    }
    verdict(
        matched == 100,
        format!("{matched}/100 instances identical to the reference"),
    )
}

fn run_sweep(bundle: &DatasetBundle, strategy: Strategy, layers: usize) -> Result<(f64, f64), String> {
    let cfg = TrainConfig {
        strategy,
        num_layers: layers,
        ..TrainConfig::default()
    };
    let seeds: Vec<u64> = (0..10).collect();
    let r = train_sweep(&cfg, bundle, &seeds).map_err(err)?;
    Ok((r.mean, r.std))
}

fn bundle_dir(name: &str) -> Option<PathBuf> {
    let root = std::env::var_os("AIRC_BUNDLES")?;
    let dir = PathBuf::from(root).join(name);
    dir.is_dir().then_some(dir)
}

fn node_classification() -> Result<Verdict, String> {
    let bundle = sbm_bundle()?;
    let (learn, _) = run_sweep(&bundle, Strategy::Learnable, 4)?;
    let (pr, _) = run_sweep(&bundle, pagerank_strategy(), 4)?;
    let (gcn, _) = run_sweep(&bundle, Strategy::Gcn, 4)?;
    let best = learn.max(pr);
    let mut pass = best >= 0.85 && best - gcn >= 0.02;
    let mut detail =
        format!("SBM 10 seeds: learnable {learn:.4}, pagerank {pr:.4}, GCN {gcn:.4} (need >= 0.85 and +0.02 over GCN)");
    match bundle_dir("cora") {
        Some(dir) => {
            let b = load_bundle(&dir).map_err(err)?;
            let (m, _) = run_sweep(&b, pagerank_strategy(), 4)?;
            pass &= (m - 0.807).abs() <= 0.027;
            detail.push_str(&format!("; Cora pagerank {m:.4} (0.807 +- 0.027)"));
        }
        None => detail.push_str("; Cora bundle absent, skipped"),
    }
    match bundle_dir("chameleon") {
        Some(dir) => {
            let b = load_bundle(&dir).map_err(err)?;
            let (l, _) = run_sweep(&b, Strategy::Learnable, 4)?;
            let (p, _) = run_sweep(&b, pagerank_strategy(), 4)?;
            let (g, _) = run_sweep(&b, Strategy::Gcn, 4)?;
            pass &= l.max(p) - g >= 0.10;
            detail.push_str(&format!("; Chameleon IRC {:.4} vs GCN {g:.4} (+0.10)", l.max(p)));
        }
        None => detail.push_str("; Chameleon bundle absent, skipped"),
    }
    verdict(pass, detail)
}

fn depth_robustness() -> Result<Verdict, String> {
    let bundle = sbm_bundle()?;
    let (l2, _) = run_sweep(&bundle, Strategy::Learnable, 2)?;
    let (l8, _) = run_sweep(&bundle, Strategy::Learnable, 8)?;
    let (g2, _) = run_sweep(&bundle, Strategy::Gcn, 2)?;
    let (g8, _) = run_sweep(&bundle, Strategy::Gcn, 8)?;
    let irc_drop = l2 - l8;
    let gcn_drop = g2 - g8;
    verdict(
        irc_drop.abs() <= 0.05 && gcn_drop > 0.05,
        format!("IRC {l2:.4} -> {l8:.4} (|diff| <= 0.05), GCN {g2:.4} -> {g8:.4} (drop {gcn_drop:.4} > 0.05)"),
    )
}

fn complexity_scaling() -> Result<Verdict, String> {
    let grid = [
        BenchPoint {
            n: 1000,
            edges: 50_000,
            d: 16,
        },
        BenchPoint {
            n: 1000,
            edges: 100_000,
            d: 16,
        },
    ];
    let rows = bench(&grid, 31, 0).map_err(err)?;
    let ratio = rows[1].median_seconds / rows[0].median_seconds;
    verdict(
        (1.5..=2.5).contains(&ratio),
        format!(
            "n=1000 d=16: |E| 50000 -> 100000 median {:.3e}s -> {:.3e}s, ratio {ratio:.3} in [1.5, 2.5]",
            rows[0].median_seconds, rows[1].median_seconds
        ),
    )
}

fn print_line(id: usize, name: &str, v: &Result<Verdict, String>) -> bool {
    match v {
        Ok(v) => {
            println!(
                "{} [{id:>2}] {name}: {}",
                if v.pass { "PASS" } else { "FAIL" },
                v.detail
            );
            v.pass
        }
        Err(e) => {
            println!("FAIL [{id:>2}] {name}: error: {e}");
            false
        }
    }
}

fn main() {
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().ok();
    let start = Instant::now();
    let mut passed = 0;
    let mut total = 0;

    let (eq, rank) = match limit_and_rank() {
        Ok((a, b)) => (Ok(a), Ok(b)),
        Err(e) => (Err(e.clone()), Err(e)),
    };
    for (id, name, v) in [(1, "closed-form limit", eq), (2, "rank preservation", rank)] {
        total += 1;
        passed += print_line(id, name, &v) as usize;
    }

    let checks: [(usize, &str, Check); 9] = [
        (3, "leaky-ReLU energy", leaky_relu_suite),
        (4, "weight / aggregation / composite bounds", bound_suites),
        (5, "oversmoothing separation", oversmoothing_separation),
        (6, "energy lower bound audit", energy_bound_audit),
        (7, "gradient correctness", gradient_check),
        (8, "GCN recovery", gcn_recovery),
        (9, "node classification", node_classification),
        (10, "depth robustness", depth_robustness),
        (11, "complexity scaling", complexity_scaling),
    ];
    for (id, name, f) in checks {
        total += 1;
        passed += print_line(id, name, &f()) as usize;
    }
    println!(
        "acceptance: {passed}/{total} criteria passed in {:.1}s",
        start.elapsed().as_secs_f64()
    );
    let strict = std::env::var("AIRC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed != total {
        std::process::exit(1);
    }
}
