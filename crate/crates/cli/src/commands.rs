use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use airc::energy::EnergyReport;
use airc::experiments::{self, BenchPoint, ExperimentError, LimitCheckConfig, OversmoothingConfig};
use airc::graph::{sbm_generate, GraphError, NormMode, SbmParams};
use airc::io::{self, BundleError, DatasetBundle};
use airc::propagate::{Activation, DepthTrace};
use airc::residual::{self, ResidualError};
use airc::train::{Strategy, TrainConfig, TrainError, TrainOutcome};

use crate::{
    ActivationArg, BenchArgs, Cli, CliError, Command, DepthSweepArgs, LambdaArgs, LimitCheckArgs, ModelArgs, NormArg,
    OversmoothingArgs, PagerankLambdaArgs, SbmArgs, StrategyArg, TrainArgs,
};

type Result<T> = std::result::Result<T, CliError>;

fn fail(e: impl Display) -> CliError {
    CliError::Failure(e.to_string())
}

fn usage(e: impl Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        fail(e)
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::OverwriteRefused(_) => usage(e),
            other => fail(other),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::InvalidSbmParams(_) => usage(e),
            other => fail(other),
        }
    }
}

fn residual_err(e: ResidualError) -> CliError {
    match e {
        ResidualError::InvalidDamping(_)
        | ResidualError::InvalidFraction(_)
        | ResidualError::InvalidLambdaOrder { .. }
        | ResidualError::InvalidBeta(_)
        | ResidualError::InvalidTolerance(_) => usage(e),
        other => fail(other),
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) => usage(e),
            TrainError::Residual(r) => residual_err(r),
            TrainError::Graph(g) => g.into(),
            other => fail(other),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidParams(_) => usage(e),
            ExperimentError::Graph(g) => g.into(),
            ExperimentError::Residual(r) => residual_err(r),
            ExperimentError::Train(t) => t.into(),
            other => fail(other),
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Oversmoothing(a) => oversmoothing(cli, a),
        Command::Train(a) => train(cli, a),
        Command::DepthSweep(a) => depth_sweep(cli, a),
        Command::LimitCheck(a) => limit_check(cli, a),
        Command::Bench(a) => bench(cli, a),
        Command::PagerankLambda(a) => pagerank_lambda(cli, a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn norm(n: NormArg) -> NormMode {
    match n {
        NormArg::Augmented => NormMode::Augmented,
        NormArg::Plain => NormMode::Plain,
    }
}

fn sbm_params(a: &SbmArgs) -> SbmParams {
    SbmParams {
        n: a.n,
        p: a.p,
        q: a.q,
        mu1: a.mu1,
        mu2: a.mu2,
        std: a.std,
        dim: a.dim,
        seed: a.sbm_seed,
    }
}

fn dataset(data: Option<&Path>, sbm: &SbmArgs) -> Result<DatasetBundle> {
    match data {
        Some(p) => Ok(io::load_bundle(p)?),
        None => {
            let (g, x, y) = sbm_generate(&sbm_params(sbm))?;
            Ok(DatasetBundle::new("sbm", g, x, y, None)?)
        }
    }
}

fn strategy(s: StrategyArg, l: &LambdaArgs, beta: f64) -> Strategy {
    match s {
        StrategyArg::Learnable => Strategy::Learnable,
        StrategyArg::Pagerank => Strategy::PageRank {
            k: l.k,
            lambda_max: l.lambda_max,
            lambda_min: l.lambda_min,
        },
        StrategyArg::Static => Strategy::Static { beta },
        StrategyArg::Gcn => Strategy::Gcn,
    }
}

fn train_config(m: &ModelArgs, s: StrategyArg, layers: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        lr: m.lr,
        weight_decay: m.weight_decay,
        hidden_dim: m.hidden,
        num_layers: layers,
        dropout: m.dropout,
        activation: match m.activation {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::LeakyRelu => Activation::LeakyRelu(m.slope),
            ActivationArg::Identity => Activation::Identity,
        },
        strategy: strategy(s, &m.lambda, m.beta),
        epochs: m.epochs,
        patience: m.patience,
        seed,
        norm_mode: norm(m.norm),
        log_every: 10,
    }
}

fn seeds(cli: &Cli, count: u64) -> Result<Vec<u64>> {
    if count == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    Ok((0..count).map(|i| cli.seed.wrapping_add(i)).collect())
}

fn write_energy(path: &Path, report: &EnergyReport) -> Result<()> {
    let mut f = create(path)?;
    io::write_energy_csv(&mut f, report)?;
    f.flush()?;
    Ok(())
}

fn write_snapshots(dir: &Path, name: &str, trace: &DepthTrace) -> Result<()> {
    if let Some(snaps) = &trace.embeddings {
        for (l, h) in snaps.iter().enumerate() {
            let mut f = create(&dir.join(format!("{name}_layer{l}.csv")))?;
            io::write_matrix_csv(&mut f, h)?;
            f.flush()?;
        }
    }
    Ok(())
}

fn oversmoothing(cli: &Cli, a: &OversmoothingArgs) -> Result<()> {
    let cfg = OversmoothingConfig {
        sbm: sbm_params(&a.sbm),
        depth: a.depth,
        slope: a.slope,
        weight_seed: cli.seed,
        k: a.lambda.k,
        lambda_max: a.lambda.lambda_max,
        lambda_min: a.lambda.lambda_min,
        norm_mode: norm(a.norm),
        snapshot: a.snapshot,
    };
    if a.depth == 0 {
        return Err(usage("--depth must be at least 1"));
    }
    io::prepare_output_dir(&cli.out, cli.force)?;
    let r = experiments::oversmoothing(&cfg)?;
    write_energy(&cli.out.join("gcn.csv"), &r.gcn.energy_report)?;
    write_energy(&cli.out.join("airc.csv"), &r.airc_pagerank.energy_report)?;
    write_energy(&cli.out.join("airc_learnable.csv"), &r.airc_learnable.energy_report)?;
    let mut f = create(&cli.out.join("lambda_pagerank.csv"))?;
    io::write_lambda_csv(&mut f, &r.pagerank_lambda)?;
    f.flush()?;
    if a.snapshot {
        let dir = cli.out.join("embeddings");
        fs::create_dir_all(&dir)?;
        write_snapshots(&dir, "gcn", &r.gcn)?;
        write_snapshots(&dir, "airc", &r.airc_pagerank)?;
        write_snapshots(&dir, "airc_learnable", &r.airc_learnable)?;
    }

    let mut summary = String::new();
    let mut violated = Vec::new();
    for (name, t) in [
        ("gcn", &r.gcn),
        ("airc", &r.airc_pagerank),
        ("airc_learnable", &r.airc_learnable),
    ] {
        let ratio = t.energy_report.energy_ratio().unwrap_or(f64::NAN);
        summary.push_str(&format!(
            "{name}: layers={} energy_ratio={ratio:.6e} final_energy={:.6e}",
            t.energy_report.layers() - 1,
            t.final_energy()
        ));
        if let Some(b) = &t.energy_report.bound {
            let aligned = t.alignments_nonnegative();
            summary.push_str(&format!(
                " bound={:.6e}{} alignments_nonnegative={aligned}",
                b.bound_value,
                if t.energy_report.bound_approximate {
                    " (approximate)"
                } else {
                    ""
                }
            ));
            if aligned && t.final_energy() < b.bound_value {
                violated.push(name);
            }
        }
        summary.push('\n');
    }
    fs::write(cli.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    if violated.is_empty() {
        Ok(())
    } else {
        Err(fail(format!(
            "energy fell below the lower bound for {}",
            violated.join(", ")
        )))
    }
}

fn write_outcome(dir: &Path, o: &TrainOutcome) -> Result<()> {
    let m = &o.metrics;
    let mut f = create(&dir.join(format!("metrics_seed{}.csv", m.seed)))?;
    writeln!(f, "epoch,train_acc,val_acc,test_acc,loss,energy_last_layer")?;
    for r in &m.records {
        writeln!(
            f,
            "{},{},{},{},{:.15e},{:.15e}",
            r.epoch, r.train_acc, r.val_acc, r.test_acc, r.loss, r.energy_last_layer
        )?;
    }
    f.flush()?;
    let mut f = create(&dir.join(format!("alignment_seed{}.csv", m.seed)))?;
    writeln!(f, "epoch,layer,alignment")?;
    for (epoch, values) in &m.alignment_log {
        for (l, v) in values.iter().enumerate() {
            writeln!(f, "{epoch},{},{v:.15e}", l + 1)?;
        }
    }
    f.flush()?;
    if let Some(l) = &o.lambda {
        let mut f = create(&dir.join(format!("lambda_seed{}.csv", m.seed)))?;
        io::write_lambda_csv(&mut f, l)?;
        f.flush()?;
    }
    Ok(())
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let seeds = seeds(cli, a.model.seeds)?;
    let cfg = train_config(&a.model, a.strategy, a.layers, cli.seed);
    cfg.validate()?;
    let data = dataset(a.model.data.as_deref(), &a.model.sbm)?;
    io::prepare_output_dir(&cli.out, cli.force)?;
    let sweep = experiments::train_sweep(&cfg, &data, &seeds)?;
    let mut summary = create(&cli.out.join("summary.csv"))?;
    writeln!(summary, "seed,best_epoch,test_acc")?;
    for o in &sweep.outcomes {
        write_outcome(&cli.out, o)?;
        writeln!(
            summary,
            "{},{},{}",
            o.metrics.seed, o.metrics.best_epoch, o.metrics.test_acc
        )?;
    }
    summary.flush()?;
    fs::write(
        cli.out.join("aggregate.csv"),
        format!(
            "runs,mean_test_acc,std_test_acc\n{},{},{}\n",
            seeds.len(),
            sweep.mean,
            sweep.std
        ),
    )?;
    println!(
        "{} {}: test accuracy {:.4} ± {:.4} over {} runs",
        data.name,
        cfg.strategy,
        sweep.mean,
        sweep.std,
        seeds.len()
    );
    Ok(())
}

fn depth_sweep(cli: &Cli, a: &DepthSweepArgs) -> Result<()> {
    if a.min_depth == 0 || a.min_depth > a.max_depth {
        return Err(usage("need 1 <= --min-depth <= --max-depth"));
    }
    if a.variants.is_empty() {
        return Err(usage("--variants must name at least one strategy"));
    }
    let seeds = seeds(cli, a.model.seeds)?;
    let base = train_config(&a.model, StrategyArg::Learnable, a.min_depth, cli.seed);
    base.validate()?;
    let data = dataset(a.model.data.as_deref(), &a.model.sbm)?;
    io::prepare_output_dir(&cli.out, cli.force)?;
    let variants: Vec<(String, Strategy)> = a
        .variants
        .iter()
        .map(|&s| {
            let st = strategy(s, &a.model.lambda, a.model.beta);
            (st.to_string(), st)
        })
        .collect();
    let depths: Vec<usize> = (a.min_depth..=a.max_depth).collect();
    let rows = experiments::depth_sweep(&base, &data, &depths, &variants, &seeds)?;
    let mut f = create(&cli.out.join("depth_sweep.csv"))?;
    writeln!(f, "variant,depth,mean_test_acc,std_test_acc")?;
    for r in &rows {
        writeln!(f, "{},{},{},{}", r.variant, r.depth, r.mean, r.std)?;
        println!("{:<10} depth {:>3}: {:.4} ± {:.4}", r.variant, r.depth, r.mean, r.std);
    }
    f.flush()?;
    Ok(())
}

fn limit_check(cli: &Cli, a: &LimitCheckArgs) -> Result<()> {
    if !(a.tol > 0.0 && a.match_tol > 0.0) {
        return Err(usage("--tol and --match-tol must be positive"));
    }
    let cfg = LimitCheckConfig {
        instances: a.instances,
        max_n: a.max_n,
        max_d: a.max_d,
        tol: a.tol,
        match_tol: a.match_tol,
        max_steps: a.max_steps,
        seed: cli.seed,
        inject_unit_lambda: a.inject_unit_lambda,
        ..LimitCheckConfig::default()
    };
    io::prepare_output_dir(&cli.out, cli.force)?;
    let report = experiments::limit_check(&cfg)?;
    let mut f = create(&cli.out.join("limit_check.csv"))?;
    writeln!(f, "instance,n,d,steps,rel_error,rank0,rank_preserved,status")?;
    let mut failures = 0;
    for i in &report.instances {
        let ok = i.passed(report.match_tol);
        if !ok {
            failures += 1;
            println!(
                "instance {}: FAIL (n={}, d={}, rel_error={:.3e}, rank_preserved={}){}",
                i.index,
                i.n,
                i.d,
                i.rel_error,
                i.rank_preserved,
                i.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
            );
        }
        writeln!(
            f,
            "{},{},{},{},{:.6e},{},{},{}",
            i.index,
            i.n,
            i.d,
            i.steps,
            i.rel_error,
            i.rank0,
            i.rank_preserved,
            if ok { "pass" } else { "fail" }
        )?;
    }
    f.flush()?;
    let worst = report
        .instances
        .iter()
        .map(|i| i.rel_error)
        .filter(|e| e.is_finite())
        .fold(0.0, f64::max);
    println!(
        "limit-check: {} instances, tol={:e}, match_tol={:e}, worst relative error {:.3e}, {} failures",
        report.instances.len(),
        report.tol,
        report.match_tol,
        worst,
        failures
    );
    if failures == 0 {
        Ok(())
    } else {
        Err(fail(format!("{failures} limit-check instance(s) failed")))
    }
}

fn parse_grid(spec: &str) -> Result<Vec<BenchPoint>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').collect();
            let nums: std::result::Result<Vec<usize>, _> = parts.iter().map(|p| p.trim().parse::<usize>()).collect();
            match nums {
                Ok(v) if v.len() == 3 => Ok(BenchPoint {
                    n: v[0],
                    edges: v[1],
                    d: v[2],
                }),
                _ => Err(usage(format!("bad grid entry {item:?}; expected n:edges:d"))),
            }
        })
        .collect()
}

fn bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let grid = parse_grid(&a.grid)?;
    if grid.is_empty() {
        return Err(usage("--grid is empty"));
    }
    io::prepare_output_dir(&cli.out, cli.force)?;
    let rows = experiments::bench(&grid, a.repeats, cli.seed)?;
    let mut f = create(&cli.out.join("bench.csv"))?;
    writeln!(f, "n,edges,d,median_seconds")?;
    for r in &rows {
        writeln!(
            f,
            "{},{},{},{:.6e}",
            r.point.n, r.point.edges, r.point.d, r.median_seconds
        )?;
        println!(
            "n={} edges={} d={}: {:.3e} s",
            r.point.n, r.point.edges, r.point.d, r.median_seconds
        );
    }
    f.flush()?;
    Ok(())
}

fn pagerank_lambda(cli: &Cli, a: &PagerankLambdaArgs) -> Result<()> {
    let data = dataset(a.data.as_deref(), &a.sbm)?;
    let scores = residual::pagerank(
        &data.graph,
        a.damping,
        residual::DEFAULT_PAGERANK_TOL,
        residual::DEFAULT_PAGERANK_MAX_ITER,
    )
    .map_err(residual_err)?;
    let lambda = residual::pagerank_lambda(&scores, a.lambda.k, a.lambda.lambda_max, a.lambda.lambda_min)
        .map_err(residual_err)?;
    io::prepare_output_dir(&cli.out, cli.force)?;
    let mut f = create(&cli.out.join("lambda.csv"))?;
    io::write_lambda_csv(&mut f, &lambda)?;
    f.flush()?;
    let top = lambda.values().iter().filter(|&&v| v == a.lambda.lambda_max).count();
    println!(
        "{}: {top} of {} nodes at lambda_max={}, PageRank converged in {} iterations",
        data.name,
        lambda.len(),
        a.lambda.lambda_max,
        scores.iterations_used
    );
    Ok(())
}
