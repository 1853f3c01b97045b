use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn airc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airc"))
        .args(args)
        .env("AIRC_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn lines(p: &Path) -> Vec<String> {
    fs::read_to_string(p).unwrap().lines().map(str::to_owned).collect()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn oversmoothing_writes_one_row_per_layer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("os");
    let o = airc(&["oversmoothing", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["gcn.csv", "airc.csv", "airc_learnable.csv"] {
        let l = lines(&out.join(f));
        assert_eq!(l[0], "layer,energy,rank,effective_rank");
        assert_eq!(l.len(), 18, "{f}");
    }
    assert_eq!(lines(&out.join("lambda_pagerank.csv")).len(), 201);
    assert!(out.join("summary.txt").is_file());
}

#[test]
fn reruns_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = airc(&[
            "train",
            "--epochs",
            "20",
            "--seeds",
            "2",
            "--hidden",
            "8",
            "--seed",
            "3",
            "--out",
            path(d),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "summary.csv",
        "aggregate.csv",
        "alignment_seed3.csv",
        "lambda_seed4.csv",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // per-epoch metrics carry no timing column
    assert_eq!(
        fs::read(a.join("metrics_seed3.csv")).unwrap(),
        fs::read(b.join("metrics_seed3.csv")).unwrap()
    );
    assert_eq!(lines(&a.join("summary.csv")).len(), 3);
}

#[test]
fn depth_sweep_rows_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let o = airc(&[
        "depth-sweep",
        "--epochs",
        "5",
        "--seeds",
        "1",
        "--hidden",
        "4",
        "--variants",
        "pagerank,gcn",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let l = lines(&out.join("depth_sweep.csv"));
    assert_eq!(l.len(), 1 + 2 * 7);
}

#[test]
fn limit_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = airc(&["limit-check", "--instances", "5", "--out", path(&dir.path().join("ok"))]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(lines(&dir.path().join("ok/limit_check.csv")).len(), 6);
    let bad = airc(&[
        "limit-check",
        "--instances",
        "5",
        "--inject-unit-lambda",
        "--out",
        path(&dir.path().join("bad")),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(
        airc(&["train", "--strategy", "bogus", "--out", out]).status.code(),
        Some(2)
    );
    assert_eq!(airc(&["bench", "--grid", "", "--out", out]).status.code(), Some(2));
    assert_eq!(airc(&["no-such-command"]).status.code(), Some(2));
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"no_such_flag": 1}"#).unwrap();
    let o = airc(&["--config", path(&cfg), "limit-check", "--instances", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn command_line_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"instances": 3, "max_n": 10}"#).unwrap();
    let a = dir.path().join("a");
    let o = airc(&["--config", path(&cfg), "limit-check", "--out", path(&a)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lines(&a.join("limit_check.csv")).len(), 4);
    let b = dir.path().join("b");
    let o = airc(&[
        "--config",
        path(&cfg),
        "limit-check",
        "--instances",
        "2",
        "--out",
        path(&b),
    ]);
    assert!(o.status.success());
    assert_eq!(lines(&b.join("limit_check.csv")).len(), 3);
}

#[test]
fn refuses_non_empty_output_without_force() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("keep.txt"), "x").unwrap();
    let args = ["limit-check", "--instances", "1", "--out", path(dir.path())];
    assert_ne!(airc(&args).status.code(), Some(0));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(airc(&forced).status.code(), Some(0));
}
