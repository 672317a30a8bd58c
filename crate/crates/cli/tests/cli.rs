use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn trimcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trimcast"))
        .args(args)
        .env("TRIMCAST_LOG", "warn")
        .output()
        .expect("spawn trimcast")
}

fn ok(args: &[&str]) -> String {
    let out = trimcast(args);
    assert!(
        out.status.success(),
        "trimcast {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    ok(&["gen", "--count", "20", "--seed", "3", "--out", p(&a)]);
    ok(&["gen", "--count", "20", "--seed", "3", "--out", p(&b)]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 20);
}

#[test]
fn full_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    ok(&["gen", "--count", "100", "--seed", "1", "--out", p(&d("inst.jsonl"))]);
    ok(&["solve", "--in", p(&d("inst.jsonl")), "--out", p(&d("sol.jsonl"))]);
    ok(&[
        "reduce", "--in", p(&d("sol.jsonl")), "--instances", p(&d("inst.jsonl")),
        "--out", p(&d("red.jsonl")), "--nodes", "20000",
    ]);
    assert_eq!(fs::read_to_string(d("red.jsonl")).unwrap().lines().count(), 100);
    ok(&[
        "encode", "--in", p(&d("sol.jsonl")), "--instances", p(&d("inst.jsonl")), "--out", p(&d("x.bin")),
    ]);
    assert!(fs::metadata(d("x.bin")).unwrap().len() > 0);

    ok(&["dataset", "--in", p(&d("inst.jsonl")), "--out", p(&d("ds.jsonl")), "--nodes", "20000"]);
    let printed = ok(&[
        "train", "--in", p(&d("ds.jsonl")), "--out", p(&d("run")), "--epochs", "5", "--hidden", "8,8",
    ]);
    assert!(printed.contains("naive") && printed.contains("mlp"));
    for f in ["mlp.tcm", "quadratic.json", "history.csv", "metrics.csv", "histogram.csv", "scatter.csv"] {
        assert!(d("run").join(f).exists(), "{f} missing");
    }
    let metrics = fs::read_to_string(d("run/metrics.csv")).unwrap();
    assert!(metrics.starts_with("model,n,mape,mae,r2"));
    assert_eq!(metrics.lines().count(), 3);

    ok(&[
        "eval", "--in", p(&d("ds.jsonl")), "--mlp", p(&d("run/mlp.tcm")),
        "--quadratic", p(&d("run/quadratic.json")), "--out", p(&d("eval")),
    ]);
    assert_eq!(metrics, fs::read_to_string(d("eval/metrics.csv")).unwrap());

    ok(&[
        "compare-optimizers", "--in", p(&d("ds.jsonl")), "--out", p(&d("opt.csv")),
        "--optimizers", "adam,rmsprop", "--seeds", "2", "--epochs", "3", "--hidden", "4",
    ]);
    let opt = fs::read_to_string(d("opt.csv")).unwrap();
    assert_eq!(opt.lines().count(), 3);

    // a dataset record carries its own master width
    let record = fs::read_to_string(d("ds.jsonl")).unwrap().lines().next().unwrap().to_owned();
    fs::write(d("rec.json"), &record).unwrap();
    for model in ["run/mlp.tcm", "run/quadratic.json"] {
        let out = ok(&["predict", "--model", p(&d(model)), "--solution", p(&d("rec.json"))]);
        let v: f64 = out.trim().parse().unwrap();
        assert!(v.is_finite());
    }

    // a bare solution needs a master width for the MLP only
    let sol = fs::read_to_string(d("sol.jsonl")).unwrap().lines().next().unwrap().to_owned();
    fs::write(d("one.json"), &sol).unwrap();
    ok(&["predict", "--model", p(&d("run/quadratic.json")), "--solution", p(&d("one.json"))]);
    let out = trimcast(&["predict", "--model", p(&d("run/mlp.tcm")), "--solution", p(&d("one.json"))]);
    assert_eq!(out.status.code(), Some(2));
    ok(&["predict", "--model", p(&d("run/mlp.tcm")), "--solution", p(&d("one.json")), "--master", "5600"]);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(trimcast(&["gen", "--bogus"]).status.code(), Some(1));
    assert_eq!(trimcast(&["gen"]).status.code(), Some(1));
    assert_eq!(trimcast(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(trimcast(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_2() {
    let out = trimcast(&["solve", "--in", "/nonexistent/x.jsonl", "--out", "/tmp/y.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn config_file_fills_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let out = dir.path().join("i.jsonl");
    fs::write(
        &cfg,
        format!(r#"{{"gen": {{"count": 4, "seed": 9, "out": {:?}}}}}"#, p(&out)),
    )
    .unwrap();
    ok(&["--config", p(&cfg), "gen"]);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 4);
    ok(&["--config", p(&cfg), "gen", "--count", "6"]);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 6);
}
