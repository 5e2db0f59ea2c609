//! End-to-end checks of the `frog` binary surface through `cli::run`,
//! exercising real subcommand round trips in temp directories.

use std::fs;
use std::path::Path;

use frog_core::cli::run;
use frog_core::report::{Manifest, MetricsReport};

fn frog(args: &[&str]) -> i32 {
    let mut argv = vec!["frog"];
    argv.extend_from_slice(args);
    run(argv)
}

/// Small-but-real settings shared by the round-trip tests.
fn tiny_sets(out: &Path, extra: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = [
        "--seed",
        "9",
        "--set",
        "data.synth.n=200",
        "--set",
        "data.synth.communities=4",
        "--set",
        "data.synth.profile_dim=4",
        "--set",
        "data.synth.image_dim=3",
        "--set",
        "data.synth.text_dim=3",
        "--set",
        "model.d=6",
        "--set",
        "model.h=6",
        "--set",
        "model.m=5",
        "--set",
        "model.sample_sizes=[4,3]",
        "--set",
        "train.max_epochs=2",
        "--set",
        "train.batch_size=128",
        "--set",
        "train.eval_negatives=20",
        "--set",
        "train.val_queries=30",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    args.push("--out".into());
    args.push(out.display().to_string());
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run_tiny(cmd: &str, out: &Path, extra: &[&str]) -> i32 {
    let args = tiny_sets(out, extra);
    let mut argv = vec![cmd.to_string()];
    argv.extend(args);
    frog(&argv.iter().map(|s| s.as_str()).collect::<Vec<_>>())
}

#[test]
fn synth_is_reproducible_and_manifested() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_tiny("synth", &a, &[]), 0);
    assert_eq!(run_tiny("synth", &b, &[]), 0);
    for file in ["dataset/users.jsonl", "dataset/edges.csv", "dataset/instances.csv"] {
        let left = fs::read(a.join(file)).unwrap();
        let right = fs::read(b.join(file)).unwrap();
        assert_eq!(left, right, "{file} differs between identical runs");
        assert!(!left.is_empty());
    }
    let manifest: Manifest = frog_core::report::read_json(&a.join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "synth");
    assert_eq!(manifest.seed, 9);
    assert_eq!(manifest.artifacts.len(), 3);
}

#[test]
fn train_writes_artifacts_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_tiny("train", &a, &[]), 0);
    assert_eq!(run_tiny("train", &b, &[]), 0);

    for file in ["checkpoint.json", "metrics.json", "manifest.json", "timings.json"] {
        assert!(a.join(file).exists(), "missing {file}");
    }
    // metrics and checkpoint depend only on (seed, config); the differing
    // `out` path is echoed inside, so normalize it before comparing.
    let norm = |p: &Path, name: &str| {
        fs::read_to_string(p.join(name)).unwrap().replace(&p.display().to_string(), "OUT")
    };
    assert_eq!(norm(&a, "metrics.json"), norm(&b, "metrics.json"));
    assert_eq!(norm(&a, "checkpoint.json"), norm(&b, "checkpoint.json"));

    let report: MetricsReport = frog_core::report::read_json(&a.join("metrics.json")).unwrap();
    assert_eq!(report.command, "train");
    assert_eq!(report.runs.len(), 1);
    let train = report.runs[0].train.as_ref().unwrap();
    assert_eq!(train.train_loss.len(), 2);
    assert!(report.mean.hr.contains_key(&10));
}

#[test]
fn eval_consumes_a_train_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (t, e) = (dir.path().join("t"), dir.path().join("e"));
    assert_eq!(run_tiny("train", &t, &[]), 0);
    let checkpoint = t.join("checkpoint.json");
    let before = fs::read(&checkpoint).unwrap();
    assert_eq!(
        run_tiny("eval", &e, &["--checkpoint", &checkpoint.display().to_string(), "--set", "eval.repeats=2"]),
        0
    );
    // Inputs are never mutated.
    assert_eq!(fs::read(&checkpoint).unwrap(), before);
    let report: MetricsReport = frog_core::report::read_json(&e.join("metrics.json")).unwrap();
    assert_eq!(report.command, "eval");
    assert_eq!(report.runs.len(), 2);
    assert!(report.runs.iter().all(|r| r.train.is_none()));
}

#[test]
fn gradcheck_default_passes_and_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gc");
    let code = frog(&["gradcheck", "--out", &out.display().to_string()]);
    assert_eq!(code, 0);
    assert!(out.join("gradcheck.json").exists());

    // An absurdly tight threshold must flip the exit code.
    let out2 = dir.path().join("gc2");
    let code = frog(&["gradcheck", "--out", &out2.display().to_string(), "--threshold", "1e-18"]);
    assert_eq!(code, 1);
}

#[test]
fn bench_runs_and_reports_a_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let code =
        frog(&["bench", "--dims", "6,8,10", "--t", "2", "--reps", "2", "--out", &out.display().to_string()]);
    assert_eq!(code, 0);
    let report: frog_core::train::BenchReport =
        frog_core::report::read_json(&out.join("bench.json")).unwrap();
    assert_eq!(report.points.len(), 3);
    assert!(report.slope.is_finite());
}

#[test]
fn usage_errors_exit_nonzero() {
    assert_eq!(frog(&["bogus"]), 2);
    assert_eq!(frog(&[]), 2);
    // Config errors exit 1.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(run_tiny("synth", &out, &["--set", "model.d=0"]), 1);
    assert_eq!(run_tiny("synth", &out, &["--set", "no.such.key=1"]), 1);
}

#[test]
fn loaded_dataset_round_trips_through_training() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t) = (dir.path().join("s"), dir.path().join("t"));
    assert_eq!(run_tiny("synth", &s, &[]), 0);
    let ds = s.join("dataset");
    let extra = [
        format!("--set=data.users={}", ds.join("users.jsonl").display()),
        format!("--set=data.edges={}", ds.join("edges.csv").display()),
        format!("--set=data.instances={}", ds.join("instances.csv").display()),
    ];
    let extra_refs: Vec<&str> = extra.iter().map(|s| s.as_str()).collect();
    assert_eq!(run_tiny("train", &t, &extra_refs), 0);
    let report: MetricsReport = frog_core::report::read_json(&t.join("metrics.json")).unwrap();
    assert!(report.mean.queries > 0);
}
