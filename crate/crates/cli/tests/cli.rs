//! End-to-end contract tests for the binary: exit codes, error wording,
//! seed precedence, help output, and parallel determinism.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use noisy_distill_core::datagen::Dataset;
use noisy_distill_core::eval::rank_by_pseudo;
use noisy_distill_core::labels::{PseudoLabelSpec, Strategy};
use noisy_distill_core::model::MLPClassifier;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_noisy-distill")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_in(dir: &Path, envs: &[(&str, &str)], args: &[&str]) -> Run {
    let mut cmd = Command::new(bin());
    cmd.current_dir(dir).env_remove("NOISY_DISTILL_SEED").args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().expect("process exited normally"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn expect_ok(dir: &Path, args: &[&str]) -> Run {
    let run = run_in(dir, &[], args);
    assert_eq!(run.code, 0, "{args:?} failed: {}", run.stderr);
    run
}

const GEN_JSON: &str = r#"{
  "spec": {
    "label_count": 6, "feature_dim": 6, "samples": 300,
    "noise": {"flip_rate": 0.3, "sibling_bias": 0.5, "background_fraction": 0.1, "seed": 7}
  },
  "dataset_out": "data.jsonl", "graph_out": "graph.tsv"
}"#;

const TRAIN_JSON: &str = r#"{
  "dataset": "data.jsonl", "split": "clean-train", "strategy": "noisy",
  "hidden": [8], "train": {"epochs": 3, "batch_size": 16, "seed": 3},
  "model_out": "model.json"
}"#;

/// One small dataset + teacher shared by the rank and train tests.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

fn fixture() -> &'static Fixture {
    static FIX: OnceLock<Fixture> = OnceLock::new();
    FIX.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(root.join("gen.json"), GEN_JSON).unwrap();
        std::fs::write(root.join("train.json"), TRAIN_JSON).unwrap();
        expect_ok(&root, &["gen-data", "--config", "gen.json"]);
        expect_ok(&root, &["train", "--config", "train.json"]);
        Fixture { _dir: dir, root }
    })
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"spec": {"noise": {"flip_rte": 0.3}}}"#,
    )
    .unwrap();
    let run = run_in(dir.path(), &[], &["gen-data", "--config", "bad.json"]);
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
    assert!(
        run.stderr.contains("unknown key: flip_rte"),
        "stderr must name the bad key: {}",
        run.stderr
    );
}

#[test]
fn missing_input_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("train.json"),
        r#"{"dataset": "absent.jsonl", "model_out": "m.json"}"#,
    )
    .unwrap();
    let run = run_in(dir.path(), &[], &["train", "--config", "train.json"]);
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
    assert!(run.stderr.contains("absent.jsonl"), "stderr: {}", run.stderr);
}

#[test]
fn nonexistent_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_in(dir.path(), &[], &["gen-data", "--config", "nope.json"]);
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
    assert!(run.stderr.contains("nope.json"), "stderr: {}", run.stderr);
}

#[test]
fn correlated_verification_is_not_applicable_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("v.json"),
        r#"{"check": {"mode": "correlated", "n": 2000}}"#,
    )
    .unwrap();
    let run = run_in(dir.path(), &[], &["verify-prop1", "--config", "v.json"]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(
        run.stdout.contains("not applicable (correlated)"),
        "stdout: {}",
        run.stdout
    );
}

#[test]
fn degenerate_noise_fails_the_tolerance_checks() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("v.json"),
        r#"{"check": {"noise_sigma": 0.0, "n": 2000}}"#,
    )
    .unwrap();
    let run = run_in(dir.path(), &[], &["verify-prop1", "--config", "v.json"]);
    assert_eq!(run.code, 1, "stderr: {}", run.stderr);
    assert!(
        run.stderr.contains("checks outside tolerance"),
        "stderr: {}",
        run.stderr
    );
    // The reports are still written for inspection.
    assert!(dir.path().join("risk_report.json").exists());
    assert!(dir.path().join("risk_curve.csv").exists());
}

#[test]
fn zero_samples_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("v.json"), r#"{"check": {"n": 0}}"#).unwrap();
    let run = run_in(dir.path(), &[], &["verify-prop1", "--config", "v.json"]);
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
}

#[test]
fn seed_env_overrides_config_and_flag_beats_env() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("gen.json"), GEN_JSON).unwrap();

    for sub in ["a", "b", "c"] {
        std::fs::create_dir(root.join(sub)).unwrap();
        std::fs::copy(root.join("gen.json"), root.join(sub).join("gen.json")).unwrap();
    }
    let base = run_in(&root.join("a"), &[], &["gen-data", "--config", "gen.json"]);
    assert_eq!(base.code, 0, "{}", base.stderr);
    let env = run_in(
        &root.join("b"),
        &[("NOISY_DISTILL_SEED", "99")],
        &["gen-data", "--config", "gen.json"],
    );
    assert_eq!(env.code, 0, "{}", env.stderr);
    let flag = run_in(
        &root.join("c"),
        &[("NOISY_DISTILL_SEED", "99")],
        &["gen-data", "--config", "gen.json", "--seed", "7"],
    );
    assert_eq!(flag.code, 0, "{}", flag.stderr);

    let data = |sub: &str| std::fs::read(root.join(sub).join("data.jsonl")).unwrap();
    assert_ne!(data("a"), data("b"), "env seed must change the generated data");
    assert_eq!(data("a"), data("c"), "--seed must beat the environment");
}

#[test]
fn invalid_seed_env_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("gen.json"), GEN_JSON).unwrap();
    let run = run_in(
        dir.path(),
        &[("NOISY_DISTILL_SEED", "not-a-number")],
        &["gen-data", "--config", "gen.json"],
    );
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
    assert!(run.stderr.contains("NOISY_DISTILL_SEED"), "stderr: {}", run.stderr);
}

#[test]
fn help_screens_enumerate_subcommands_and_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let top = run_in(dir.path(), &[], &["--help"]);
    assert_eq!(top.code, 0);
    for sub in ["gen-data", "train", "benchmark", "verify-prop1", "temp-sweep", "rank"] {
        assert!(top.stdout.contains(sub), "--help must list {sub}");
    }

    let gen = run_in(dir.path(), &[], &["gen-data", "--help"]);
    assert_eq!(gen.code, 0);
    for key in ["spec.noise.flip_rate", "spec.children_per_parent", "dataset_out"] {
        assert!(gen.stdout.contains(key), "gen-data --help must list {key}");
    }

    let bench = run_in(dir.path(), &[], &["benchmark", "--help"]);
    assert_eq!(bench.code, 0);
    for key in ["bench.lambda_grid", "bench.train.epochs", "methods"] {
        assert!(bench.stdout.contains(key), "benchmark --help must list {key}");
    }

    let verify = run_in(dir.path(), &[], &["verify-prop1", "--help"]);
    assert_eq!(verify.code, 0);
    for key in ["check.noise_sigma", "check.grid_points", "report_out"] {
        assert!(verify.stdout.contains(key), "verify-prop1 --help must list {key}");
    }
}

#[test]
fn parallel_jobs_do_not_change_results() {
    let fix = fixture();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for f in ["data.jsonl", "graph.tsv"] {
        std::fs::copy(fix.root.join(f), root.join(f)).unwrap();
    }
    std::fs::write(
        root.join("bench.json"),
        r#"{
  "dataset": "data.jsonl", "graph": "graph.tsv",
  "methods": ["baseline-clean", "distillation"],
  "bench": {"seeds": [1, 2], "hidden": [8], "train": {"epochs": 2, "batch_size": 32}}
}"#,
    )
    .unwrap();
    expect_ok(root, &["benchmark", "--config", "bench.json", "--jobs", "1", "--out-dir", "r1"]);
    expect_ok(root, &["benchmark", "--config", "bench.json", "--jobs", "2", "--out-dir", "r2"]);

    for name in ["report.csv", "seed-1.csv", "seed-2.csv", "aggregate.csv"] {
        let a = std::fs::read(root.join("r1").join(name)).unwrap();
        let b = std::fs::read(root.join("r2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between --jobs 1 and --jobs 2");
    }
    let mask = |p: PathBuf| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.contains("\"timestamp\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        mask(root.join("r1/report.json")),
        mask(root.join("r2/report.json")),
        "report.json differs beyond the timestamp"
    );
}

#[test]
fn zero_jobs_is_a_usage_error() {
    let fix = fixture();
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fix.root.join("data.jsonl"), dir.path().join("data.jsonl")).unwrap();
    std::fs::write(
        dir.path().join("bench.json"),
        r#"{"dataset": "data.jsonl", "methods": ["baseline-clean"]}"#,
    )
    .unwrap();
    let run = run_in(
        dir.path(),
        &[],
        &["benchmark", "--config", "bench.json", "--jobs", "0"],
    );
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
}

#[test]
fn rank_with_zero_lambda_orders_by_teacher_scores() {
    let fix = fixture();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for f in ["data.jsonl", "model.json"] {
        std::fs::copy(fix.root.join(f), root.join(f)).unwrap();
    }
    std::fs::write(
        root.join("rank.json"),
        r#"{"dataset": "data.jsonl", "model": "model.json"}"#,
    )
    .unwrap();

    let data = Dataset::load(root.join("data.jsonl")).unwrap();
    let class = data.labels[0].clone();
    expect_ok(
        root,
        &["rank", "--config", "rank.json", "--class", &class, "--lambda", "0.0"],
    );

    let csv = std::fs::read_to_string(root.join("ranking.distill.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("rank,id,pseudo,true,observed"));
    let csv_ids: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert!(!csv_ids.is_empty(), "ranking must list records");

    // Blend weight 0 discards the observed labels entirely, so the order
    // must be exactly the teacher's soft scores for the class.
    let teacher = MLPClassifier::load_json(root.join("model.json")).unwrap();
    let spec = PseudoLabelSpec::new(Strategy::Distill, 0.0);
    let expected = rank_by_pseudo(&data, 0, &spec, &teacher).unwrap();
    let expected_ids: Vec<&str> = expected.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(csv_ids, expected_ids, "CSV order must match the teacher ordering");
}

#[test]
fn train_rejects_the_auto_lambda() {
    let fix = fixture();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for f in ["data.jsonl", "model.json"] {
        std::fs::copy(fix.root.join(f), root.join(f)).unwrap();
    }
    std::fs::write(
        root.join("train.json"),
        r#"{
  "dataset": "data.jsonl", "strategy": "distill", "teacher": "model.json",
  "lambda": "auto", "model_out": "student.json"
}"#,
    )
    .unwrap();
    let run = run_in(root, &[], &["train", "--config", "train.json"]);
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
    assert!(
        run.stderr.contains("only supported by the benchmark"),
        "stderr: {}",
        run.stderr
    );
}

#[test]
fn rank_rejects_an_unknown_class_and_lists_the_valid_ones() {
    let fix = fixture();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for f in ["data.jsonl", "model.json"] {
        std::fs::copy(fix.root.join(f), root.join(f)).unwrap();
    }
    std::fs::write(
        root.join("rank.json"),
        r#"{"dataset": "data.jsonl", "model": "model.json"}"#,
    )
    .unwrap();
    let run = run_in(
        root,
        &[],
        &["rank", "--config", "rank.json", "--class", "bogus", "--lambda", "0.5"],
    );
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
    assert!(run.stderr.contains("unknown class: bogus"), "stderr: {}", run.stderr);
    let data = Dataset::load(fix.root.join("data.jsonl")).unwrap();
    assert!(
        run.stderr.contains(data.labels[0].as_str()),
        "stderr must list the valid classes: {}",
        run.stderr
    );
}

#[test]
fn rank_guided_requires_a_graph() {
    let fix = fixture();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for f in ["data.jsonl", "model.json"] {
        std::fs::copy(fix.root.join(f), root.join(f)).unwrap();
    }
    std::fs::write(
        root.join("rank.json"),
        r#"{"dataset": "data.jsonl", "model": "model.json"}"#,
    )
    .unwrap();
    let data = Dataset::load(fix.root.join("data.jsonl")).unwrap();
    let class = data.labels[0].clone();
    let run = run_in(
        root,
        &[],
        &["rank", "--config", "rank.json", "--class", &class, "--lambda", "0.5", "--guided"],
    );
    assert_eq!(run.code, 2, "stderr: {}", run.stderr);
    assert!(run.stderr.contains("graph"), "stderr: {}", run.stderr);
}

#[test]
fn rank_with_a_graph_writes_both_rankings() {
    let fix = fixture();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for f in ["data.jsonl", "graph.tsv", "model.json"] {
        std::fs::copy(fix.root.join(f), root.join(f)).unwrap();
    }
    std::fs::write(
        root.join("rank.json"),
        r#"{"dataset": "data.jsonl", "graph": "graph.tsv", "model": "model.json", "out_prefix": "r"}"#,
    )
    .unwrap();
    let data = Dataset::load(fix.root.join("data.jsonl")).unwrap();
    let class = data.labels[1].clone();
    expect_ok(
        root,
        &["rank", "--config", "rank.json", "--class", &class, "--lambda", "0.6"],
    );
    for name in ["r.distill.csv", "r.guided.csv"] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        assert!(text.starts_with("rank,id,pseudo,true,observed\n"), "{name} header");
        assert!(text.lines().count() > 1, "{name} must rank at least one record");
    }
}
