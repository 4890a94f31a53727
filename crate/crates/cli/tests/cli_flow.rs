//! End-to-end runs of the installed binary: subcommand plumbing, exit codes,
//! cache reuse, and the comparison table.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prge_core::graph::save_graph;
use prge_core::synth::{echo_graph, EchoGraphConfig};

fn prge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prge"))
}

fn write_dataset(dir: &Path) -> PathBuf {
    let path = dir.join("synth.tsv");
    let graph = echo_graph(&EchoGraphConfig {
        seed: 9,
        ..Default::default()
    });
    save_graph(&graph, &path).unwrap();
    path
}

fn assert_success(output: &Output, what: &str) {
    assert!(
        output.status.success(),
        "{what} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn help_exists_for_every_subcommand() {
    for sub in [
        "impute", "score", "train", "evaluate", "classify", "pipeline", "compare",
    ] {
        let output = prge().args([sub, "--help"]).output().unwrap();
        assert_success(&output, sub);
    }
}

#[test]
fn stagewise_flow_matches_pipeline_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = write_dataset(dir.path());
    let noisy = dir.path().join("noisy.tsv");
    let labels = dir.path().join("noisy.labels");
    let scores = dir.path().join("scores.tsv");
    let model = dir.path().join("model.bin");
    let report = dir.path().join("report.kv");

    let output = prge()
        .args(["impute", "--in"])
        .arg(&dataset)
        .args([
            "--ratio",
            "0.1",
            "--protocol",
            "random",
            "--seed",
            "5",
            "--out",
        ])
        .arg(&noisy)
        .arg("--labels")
        .arg(&labels)
        .output()
        .unwrap();
    assert_success(&output, "impute");

    let output = prge()
        .args(["score", "--in"])
        .arg(&noisy)
        .args([
            "--max-len",
            "2",
            "--features-per-relation",
            "50",
            "--neg-ratio",
            "2",
            "--seed",
            "5",
            "--out",
        ])
        .arg(&scores)
        .output()
        .unwrap();
    assert_success(&output, "score");

    let output = prge()
        .args(["train", "--in"])
        .arg(&noisy)
        .arg("--scores")
        .arg(&scores)
        .args([
            "--dim", "16", "--lambda", "5", "--epochs", "30", "--lr", "0.01", "--seed", "5",
            "--out",
        ])
        .arg(&model)
        .output()
        .unwrap();
    assert_success(&output, "train");

    let output = prge()
        .args(["evaluate", "--model"])
        .arg(&model)
        .arg("--graph")
        .arg(&noisy)
        .arg("--labels")
        .arg(&labels)
        .arg("--out")
        .arg(&report)
        .args([
            "--dataset",
            "synth",
            "--method",
            "prge",
            "--ratio",
            "0.1",
            "--seed",
            "5",
        ])
        .output()
        .unwrap();
    assert_success(&output, "evaluate");

    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("fmr\t"), "{text}");
    assert!(text.contains("auc\t"), "{text}");

    // same cell through the pipeline produces the same report body
    let out_dir = dir.path().join("run");
    let output = prge()
        .args(["pipeline", "--dataset"])
        .arg(&dataset)
        .args([
            "--ratios",
            "0.1",
            "--methods",
            "prge",
            "--seed",
            "5",
            "--epochs",
            "30",
            "--dim",
            "16",
            "--out-dir",
        ])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_success(&output, "pipeline");
    let pipeline_report = std::fs::read_to_string(out_dir.join("noise10/prge/report.kv")).unwrap();
    assert_eq!(pipeline_report, text);
}

#[test]
fn full_grid_writes_reports_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = write_dataset(dir.path());
    let out_dir = dir.path().join("grid");
    let output = prge()
        .args(["pipeline", "--dataset"])
        .arg(&dataset)
        .args([
            "--ratios",
            "0.1,0.2,0.4",
            "--methods",
            "transe,prge",
            "--seed",
            "3",
            "--epochs",
            "20",
            "--dim",
            "8",
            "--out-dir",
        ])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_success(&output, "pipeline grid");

    let mut reports = Vec::new();
    for ratio in ["noise10", "noise20", "noise40"] {
        for method in ["transe", "prge"] {
            let p = out_dir.join(ratio).join(method).join("report.kv");
            assert!(p.exists(), "missing {}", p.display());
            reports.push(p);
        }
        // one shared noisy graph per ratio
        assert!(out_dir.join(ratio).join("noisy.tsv").exists());
    }
    assert!(out_dir.join("comparison.txt").exists());
    assert!(out_dir.join("comparison.tsv").exists());
    assert!(out_dir.join("manifest.json").exists());

    let table = std::fs::read_to_string(out_dir.join("comparison.txt")).unwrap();
    assert!(table.contains("transe"), "{table}");
    assert!(table.contains("prge"), "{table}");
    assert!(table.contains('*'), "best flags missing: {table}");

    // standalone compare over the produced reports agrees
    let compare_out = dir.path().join("cmp");
    let output = prge()
        .arg("compare")
        .args(&reports)
        .arg("--out")
        .arg(&compare_out)
        .output()
        .unwrap();
    assert_success(&output, "compare");
    assert_eq!(
        std::fs::read_to_string(compare_out.with_extension("txt")).unwrap(),
        table
    );
}

#[test]
fn config_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "dataset = /does/not/exist.tsv\n").unwrap();
    let output = prge()
        .args(["pipeline", "--config"])
        .arg(&conf)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));

    let conf2 = dir.path().join("bad2.conf");
    std::fs::write(&conf2, "unknown_key = 3\n").unwrap();
    let output = prge()
        .args(["pipeline", "--config"])
        .arg(&conf2)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn partial_cell_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // one relation with a single pair: same-relation corruption is
    // unsatisfiable, so imputing at any ratio fails that ratio's cells
    let dataset = dir.path().join("tiny.tsv");
    std::fs::write(&dataset, "a\tR\tb\n").unwrap();
    let out_dir = dir.path().join("run");
    let output = prge()
        .args(["pipeline", "--dataset"])
        .arg(&dataset)
        .args([
            "--ratios",
            "1.0",
            "--methods",
            "transe",
            "--protocol",
            "same-relation",
            "--epochs",
            "5",
            "--dim",
            "4",
            "--out-dir",
        ])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    // the failure is recorded in the manifest
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"error\""), "{manifest}");
    assert!(manifest.contains("no legal corruption"), "{manifest}");
}

#[test]
fn out_root_env_is_used_when_no_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = write_dataset(dir.path());
    let root = dir.path().join("root");
    let output = prge()
        .env("PRGE_OUT_ROOT", &root)
        .args(["pipeline", "--dataset"])
        .arg(&dataset)
        .args([
            "--ratios",
            "0.1",
            "--methods",
            "transe",
            "--epochs",
            "5",
            "--dim",
            "4",
        ])
        .output()
        .unwrap();
    assert_success(&output, "pipeline with env root");
    assert!(root.join("synth").join("manifest.json").exists());
}
