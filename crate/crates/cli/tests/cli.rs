//! CLI behavior: subcommands, file outputs and exit codes (0 success,
//! 1 config error, 2 data error).

use fairshift_core::harness::presets::{preset_experiment, TWO_DOMAIN};
use fairshift_core::harness::Method;
use std::path::{Path, PathBuf};
use std::process::Output;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fairshift")
}

fn run_cli(args: &[&str]) -> Output {
    std::process::Command::new(bin()).args(args).output().expect("spawn fairshift")
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_fast_config(dir: &Path, method: Method) -> PathBuf {
    let mut cfg = preset_experiment(TWO_DOMAIN, method).unwrap();
    cfg.seeds = vec![0];
    cfg.epochs = 2;
    let path = dir.join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn generate_writes_a_loadable_manifest() {
    let dir = fresh_dir("fairshift_cli_generate");
    let out = run_cli(&[
        "generate",
        "--config",
        "two-domain",
        "--out",
        dir.to_str().unwrap(),
        "--name",
        "bench",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest_path = dir.join("bench.manifest");
    assert!(manifest_path.exists());
    assert!(dir.join("bench.data.bin").exists());
    let manifest = fairshift_core::data::load_manifest(&manifest_path).unwrap();
    assert_eq!(manifest.rows.len(), 360); // 2 domains x 4 classes x 45
}

#[test]
fn run_emits_results_and_tables() {
    let dir = fresh_dir("fairshift_cli_run");
    let cfg = write_fast_config(&dir, Method::Baseline);
    let out_dir = dir.join("out");
    let out = run_cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "md",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = out_dir.join("baseline/gender");
    assert!(run_dir.join("results.json").exists());
    assert!(run_dir.join("meta.json").exists());
    assert!(run_dir.join("accuracy_fairness.md").exists());
    assert!(run_dir.join("cf_overall.md").exists());
}

#[test]
fn seed_flag_overrides_config_seeds() {
    let dir = fresh_dir("fairshift_cli_seed");
    let cfg = write_fast_config(&dir, Method::Baseline);
    let out_dir = dir.join("out");
    let out = run_cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "7",
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bundle: fairshift_core::ResultBundle = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("baseline/gender/results.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(bundle.seeds, vec![5, 7]);
}

#[test]
fn report_reemits_tables_from_a_bundle() {
    let dir = fresh_dir("fairshift_cli_report");
    let cfg = write_fast_config(&dir, Method::Baseline);
    let out_dir = dir.join("out");
    assert!(run_cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "json"
    ])
    .status
    .success());
    let table_dir = dir.join("tables");
    let out = run_cli(&[
        "report",
        "--bundle",
        out_dir.join("baseline/gender").to_str().unwrap(),
        "--out",
        table_dir.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(table_dir.join("accuracy_fairness.csv").exists());
}

#[test]
fn sweep_runs_cells_and_writes_summary() {
    let dir = fresh_dir("fairshift_cli_sweep");
    let mut cfg = preset_experiment(TWO_DOMAIN, Method::Baseline).unwrap();
    cfg.seeds = vec![0];
    cfg.epochs = 1;
    let grid = serde_json::json!({
        "base": serde_json::to_value(&cfg).unwrap(),
        "cells": [
            {"name": "one-epoch", "overrides": {}},
            {"name": "two-epochs", "overrides": {"epochs": 2}},
        ]
    });
    let grid_path = dir.join("grid.json");
    std::fs::write(&grid_path, serde_json::to_string_pretty(&grid).unwrap()).unwrap();
    let out_dir = dir.join("out");
    let out = run_cli(&[
        "sweep",
        "--config",
        grid_path.to_str().unwrap(),
        "--workers",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary.json").exists());
    assert!(out_dir.join("summary.md").exists());
    assert!(out_dir.join("one-epoch/baseline/gender/results.json").exists());
    assert!(out_dir.join("two-epochs/baseline/gender/results.json").exists());
}

#[test]
fn config_errors_exit_1() {
    let dir = fresh_dir("fairshift_cli_exit1");
    // ewc method without a strategy config
    let mut cfg = preset_experiment(TWO_DOMAIN, Method::Ewc).unwrap();
    cfg.strategy = None;
    let path = dir.join("bad.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = run_cli(&["run", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn data_errors_exit_2() {
    let dir = fresh_dir("fairshift_cli_exit2");
    let out = run_cli(&[
        "run",
        "--config",
        dir.join("does_not_exist.json").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_preset_exits_1() {
    let dir = fresh_dir("fairshift_cli_exit1b");
    let out = run_cli(&[
        "generate",
        "--config",
        "no-such-preset",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

// The shipped example configs stay parseable and valid.
#[test]
fn shipped_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in [
        "two_domain_ewc.json",
        "three_domain_nr.json",
        "three_domain_offline.json",
        "faces_gender_ewc.json",
    ] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        let cfg: fairshift_core::ExperimentConfig =
            serde_json::from_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let grid_text = std::fs::read_to_string(root.join("ewc_lambda_grid.json")).unwrap();
    let grid: fairshift_core::harness::GridFile = serde_json::from_str(&grid_text).unwrap();
    let cells = fairshift_core::harness::expand_grid(&grid).unwrap();
    assert_eq!(cells.len(), 3);
}

#[test]
fn generate_accepts_a_spec_file() {
    let dir = fresh_dir("fairshift_cli_genspec");
    let spec = serde_json::json!({
        "num_classes": 3,
        "num_domains": 2,
        "counts": [[8, 8, 8], [8, 8, 8]],
        "domain_shift": 0.3,
        "class_separation": 0.2,
        "noise": 0.05,
        "image_size": [6, 6, 1],
        "seed": 12
    });
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    let out = run_cli(&[
        "generate",
        "--config",
        spec_path.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--name",
        "custom",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fairshift_core::data::load_manifest(&dir.join("custom.manifest")).unwrap();
    assert_eq!(manifest.rows.len(), 48);
    assert_eq!(manifest.image_shape, Some([6, 6, 1]));
}
