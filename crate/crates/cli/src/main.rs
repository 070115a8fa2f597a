//! Command-line runner: synthetic dataset generation, single experiment
//! runs, grid sweeps and table emission.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
//! failure.

use clap::{Args, Parser, Subcommand};
use fairshift_core::data::{generate_synthetic, save_manifest, SyntheticSpec};
use fairshift_core::harness::run::run_dir;
use fairshift_core::harness::{
    emit_tables, load_grid, run_and_save, sweep, ExperimentConfig, ResultBundle, TableFormat,
};
use fairshift_core::{Error, Result};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "fairshift",
    about = "Domain-incremental continual learning and bias-mitigation experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Table format: csv, md or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic biased dataset manifest from a spec file.
    Generate {
        /// Synthetic spec JSON path, or a preset name (two-domain,
        /// three-domain-imbalanced).
        #[arg(long)]
        config: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Manifest base name.
        #[arg(long, default_value = "synthetic")]
        name: String,
    },
    /// Run one experiment config over its seeds and emit tables.
    Run {
        /// Experiment config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed list.
        #[arg(long, num_args = 1.., value_name = "N")]
        seed: Vec<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run every cell of a sweep grid file.
    Sweep {
        /// Grid JSON: {"base": <experiment config>, "cells": [{"name", "overrides"}]}.
        #[arg(long)]
        config: PathBuf,
        /// Parallel worker count.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-emit tables from a stored results.json bundle (or a directory
    /// containing one).
    Report {
        /// Bundle file or directory.
        #[arg(long)]
        bundle: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { config, out, name } => generate(&config, &out, &name),
        Command::Run { config, seed, output } => run(&config, &seed, &output),
        Command::Sweep { config, workers, output } => run_sweep(&config, workers, &output),
        Command::Report { bundle, output } => report(&bundle, &output),
    }
}

fn generate(config: &str, out: &Path, name: &str) -> Result<()> {
    let spec: SyntheticSpec = if Path::new(config).exists() {
        let text = std::fs::read_to_string(config)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad synthetic spec: {e}")))?
    } else {
        fairshift_core::harness::DatasetSource::preset_spec(config)?
    };
    let manifest = generate_synthetic(&spec)?;
    let path = save_manifest(&manifest, out, name)?;
    println!("wrote {} ({} rows)", path.display(), manifest.rows.len());
    Ok(())
}

fn run(config: &Path, seed_override: &[u64], output: &OutputArgs) -> Result<()> {
    let format = TableFormat::parse(&output.format)?;
    let text = std::fs::read_to_string(config)
        .map_err(|e| Error::Input(format!("cannot read config '{}': {e}", config.display())))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("bad experiment config: {e}")))?;
    if !seed_override.is_empty() {
        cfg.seeds = seed_override.to_vec();
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(output.out.clone());
    }
    let (bundle, results_path) = run_and_save(&cfg)?;
    let table_dir = run_dir(&cfg).expect("output dir set");
    let files = emit_tables(&bundle, format, &table_dir)?;
    if let Some(p) = results_path {
        println!("results: {}", p.display());
    }
    for f in files {
        println!("table: {}", f.display());
    }
    println!(
        "method {} fairness {:.3} mean accuracy {:.3}",
        bundle.method.name(),
        bundle.summary.fairness_mean,
        bundle.summary.mean_accuracy
    );
    Ok(())
}

fn run_sweep(config: &Path, workers: usize, output: &OutputArgs) -> Result<()> {
    let format = TableFormat::parse(&output.format)?;
    let cells = load_grid(config)?;
    let n = cells.len();
    let index = sweep(cells, workers, &output.out, format)?;
    let failed: Vec<&str> =
        index.cells.iter().filter(|c| !c.ok).map(|c| c.name.as_str()).collect();
    println!(
        "sweep: {}/{} cells ok; summary at {}",
        n - failed.len(),
        n,
        output.out.join("summary.json").display()
    );
    if let Some(best) = index.by_fairness.first() {
        println!("best fairness: {best}");
    }
    if !failed.is_empty() {
        eprintln!("failed cells: {}", failed.join(", "));
    }
    Ok(())
}

fn report(bundle_path: &Path, output: &OutputArgs) -> Result<()> {
    let format = TableFormat::parse(&output.format)?;
    let file = if bundle_path.is_dir() {
        bundle_path.join("results.json")
    } else {
        bundle_path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file)
        .map_err(|e| Error::Input(format!("cannot read bundle '{}': {e}", file.display())))?;
    let bundle: ResultBundle = serde_json::from_str(&text)
        .map_err(|e| Error::Input(format!("bad bundle: {e}")))?;
    let files = emit_tables(&bundle, format, &output.out)?;
    for f in files {
        println!("table: {}", f.display());
    }
    Ok(())
}
