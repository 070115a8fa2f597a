//! Table emission: per-domain accuracy ± std with fairness, and the
//! per-task forgetting/overall-accuracy table, in csv, markdown or json.
//! Values are rounded to 3 decimals; markdown bolds the best value per
//! comparable column when several methods appear together.

use crate::error::{Error, Result};
use crate::harness::run::{write_json, ResultBundle};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Markdown,
    Json,
}

impl TableFormat {
    pub fn parse(s: &str) -> Result<TableFormat> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::Config(format!("unknown format '{other}' (csv|md|json)"))),
        }
    }
}

pub fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

pub fn fmt3(v: f64) -> String {
    format!("{:.3}", v)
}

fn mean_std_cell(mean: f64, std: f64) -> String {
    format!("{}±{}", fmt3(mean), fmt3(std))
}

/// Emit the tables for one bundle into `out_dir`. Refuses partial bundles,
/// listing the missing cells.
pub fn emit_tables(
    bundle: &ResultBundle,
    format: TableFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let missing = bundle.completeness_errors();
    if !missing.is_empty() {
        return Err(Error::Input(format!(
            "bundle is incomplete; missing: {}",
            missing.join("; ")
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    match format {
        TableFormat::Json => {
            let path = out_dir.join("results.json");
            write_json(&path, bundle)?;
            written.push(path);
        }
        TableFormat::Csv => {
            let path = out_dir.join("accuracy_fairness.csv");
            std::fs::write(&path, accuracy_table(bundle, ","))?;
            written.push(path);
            if bundle.per_seed.iter().any(|s| s.matrix.is_some()) {
                let path = out_dir.join("cf_overall.csv");
                std::fs::write(&path, cf_table(bundle, ","))?;
                written.push(path);
            }
        }
        TableFormat::Markdown => {
            let path = out_dir.join("accuracy_fairness.md");
            std::fs::write(&path, markdown_table(&accuracy_rows(bundle)))?;
            written.push(path);
            if bundle.per_seed.iter().any(|s| s.matrix.is_some()) {
                let path = out_dir.join("cf_overall.md");
                std::fs::write(&path, markdown_table(&cf_rows(bundle)))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn accuracy_rows(bundle: &ResultBundle) -> Vec<Vec<String>> {
    let mut header = vec!["method".to_string()];
    header.extend(bundle.task_names.iter().cloned());
    header.push("fairness".into());
    header.push("config_hash".into());

    let mut row = vec![bundle.method.name().to_string()];
    for name in &bundle.task_names {
        row.push(mean_std_cell(
            bundle.summary.domain_acc_mean[name],
            bundle.summary.domain_acc_std[name],
        ));
    }
    row.push(mean_std_cell(bundle.summary.fairness_mean, bundle.summary.fairness_std));
    row.push(bundle.config_hash.clone());
    vec![header, row]
}

fn cf_rows(bundle: &ResultBundle) -> Vec<Vec<String>> {
    let mut header = vec!["method".to_string()];
    for (i, name) in bundle.task_names.iter().enumerate() {
        header.push(format!("task{} ({name}) acc", i + 1));
        header.push(format!("task{} ({name}) cf", i + 1));
    }
    let mut row = vec![bundle.method.name().to_string()];
    for i in 0..bundle.task_names.len() {
        row.push(fmt3(bundle.summary.overall_mean[i]));
        row.push(match bundle.summary.cf_mean[i] {
            Some(v) => fmt3(v),
            None => "X".to_string(),
        });
    }
    vec![header, row]
}

fn accuracy_table(bundle: &ResultBundle, sep: &str) -> String {
    accuracy_rows(bundle).iter().map(|r| r.join(sep)).collect::<Vec<_>>().join("\n") + "\n"
}

fn cf_table(bundle: &ResultBundle, sep: &str) -> String {
    cf_rows(bundle).iter().map(|r| r.join(sep)).collect::<Vec<_>>().join("\n") + "\n"
}

/// Render rows (first row is the header) as a markdown table, bolding the
/// best numeric value per column when more than one data row is present.
pub fn markdown_table(rows: &[Vec<String>]) -> String {
    if rows.is_empty() {
        return String::new();
    }
    let header = &rows[0];
    let data = &rows[1..];
    let n_cols = header.len();

    // Best per column: the highest leading numeric value.
    let mut best: Vec<Option<usize>> = vec![None; n_cols];
    if data.len() > 1 {
        for col in 0..n_cols {
            let mut best_val = f64::NEG_INFINITY;
            for (r, row) in data.iter().enumerate() {
                if let Some(v) = leading_number(&row[col]) {
                    if v > best_val {
                        best_val = v;
                        best[col] = Some(r);
                    }
                }
            }
        }
    }

    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!("|{}\n", " --- |".repeat(n_cols)));
    for (r, row) in data.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if best[c] == Some(r) {
                    format!("**{cell}**")
                } else {
                    cell.clone()
                }
            })
            .collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

fn leading_number(cell: &str) -> Option<f64> {
    let prefix: String = cell
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.' || *c == '-')
        .collect();
    prefix.parse().ok()
}
