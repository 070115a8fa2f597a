//! Grid sweeps: a base config plus named override cells, run in parallel
//! with per-cell outputs and a summary ranking by fairness and accuracy.

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::run::{write_json, ResultBundle};
use crate::harness::tables::{emit_tables, fmt3, markdown_table, TableFormat};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

/// Grid file: a base experiment config (JSON object) and one override
/// object per cell; overrides deep-merge into the base.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFile {
    pub base: serde_json::Value,
    pub cells: Vec<GridCell>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub name: String,
    #[serde(default)]
    pub overrides: serde_json::Value,
}

/// Objects merge per key (recursively); everything else is replaced.
pub fn deep_merge(base: &serde_json::Value, overrides: &serde_json::Value) -> serde_json::Value {
    match (base, overrides) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            let mut merged = b.clone();
            for (k, v) in o {
                let entry = merged.entry(k.clone()).or_insert(serde_json::Value::Null);
                *entry = deep_merge(entry, v);
            }
            serde_json::Value::Object(merged)
        }
        (_, other) => other.clone(),
    }
}

/// Expand a grid file into named experiment configs.
pub fn expand_grid(grid: &GridFile) -> Result<Vec<(String, ExperimentConfig)>> {
    if grid.cells.is_empty() {
        return Err(Error::Config("sweep grid has no cells".into()));
    }
    let mut cells = Vec::with_capacity(grid.cells.len());
    let mut seen = std::collections::BTreeSet::new();
    for cell in &grid.cells {
        if !seen.insert(cell.name.clone()) {
            return Err(Error::Config(format!("duplicate cell name '{}'", cell.name)));
        }
        let merged = deep_merge(&grid.base, &cell.overrides);
        let cfg: ExperimentConfig = serde_json::from_value(merged).map_err(|e| {
            Error::Config(format!("cell '{}' does not form a valid config: {e}", cell.name))
        })?;
        cfg.validate()
            .map_err(|e| Error::Config(format!("cell '{}': {e}", cell.name)))?;
        cells.push((cell.name.clone(), cfg));
    }
    Ok(cells)
}

pub fn load_grid(path: &Path) -> Result<Vec<(String, ExperimentConfig)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read grid '{}': {e}", path.display())))?;
    let grid: GridFile = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("bad grid file: {e}")))?;
    expand_grid(&grid)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellOutcome {
    pub name: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fairness_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepIndex {
    pub cells: Vec<CellOutcome>,
    /// Cell names ranked by mean fairness, best first.
    pub by_fairness: Vec<String>,
    /// Cell names ranked by mean accuracy, best first.
    pub by_accuracy: Vec<String>,
}

/// Run every cell (failures recorded, sweep continues), write per-cell
/// bundles + tables under out_dir/<cell>/ and a ranked summary.
pub fn sweep(
    cells: Vec<(String, ExperimentConfig)>,
    workers: usize,
    out_dir: &Path,
    format: TableFormat,
) -> Result<SweepIndex> {
    std::fs::create_dir_all(out_dir)?;
    let queue: Mutex<VecDeque<(usize, String, ExperimentConfig)>> = Mutex::new(
        cells.into_iter().enumerate().map(|(i, (n, c))| (i, n, c)).collect(),
    );
    let n_cells = queue.lock().unwrap().len();
    let results: Mutex<Vec<Option<CellOutcome>>> = Mutex::new(vec![None; n_cells]);

    let workers = workers.max(1).min(n_cells);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop_front();
                let Some((idx, name, cfg)) = job else { break };
                let outcome = run_cell(&name, &cfg, out_dir, format);
                results.lock().unwrap()[idx] = Some(outcome);
            });
        }
    });

    let cells: Vec<CellOutcome> =
        results.into_inner().unwrap().into_iter().map(|o| o.expect("all cells ran")).collect();

    let mut by_fairness: Vec<&CellOutcome> =
        cells.iter().filter(|c| c.fairness_mean.is_some()).collect();
    by_fairness.sort_by(|a, b| {
        b.fairness_mean.partial_cmp(&a.fairness_mean).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut by_accuracy: Vec<&CellOutcome> =
        cells.iter().filter(|c| c.mean_accuracy.is_some()).collect();
    by_accuracy.sort_by(|a, b| {
        b.mean_accuracy.partial_cmp(&a.mean_accuracy).unwrap_or(std::cmp::Ordering::Equal)
    });

    let index = SweepIndex {
        by_fairness: by_fairness.iter().map(|c| c.name.clone()).collect(),
        by_accuracy: by_accuracy.iter().map(|c| c.name.clone()).collect(),
        cells,
    };
    write_json(&out_dir.join("summary.json"), &index)?;
    std::fs::write(out_dir.join("summary.md"), summary_markdown(&index))?;
    Ok(index)
}

fn run_cell(
    name: &str,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    format: TableFormat,
) -> CellOutcome {
    let cell_dir = out_dir.join(name);
    match run_cell_inner(cfg, &cell_dir, format) {
        Ok(bundle) => CellOutcome {
            name: name.to_string(),
            ok: true,
            error: None,
            fairness_mean: Some(bundle.summary.fairness_mean),
            mean_accuracy: Some(bundle.summary.mean_accuracy),
        },
        Err(e) => {
            log::error!("sweep cell '{name}' failed: {e}");
            CellOutcome {
                name: name.to_string(),
                ok: false,
                error: Some(e.to_string()),
                fairness_mean: None,
                mean_accuracy: None,
            }
        }
    }
}

fn run_cell_inner(
    cfg: &ExperimentConfig,
    cell_dir: &Path,
    format: TableFormat,
) -> Result<ResultBundle> {
    let mut cfg = cfg.clone();
    cfg.output_dir = Some(cell_dir.to_path_buf());
    let (bundle, _) = crate::harness::run::run_and_save(&cfg)?;
    let table_dir = crate::harness::run::run_dir(&cfg).expect("output dir set");
    emit_tables(&bundle, format, &table_dir)?;
    Ok(bundle)
}

fn summary_markdown(index: &SweepIndex) -> String {
    let mut rows = vec![vec![
        "cell".to_string(),
        "fairness".to_string(),
        "mean accuracy".to_string(),
        "status".to_string(),
    ]];
    for c in &index.cells {
        rows.push(vec![
            c.name.clone(),
            c.fairness_mean.map(fmt3).unwrap_or_else(|| "-".into()),
            c.mean_accuracy.map(fmt3).unwrap_or_else(|| "-".into()),
            if c.ok { "ok".into() } else { c.error.clone().unwrap_or_else(|| "failed".into()) },
        ]);
    }
    let mut out = markdown_table(&rows);
    if let Some(best) = index.by_fairness.first() {
        out.push_str(&format!("\nBest fairness: **{best}**\n"));
    }
    if let Some(best) = index.by_accuracy.first() {
        out.push_str(&format!("Best mean accuracy: **{best}**\n"));
    }
    out
}
