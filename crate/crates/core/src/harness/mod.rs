//! Config-driven experiment orchestration: method x attribute x ordering
//! x seed runs, aggregation, table emission and grid sweeps.

pub mod config;
pub mod presets;
pub mod run;
pub mod sweep;
pub mod tables;

pub use config::{DatasetSource, ExperimentConfig, Method};
pub use run::{run_and_save, run_experiment, ResultBundle, SeedResult, Summary};
pub use sweep::{expand_grid, load_grid, sweep, GridFile, SweepIndex};
pub use tables::{emit_tables, TableFormat};
