//! Experiment orchestration: configuration, table and figure reproduction.

mod config;
mod figures;
mod tables;

pub use config::{
    ExperimentConfig, Format, LimitConfig, Model, OutputConfig, ReferenceValue, SimConfig,
    DEFAULT_SEED, SEED_ENV,
};
pub use figures::{run_figures, FIG2_LOSS_RATE, FIG2_STARTS, FIG3_STARTS};
pub use tables::{run_tables, write_tables_csv, write_tables_md, Cell, CellValue, ResultRow};
