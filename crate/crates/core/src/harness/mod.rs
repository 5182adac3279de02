//! Dataset and configuration I/O, the simulation grid, overlap curves and
//! the verification suite.

mod config;
mod curve;
mod dataset;
mod grid;
mod report;
mod verify;

pub use config::{ExperimentConfig, ModelSpec, Setting};
pub use curve::{b_of_w, run_overlap_curve, CurveMethod, CurvePoint, OverlapCurve};
pub use dataset::{load_dataset_csv, parse_dataset_csv, CsvSchema};
pub use grid::{
    estimate_dataset, run_simulation_grid, run_simulation_runs, score_label, thread_pool, Nuisance, RunRecord,
    COVARIATE_LABEL,
};
pub use report::{write_atomically, CellRecord, ErrorMetrics, ExperimentReport, ReportFormat, CSV_COLUMNS};
pub use verify::{run_verification_suite, run_verification_suite_with, CheckResult, VerificationReport, VerifyConfig};
