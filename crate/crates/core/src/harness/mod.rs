//! Monte Carlo experiment driver: sweeps over SNR and sample complexity,
//! the Frobenius objective comparison, and result emission.

mod config;
mod emit;
mod sweep;
mod table;
pub mod verify;

pub use config::{ExperimentConfig, MatrixLabel, SoiSpec, Sweep};
pub use emit::{emit_frobenius, emit_results, results_csv, OutputFormat, CSV_HEADER};
pub use sweep::{
    build_matrix, prepare, run_complexity_sweep, run_snr_sweep, Aggregate, CellFailure, Prepared,
    ResultTable, TrialRecord,
};
pub use table::{run_frobenius_comparison, FrobeniusRow, FrobeniusTable};
