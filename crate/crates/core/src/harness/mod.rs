//! Experiment configs, replica orchestration, persistence and plot-ready
//! output.

mod config;
mod output;
mod run;
mod selftest;

pub use config::{ExperimentConfig, ExperimentKind, ExperimentParams, ModelBlock, Overrides};
pub use output::{
    artifact_version, emit_summary, plot_columns, Cell, Check, Summary, Table, PLOT_FILE, RESULTS_FILE, SUMMARY_FILE,
};
pub use run::{execute, run, ExperimentOutput, RunOutcome};
pub use selftest::selftest;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "GAUSSLOC_WORKERS";

/// Exit status for a failed assertion.
pub const EXIT_ASSERTION: i32 = 1;
/// Exit status for invalid configs or arguments.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status when an exact engine refuses an instance.
pub const EXIT_BUDGET: i32 = 3;
/// Exit status for I/O and internal failures.
pub const EXIT_OTHER: i32 = 4;

pub fn exit_code(e: &crate::Error) -> i32 {
    use crate::Error::*;
    match e {
        Encoding(_) | DimensionMismatch { .. } | InvalidParameter(_) | Precondition(_) | Unsupported(_) | Config { .. } => {
            EXIT_VALIDATION
        }
        BudgetExceeded(_) => EXIT_BUDGET,
        Internal(_) | Serialization(_) | Io(_) => EXIT_OTHER,
    }
}

/// Size the global worker pool from [`WORKERS_ENV`] if it is set.
pub fn init_workers() -> crate::Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| crate::Error::config(WORKERS_ENV, format!("expected a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(crate::Error::config(WORKERS_ENV, "must be >= 1"));
        }
        // A pool that already exists keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
