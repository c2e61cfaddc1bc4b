//! Experiment orchestration: instrumented training runs, the equal-β
//! diagnostic, grid search, statistics, and CSV/SVG reporting.
//!
//! Everything here is deterministic per seed: a run is a pure function of its
//! [`training::RunSpec`] and the datasets, so any result in a trace file can
//! be regenerated exactly. Multi-seed experiments fan out over independent
//! runs (optionally on threads) and aggregate with seed-order-independent
//! statistics.

pub mod beta;
pub mod config;
pub mod grid;
pub mod plot;
pub mod presets;
pub mod stats;
pub mod trace;
pub mod training;

use thiserror::Error;

use crate::autograd::AutogradError;
use crate::commentaries::CommentariesError;
use crate::curricula::CurriculaError;
use crate::datasets::DatasetError;
use crate::optim::OptimError;

pub use beta::{beta_diagnostic, BetaDiagnostic, BetaSetting, GapReport};
pub use config::{CurriculumSpec, DataSource, ExperimentConfig, ResolvedExperiment};
pub use grid::{grid_search, split_for_selection, GridCandidate, GridOutcome, GridRow, GridSpace};
pub use plot::{emit_plot, PlotSeries};
pub use stats::{least_squares_slope, summarize, welch_t_test, SampleSummary, WelchReport};
pub use trace::{read_trace_csv, steps_to_convergence, write_trace_csv, TraceRow};
pub use training::{train_run, train_runs, AbortInfo, CurriculumSource, RunResult, RunSpec};

/// Root directory for artifacts (trace CSVs, summaries, plots).
///
/// Reads the `CURRLAB_OUT` environment variable; when unset or empty the
/// default is `currlab-out` under the current working directory. Callers are
/// expected to create subdirectories as needed — this only names the root.
pub fn out_dir() -> std::path::PathBuf {
    match std::env::var("CURRLAB_OUT") {
        Ok(dir) if !dir.is_empty() => std::path::PathBuf::from(dir),
        _ => std::path::PathBuf::from("currlab-out"),
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("config file {path}: {detail}")]
    ConfigFile { path: String, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("trace file {path}, line {line}: {reason}")]
    MalformedTrace {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("grid search space is empty: {0}")]
    EmptyGrid(&'static str),
    #[error(transparent)]
    Autograd(#[from] AutogradError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Curricula(#[from] CurriculaError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Commentaries(#[from] CommentariesError),
}
