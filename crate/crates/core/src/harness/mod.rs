//! Multi-trial experiments on drifting least squares, their CSV and SVG
//! artifacts, and the command-line front end.

mod cli;
mod config;
mod csv;
mod experiment;
mod svg;

use std::path::PathBuf;

use thiserror::Error;

use crate::bounds::BoundError;
use crate::dual::AdError;
use crate::optim::OptimError;
use crate::problems::ProblemError;

pub use cli::{cli_main, run_cli, EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK};
pub use config::{ExperimentConfig, Mode, StepChoice};
pub use csv::{format_sig17, parse_csv, read_csv, write_csv, CSV_HEADER};
pub use experiment::{
    bound_table, run_diagnostics, run_experiment, run_experiment_report, AggregateRow, AggregateTrace, BoundTableRow,
    DiagReport, ExperimentReport, RunSummary,
};
pub use svg::{render_svg, svg_document, SVG_HEIGHT, SVG_WIDTH};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("mode `{0}` does not produce an aggregate trace")]
    Unsupported(Mode),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed trace: {0}")]
    Parse(String),
    #[error("cannot render: {0}")]
    Render(String),
}

impl HarnessError {
    pub fn config(field: &str, message: String) -> Self {
        HarnessError::Config { field: field.to_string(), message }
    }

    /// Whether the failure is a numerical blow-up rather than bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(self, HarnessError::Optim(OptimError::Diverged { .. } | OptimError::NonFinite { .. }))
    }
}
