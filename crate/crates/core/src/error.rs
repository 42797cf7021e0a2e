use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} has shape {found:?} but {reference} requires {expected:?}")]
    ShapeMismatch {
        name: &'static str,
        found: (usize, usize),
        expected: (usize, usize),
        reference: &'static str,
    },

    #[error("{name} has {found} matrices, the grid has {expected} nodes")]
    ScheduleLength {
        name: &'static str,
        found: usize,
        expected: usize,
    },

    #[error("{name} has a non-finite entry at node {node}, position ({row}, {col})")]
    NonFinite {
        name: &'static str,
        node: usize,
        row: usize,
        col: usize,
    },

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("model failed validation: {}", .0.failures().join("; "))]
    Validation(ValidationReport),

    #[error("Σ(t) is singular at t = {time}: min eigenvalue {min_eigenvalue:e} below r_min {r_min:e}")]
    Singular {
        time: f64,
        min_eigenvalue: f64,
        r_min: f64,
    },

    #[error("{what} diverged at node {node} (t = {time}): {detail}")]
    Divergence {
        what: &'static str,
        node: usize,
        time: f64,
        detail: String,
    },

    #[error("iteration {iteration} is not monotone at node {node}: min eigenvalue of P_i - P_(i+1) is {min_eigenvalue:e}")]
    NotMonotone {
        iteration: usize,
        node: usize,
        min_eigenvalue: f64,
    },

    #[error("no convergence after {iterations} iterations, last residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Short machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. }
            | Error::ScheduleLength { .. }
            | Error::NonFinite { .. }
            | Error::Grid(_) => "structural",
            Error::Validation(_) => "validation",
            Error::Singular { .. } => "singular",
            Error::Divergence { .. } => "divergence",
            Error::NotMonotone { .. } => "internal_consistency",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Usage(_) => "usage",
        }
    }
}
