//! Batch front end for the reconstruction pipeline: configuration, data
//! ingestion, experiment orchestration and CSV/SVG/JSON emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod data;
pub mod svg;

use cauchy_core::kernel::KernelError;
use cauchy_core::oracle::OracleError;
use cauchy_core::solver::SolverError;
use cauchy_core::spectral::SpectralError;
use thiserror::Error;

pub use commands::Invocation;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical abort: {0}")]
    Abort(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Abort(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Parse { .. } | SpectralError::Io(_) => CliError::Input(e.to_string()),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        CliError::Config(vec![e.to_string()])
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::IllPosedBlowup { .. } | SolverError::NonFinite { .. } => {
                CliError::Abort(e.to_string())
            }
            SolverError::Spectral(inner) => inner.into(),
            SolverError::Kernel(inner) => inner.into(),
            SolverError::OutsideStrip { .. }
            | SolverError::InvalidSourceGrid { .. }
            | SolverError::GridMismatch => CliError::Input(e.to_string()),
            other => CliError::Config(vec![other.to_string()]),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Solver(inner) => inner.into(),
            OracleError::Spectral(inner) => inner.into(),
            OracleError::DegeneratePivot { .. } => CliError::Invariant(e.to_string()),
            other => CliError::Config(vec![other.to_string()]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let blowup: CliError = SolverError::IllPosedBlowup { flagged: 3, total: 4 }.into();
        assert_eq!(blowup.exit_code(), 3);
        assert!(blowup.to_string().contains("ill-posed blowup"));
        let missing: CliError = SpectralError::Parse {
            path: "g0.csv".into(),
            message: "missing".into(),
        }
        .into();
        assert_eq!(missing.exit_code(), 2);
        assert_eq!(CliError::Config(vec![]).exit_code(), 2);
        assert_eq!(CliError::Invariant(String::new()).exit_code(), 4);
    }
}
