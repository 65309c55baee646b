use thiserror::Error;

use crate::state::Dims;

/// Errors raised by the reconstruction pipeline and its building blocks.
///
/// The algorithm-level variants (everything except [`Error::Index`],
/// [`Error::Contract`] and [`Error::Numerical`]) mean the inputs are not the
/// marginals of a single generic pure state.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index ({i}, {j}, {k}) out of range for dims {dims}")]
    Index { i: usize, j: usize, k: usize, dims: Dims },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("spectrum mismatch: {0}")]
    SpectrumMismatch(String),

    #[error("genericity violation: {0}")]
    GenericityViolation(String),

    #[error("phase graph disconnected: {unreached} of {nodes} phase unknowns unreachable from the root")]
    PhaseGraphDisconnected { unreached: usize, nodes: usize },

    #[error("phase constraints inconsistent: residual {residual:.3e} exceeds {tol:.3e}")]
    PhaseInconsistency { residual: f64, tol: f64 },

    #[error("eigenvector expansion leaks {deficit:.3e} of its squared norm outside the retained product basis")]
    ExpansionLeakage { deficit: f64 },

    #[error("marginals disagree: {what} residual {residual:.3e} exceeds {tol:.3e}")]
    MarginalInconsistency { what: &'static str, residual: f64, tol: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable name used in reports and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Index { .. } => "IndexError",
            Error::Contract(_) => "ContractError",
            Error::Numerical(_) => "NumericalError",
            Error::SpectrumMismatch(_) => "SpectrumMismatch",
            Error::GenericityViolation(_) => "GenericityViolation",
            Error::PhaseGraphDisconnected { .. } => "PhaseGraphDisconnected",
            Error::PhaseInconsistency { .. } => "PhaseInconsistency",
            Error::ExpansionLeakage { .. } => "ExpansionLeakage",
            Error::MarginalInconsistency { .. } => "MarginalInconsistency",
        }
    }

    /// True for failures that say something about the inputs' consistency or
    /// genericity rather than about how the library was called.
    pub fn is_algorithmic(&self) -> bool {
        !matches!(self, Error::Index { .. } | Error::Contract(_) | Error::Numerical(_))
    }
}
