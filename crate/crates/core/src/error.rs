use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A distance below the 1 m reference distance of the path-loss model.
    #[error("distance {distance} m is below the reference distance of 1 m")]
    BelowReferenceDistance { distance: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid pilot allocation: {0}")]
    InvalidAllocation(String),

    /// The refined allocation has a non-positive radicand for IRS `irs`.
    #[error("refined allocation degenerates at IRS {irs}: radicand {radicand} <= 0")]
    RadicandNonPositive { irs: usize, radicand: f64 },

    #[error("exact solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("oracle problem is intractable: {0}")]
    Intractable(String),

    #[error("IRS mask selects no surface")]
    EmptyMask,

    #[error("unknown experiment `{0}` (expected one of fig4, fig6, fig7, fig8, fig9, fig10, fig12, fig13)")]
    UnknownExperiment(String),

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
