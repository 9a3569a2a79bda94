//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by scene loading, numerical solvers, and the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("scene file {path}: {message}")]
    SceneFormat { path: PathBuf, message: String },

    #[error("scene validation: {0}")]
    SceneInvalid(String),

    #[error("weather file {path}: {message}")]
    WeatherFormat { path: PathBuf, message: String },

    #[error("results file {path}: {message}")]
    ResultsFormat { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("view factor row {row} sums to {sum:.6}, exceeds 1 beyond tolerance; \
             geometry or quadrature is misconfigured")]
    ViewFactorRowSum { row: usize, sum: f64 },

    #[error("view factor cache {path}: {message}")]
    ViewFactorCache { path: PathBuf, message: String },

    #[error("radiosity problem: {0}")]
    Radiosity(String),

    #[error(
        "fixed point did not converge at t = {time} s after {iterations} iterations \
         ({loop_name} loop, final residual {final_residual:.3e}, threshold {threshold:.3e})"
    )]
    FixedPointDiverged {
        loop_name: &'static str,
        time: f64,
        iterations: u32,
        final_residual: f64,
        threshold: f64,
        residual_history: Vec<f64>,
    },

    #[error("oracle self-check failed: {0}")]
    OracleSelfCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
