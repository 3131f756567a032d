//! Error type shared across the solver crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RteError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("point outside domain: {0}")]
    OutsideDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error(
        "contraction violated at collocation point {point}: \
         1 - a_pp * sigma_s = {divisor:.6e} <= 0; the cell size is too coarse \
         for this medium"
    )]
    ContractionViolated { point: usize, divisor: f64 },

    #[error(
        "time step {step} exceeds cell size {cell_size}: same-level coupling \
         is present; enable iterative (Jacobi) mode"
    )]
    NeedsIterativeMode { step: f64, cell_size: f64 },

    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, RteError>;
