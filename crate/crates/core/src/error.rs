//! Crate-wide error type.

use thiserror::Error;

use crate::equilibrium::EquilibriumResult;

/// Errors produced by grid construction, model evaluation, the dynamic
/// programming engine, and the equilibrium solver.
#[derive(Debug, Error)]
pub enum Error {
    /// A grid constructor was given malformed data.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Model parameters fail their sign or finiteness constraints.
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    /// A discrete measure has negative weights or does not sum to one.
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// A solver or simulation configuration is unusable.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A tabulated utility was evaluated outside its support.
    #[error("utility table evaluated at {x} outside its support [{lo}, {hi}]")]
    UtilityOutsideSupport { x: f64, lo: f64, hi: f64 },

    /// A terminal utility is not finite on some wealth node.
    #[error("terminal utility is not finite at wealth {x}")]
    UtilityNotFinite { x: f64 },

    /// A flow's length disagrees with the time grid.
    #[error("flow has {got} entries but the time grid has {expected} steps")]
    FlowLength { expected: usize, got: usize },

    /// A table's shape disagrees with the grids it is used with.
    #[error("table shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The largest one-step drift would skip over too much of the wealth
    /// grid for linear interpolation to be trustworthy.
    #[error(
        "grid too coarse: one-step drift {drift} exceeds {safety} of the \
         wealth extent {extent}; refine the wealth grid or the time grid"
    )]
    GridTooCoarse { drift: f64, extent: f64, safety: f64 },

    /// Forward propagation pushed more cumulative mass onto the grid
    /// boundary than the configured tolerance allows. `lost` is the running
    /// total at the step where it crossed the threshold.
    #[error(
        "forward propagation clamped cumulative mass {lost:e} at the grid \
         boundary by step {step}, above the tolerance {tolerance:e}; widen \
         the wealth grid"
    )]
    BoundaryMass { step: usize, lost: f64, tolerance: f64 },

    /// The damped fixed-point iteration ran out of iterations. The partial
    /// result, including its residual trace, is attached for diagnosis.
    #[error(
        "fixed point not reached: residual {residual:e} after {iterations} \
         iterations (tolerance {tol:e})"
    )]
    NonConvergence {
        result: Box<EquilibriumResult>,
        residual: f64,
        iterations: usize,
        tol: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
