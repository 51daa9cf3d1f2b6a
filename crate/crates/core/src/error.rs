use thiserror::Error;

/// Errors raised by the simulator and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("subsystem slot {0} out of range (expected 0..3)")]
    SlotOutOfRange(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operators do not share a space layout")]
    LayoutMismatch,

    #[error("negative rate {rate} for channel `{channel}`")]
    NegativeRate { channel: String, rate: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("frame/drive combination not supported: {0}")]
    FrameIncompatible(String),

    #[error("steady state is not unique (numerical null space dimension > 1): {0}")]
    AmbiguousSteadyState(String),

    #[error("solver failed: {reason} (residual {residual:e})")]
    Solver { reason: String, residual: f64 },

    #[error("linear response is singular at sideband detuning {detuning:e} rad/s")]
    ResonanceDegeneracy { detuning: f64 },

    #[error("truncation {dim} too small: tail population {tail:e} exceeds {threshold:e}")]
    TruncationTooSmall { dim: usize, tail: f64, threshold: f64 },

    #[error("tail mass {tail:e} too large for a reliable mean")]
    ExcessTailMass { tail: f64 },

    #[error("time integration failed at t = {time:e} s: {reason}")]
    StepFailure { time: f64, reason: String },

    #[error("fit did not converge after {restarts} restarts (best objective {best:e})")]
    FitNonConvergence { restarts: usize, best: f64 },

    #[error("peak at {center:e} rad/s matches no dispersive ladder rung")]
    UnindexablePeak { center: f64 },

    #[error("spectral grids cannot be aligned: {0}")]
    GridMismatch(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("at grid point {index} ({value:e}): {source}")]
    AtGridPoint {
        index: usize,
        value: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_grid_point(self, index: usize, value: f64) -> Self {
        Error::AtGridPoint { index, value, source: Box::new(self) }
    }

    /// Innermost error, skipping grid-point annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtGridPoint { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
