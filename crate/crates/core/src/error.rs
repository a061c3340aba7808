use thiserror::Error;

/// Errors raised by the geometry, volume and asymptotics routines.
#[derive(Debug, Error)]
pub enum KpvError {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("configurations are incomparable: {left} points vs {right} points")]
    Incomparable { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {dimension} for {operation}")]
    UnsupportedDimension {
        operation: &'static str,
        dimension: usize,
    },

    #[error("invalid halfspace: {0}")]
    InvalidHalfspace(String),

    #[error("infeasible polyhedral set: {0}")]
    Infeasible(String),

    #[error("duplicate sites {i} and {j}; deduplicate the configuration first")]
    DuplicateSites { i: usize, j: usize },

    #[error("site index {index} out of range for {len} sites")]
    SiteIndex { index: usize, len: usize },

    #[error("degenerate hull: {0}")]
    DegenerateHull(String),

    #[error("step controller failed to meet the local error target near r = {radius}")]
    StepFailure { radius: f64 },

    #[error("radius {radius} lies beyond the profile range {r_max}")]
    OutOfRange { radius: f64, r_max: f64 },

    #[error("radius {radius} sits on breakpoint {breakpoint}; evaluate at an offset radius")]
    AtBreakpoint { radius: f64, breakpoint: f64 },

    #[error("ill-conditioned fit (condition {condition:.3e} exceeds {bound:.3e}); use a wider window or a larger r_max")]
    IllConditioned { condition: f64, bound: f64 },

    #[error("invalid fit window: {0}")]
    InvalidWindow(String),

    #[error("not in general position: {0}")]
    GeneralPosition(String),

    #[error("expansion generator gave up after {iterations} iterations; retry with another seed")]
    GeneratorExhausted { iterations: usize },

    #[error("Monte Carlo error too large ({relative:.3e} relative); about {required} samples are needed")]
    InsufficientSamples { relative: f64, required: u64 },

    #[error("inequalities fail at the top of the grid (r = {radius}); extend the grid or loosen the tolerance")]
    ThresholdNotReached { radius: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl KpvError {
    /// True for errors caused by malformed or inconsistent input rather
    /// than by a numerical procedure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            KpvError::InvalidConfiguration(_)
                | KpvError::Incomparable { .. }
                | KpvError::DimensionMismatch { .. }
                | KpvError::UnsupportedDimension { .. }
                | KpvError::InvalidHalfspace(_)
                | KpvError::Infeasible(_)
                | KpvError::DuplicateSites { .. }
                | KpvError::SiteIndex { .. }
                | KpvError::GeneralPosition(_)
                | KpvError::InvalidParameter(_)
                | KpvError::InvalidWindow(_)
                | KpvError::Io(_)
                | KpvError::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, KpvError>;
