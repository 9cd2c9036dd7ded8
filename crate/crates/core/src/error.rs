use thiserror::Error;

use crate::device::PulseRole;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(
        "{role:?} pulse amplitude {amplitude} V is below the {threshold} V switching threshold"
    )]
    AmplitudeBelowThreshold {
        role: PulseRole,
        amplitude: f64,
        threshold: f64,
    },

    #[error("expected a {expected:?} pulse, got {found:?}")]
    WrongPulseRole {
        expected: PulseRole,
        found: PulseRole,
    },

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("invalid device parameters: {0}")]
    InvalidParams(String),

    #[error("array dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("index {index} out of range for a {n}x{n} array")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("stimulus pattern has no ON neurons")]
    EmptyStimulus,

    #[error("pattern has no ON x ON cells or no cells outside that block")]
    DegeneratePattern,

    #[error("report contains no resistance snapshots")]
    NoSnapshots,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type SimResult<T> = Result<T, SimError>;
