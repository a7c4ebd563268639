use thiserror::Error;

use crate::grids::Representation;

/// Errors raised by the model, transforms and integrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dissipationless model: gamma = 0 leaves the relaxation time undefined")]
    Dissipationless,

    #[error("critically damped model (gamma = omega): characteristic lengths coincide")]
    CriticalDamping,

    #[error("underdamped parameters (gamma = {gamma} <= omega = {omega}): long-time pointer forms need gamma > omega")]
    Underdamped { gamma: f64, omega: f64 },

    #[error("operation requires the {expected} bath regime")]
    WrongBath { expected: &'static str },

    #[error("operation requires a {expected} sector, got {found}")]
    WrongSector {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("representation mismatch: expected {expected:?}, found {found:?}")]
    Representation {
        expected: Representation,
        found: Representation,
    },

    #[error("characteristic left domain at (Q, r) = ({q}, {r})")]
    LeftDomain { q: f64, r: f64 },

    #[error("invalid spin amplitudes: {0}")]
    InvalidAmplitudes(String),

    #[error("invalid apparatus state: {0}")]
    InvalidState(String),

    #[error("apparatus state not normalized on grid: trace = {trace}")]
    NotNormalized { trace: f64 },

    #[error("CFL violation: dt = {dt} exceeds stable limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("domain too small: boundary fraction {fraction:e} in sector {sector} at t = {t}")]
    DomainTooSmall {
        fraction: f64,
        sector: &'static str,
        t: f64,
    },

    #[error("invalid run configuration: {0}")]
    InvalidRun(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("degenerate sector {0}: zero trace")]
    DegenerateSector(&'static str),

    #[error("malformed field dump: {0}")]
    Dump(String),
}

pub type Result<T> = std::result::Result<T, Error>;
