use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sequence constraint violated at index {n}: {which}")]
    ConstraintViolation { n: usize, which: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("growth rates outside the required regime: {0}")]
    RegimeError(String),

    #[error("KPP property fails at x = {x} for s1 = {s1}, s2 = {s2} (difference {difference})")]
    KppViolation { x: f64, s1: f64, s2: f64, difference: f64 },

    #[error("grid of {cells} cells exceeds the cap of {cap}")]
    GridError { cells: usize, cap: usize },

    #[error("maximum principle violated at t = {t}, x = {x}: u = {value}")]
    MaximumPrincipleViolation { t: f64, x: f64, value: f64 },

    #[error("tridiagonal system singular at row {row}")]
    TridiagonalSingular { row: usize },

    #[error("front reached x = {x} at t = {t}, beyond the constructed media (end {end})")]
    DomainOverrun { t: f64, x: f64, end: f64 },

    #[error("level {gamma} is not bracketed by the field")]
    LevelNotBracketed { gamma: f64 },

    #[error("probe at x = {x} never reached level {gamma}")]
    NeverCrossed { x: f64, gamma: f64 },

    #[error("no samples in the requested window")]
    EmptyWindow,

    #[error("({t}, {x}) lies outside the validity region: {reason}")]
    OutsideValidity { t: f64, x: f64, reason: String },

    #[error("calibration did not settle within t = {budget}")]
    CalibrationTimeout { budget: f64 },

    #[error("largeness gate failed at index {n}: {reason}")]
    GateFailed { n: usize, reason: String },

    #[error("bump amplitude ln(alpha) = {ln_alpha} is not below ln(gamma) = {ln_gamma} at index {n}")]
    AlphaTooLarge { n: usize, ln_alpha: f64, ln_gamma: f64 },
}
