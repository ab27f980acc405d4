use serde::Serialize;
use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Error {
    #[error("radius {r} outside the tabulated range [0, {max}]")]
    Range { r: f64, max: f64 },
    #[error("radial quantity is singular at the pole (r = 0)")]
    Pole,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite input or result: {0}")]
    Numeric(String),
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("no sign change in bracket [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("hypothesis `{hypothesis}` violated at {location}: value {value}")]
    Hypothesis {
        hypothesis: String,
        location: String,
        value: f64,
    },
    #[error("particle {particle} left the field's domain at t = {t} (position {position:?})")]
    Escaped {
        particle: usize,
        t: f64,
        position: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
