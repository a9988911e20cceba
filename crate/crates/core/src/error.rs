//! Error type shared by the whole crate.

use thiserror::Error;

/// Errors raised by grid construction, field algebra, the time stepper and
/// the diagnostics layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("fields are bound to different grids (left: N={left_n}, L={left_l}; right: N={right_n}, L={right_l})")]
    GridMismatch {
        left_n: usize,
        left_l: f64,
        right_n: usize,
        right_l: f64,
    },

    #[error("field contains non-finite samples")]
    NonFiniteField,

    #[error("unsupported derivative order {order}; supported orders are 1, 2, 3")]
    UnsupportedOrder { order: u32 },

    #[error("solution blew up (non-finite values) at step {step}, t = {time}")]
    Blowup { step: u64, time: f64 },

    #[error(
        "time-step stability bound violated at step {step}: dt = {dt} exceeds 0.9/(sup|lambda0| + sup|lambda| + sup|u|*k_max) = {bound}"
    )]
    StabilityViolation { step: u64, dt: f64, bound: f64 },

    #[error("delay is misaligned: tau = {tau} is not an integer multiple of dt = {dt}")]
    MisalignedDelay { tau: f64, dt: f64 },

    #[error("explicit CFL bound violated for the finite-difference oracle: dt = {dt} exceeds {limit} = 0.05*dx^3")]
    FdCflViolation { dt: f64, limit: f64 },

    #[error("record is unusable for this diagnostic: {0}")]
    BadRecord(String),

    #[error("decay-rate window too short: usable span {span} is below the required {required} (= 5/gamma)")]
    WindowTooShort { span: f64, required: f64 },

    #[error(
        "energy reached the floating-point floor before the fit window; decay fit is undefined"
    )]
    FloorReached,

    #[error("field is not effectively supported in |x| <= L/2 (max outer deviation {max_outer})")]
    SupportViolation { max_outer: f64 },

    #[error("checkpoint is malformed: {0}")]
    BadCheckpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
