//! Simulator and decay certifier for the KdV-Burgers equation with a
//! time-delayed feedback term,
//!
//! ```text
//! u_t + u_xxx - u_xx + lambda0(x) u + lambda(x) u(x, t - tau) + u u_x = 0
//! ```
//!
//! on a truncated periodic domain `[-L, L)`, together with its linearization
//! (the same equation without `u u_x`).
//!
//! The crate provides:
//!
//! * [`grid`]/[`field`] -- periodic spectral discretization, derivatives,
//!   norms and pairings;
//! * [`coefficients`] -- coefficient profiles, hypothesis checks and the
//!   certified exponential decay rate;
//! * [`history`] -- the delayed segment `u(s), s in [t - tau, t]` at exact
//!   step resolution (method of steps, no interpolation);
//! * [`solver`] -- exponential time differencing with exact propagation of
//!   the stiff dispersive-viscous part;
//! * [`oracle`] -- independent reference solutions (exact Fourier, scalar
//!   delay ODE, finite differences);
//! * [`diagnostics`] -- Lyapunov functionals, energy-identity residuals,
//!   norm bounds, interpolation inequalities and decay verdicts.
//!
//! All numerics are generic over the scalar type through [`scalar::Scalar`]
//! (`f32` or `f64`); the aliases below pin the common concrete choices.
//!
//! The model lives on the real line; the periodic box emulates it for data
//! that are effectively supported in `|x| <= L/2`. Treat `L` as a convergence
//! parameter: double it until reported decay rates change by less than 1%.
//! Sampled infima/suprema refine the same way in `N`.

pub mod coefficients;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod history;
pub mod oracle;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Grid64 = grid::Grid<f64>;
pub type Field64 = field::Field<f64>;
pub type HistoryBuffer64 = history::HistoryBuffer<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type SimulationRecord64 = diagnostics::SimulationRecord<f64>;
pub type StabilityCertificate64 = coefficients::StabilityCertificate<f64>;
pub type DecayReport64 = diagnostics::DecayReport<f64>;

pub type Grid32 = grid::Grid<f32>;
pub type Field32 = field::Field<f32>;
pub type HistoryBuffer32 = history::HistoryBuffer<f32>;
