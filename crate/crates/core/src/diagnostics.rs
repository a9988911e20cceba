//! Measured counterparts of everything the decay analysis promises:
//! Lyapunov functionals, the energy identity, the well-posedness norm bound,
//! the interpolation inequalities, and decay-rate verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::grid_mismatch;
use crate::history::HistoryBuffer;
use crate::scalar::{cast, Scalar};

/// `E(t) = (1/2) ||u(t)||_2^2`.
pub fn energy_e<T: Scalar>(u: &Field<T>) -> T {
    let n = u.l2_norm();
    cast::<T>(0.5) * n * n
}

/// Full Lyapunov functional: `E(t)` plus the exponentially weighted memory
/// integral of `|lambda| u^2` over the last delay window.
pub fn energy_cal_e<T: Scalar>(
    u: &Field<T>,
    buf: &HistoryBuffer<T>,
    abs_lambda: &Field<T>,
) -> Result<T> {
    if !u.shares_grid(abs_lambda) {
        return Err(grid_mismatch(u.grid(), abs_lambda.grid()));
    }
    Ok(energy_e(u) + buf.memory_integral(abs_lambda)?)
}

/// The constant in the decay estimate `calE(t) <= C(u0) e^{-gamma t}`:
/// the Lyapunov functional of the initial buffer, `C(u0) = calE(0)`.
pub fn c_of_u0<T: Scalar>(buf: &HistoryBuffer<T>, abs_lambda: &Field<T>) -> Result<T> {
    if buf.current_time() != T::zero() {
        return Err(Error::BadRecord(format!(
            "initial-constant evaluation requires the buffer at t = 0, got t = {}",
            buf.current_time()
        )));
    }
    energy_cal_e(buf.newest(), buf, abs_lambda)
}

/// Summary of a solver run: scalar series at the recorded times plus sparse
/// field snapshots. Series share one length; `cal_e >= e` pointwise.
#[derive(Debug, Clone)]
pub struct SimulationRecord<T: Scalar> {
    pub times: Vec<T>,
    /// `E(t)`
    pub e_series: Vec<T>,
    /// `calE(t)`
    pub cal_e_series: Vec<T>,
    pub mass_series: Vec<T>,
    pub linf_series: Vec<T>,
    /// `||u_x(t)||_2`
    pub ux_l2_series: Vec<T>,
    /// `int lambda0 u^2 dx` at each recorded time
    pub damping_series: Vec<T>,
    /// `int lambda u(t - tau) u(t) dx` at each recorded time
    pub delay_cross_series: Vec<T>,
    /// Running residual of the energy identity (see [`identity_residual`])
    pub identity_residual_series: Vec<T>,
    /// Sparse `(t, u(t))` snapshots; always contains the initial and final states.
    pub snapshots: Vec<(T, Field<T>)>,
    /// `||u||_{L^2(-tau, 0; L^2)}` of the initial history.
    pub history_l2_norm: T,
    pub config_echo: RunSummary<T>,
}

/// Compact configuration echo embedded in every record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary<T: Scalar> {
    pub half_width: T,
    pub node_count: usize,
    pub dt: T,
    pub n_tau: usize,
    pub tau: T,
    pub t_end: T,
    pub nonlinear: bool,
    pub record_stride: usize,
}

impl<T: Scalar> SimulationRecord<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> T {
        *self.times.last().expect("record is never empty")
    }

    pub fn initial_field(&self) -> &Field<T> {
        &self.snapshots.first().expect("snapshots nonempty").1
    }

    pub fn final_field(&self) -> &Field<T> {
        &self.snapshots.last().expect("snapshots nonempty").1
    }

    fn index_at_or_before(&self, t: T) -> Result<usize> {
        if self.is_empty() || t < self.times[0] {
            return Err(Error::BadRecord(format!(
                "requested time {t} precedes the recorded span"
            )));
        }
        Ok(self.times.partition_point(|&s| s <= t) - 1)
    }
}

/// Trapezoid of a sampled series over `times[0..=upto]`; handles the uneven
/// spacing of a final partial stride.
fn trapezoid<T: Scalar>(times: &[T], values: &[T], upto: usize) -> T {
    let half = cast::<T>(0.5);
    let mut acc = T::zero();
    for i in 1..=upto {
        let dt = times[i] - times[i - 1];
        acc = acc + half * dt * (values[i] + values[i - 1]);
    }
    acc
}

/// Signed residual of the energy identity at recorded time `t`,
///
/// ```text
/// (1/2)||u(t)||^2 + int_0^t ||u_x||^2 + int_0^t int lambda0 u^2
///   + int_0^t int lambda u(s - tau) u(s) - (1/2)||u(0)||^2,
/// ```
///
/// normalized by `(1/2)||u(0)||^2`. Time integrals use the trapezoid rule at
/// the record's resolution, so the residual carries the scheme's O(dt^2)
/// error rather than vanishing identically.
pub fn identity_residual<T: Scalar>(record: &SimulationRecord<T>, t: T) -> Result<T> {
    let idx = record.index_at_or_before(t)?;
    let ux_sq: Vec<T> = record.ux_l2_series.iter().map(|&v| v * v).collect();
    let dissipation = trapezoid(&record.times, &ux_sq, idx);
    let damping = trapezoid(&record.times, &record.damping_series, idx);
    let cross = trapezoid(&record.times, &record.delay_cross_series, idx);
    let e0 = record.e_series[0];
    if e0 == T::zero() {
        return Ok(T::zero());
    }
    Ok((record.e_series[idx] + dissipation + damping + cross - e0) / e0)
}

/// `||u||_{B_T} = max_t ||u(t)||_2 + (int_0^T ||u_x||_2^2)^(1/2)` over the
/// recorded span.
pub fn bt_norm<T: Scalar>(record: &SimulationRecord<T>) -> Result<T> {
    if record.is_empty() {
        return Err(Error::BadRecord("empty record".into()));
    }
    let two = cast::<T>(2.0);
    let sup = record
        .e_series
        .iter()
        .map(|&e| (two * e).sqrt())
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    let ux_sq: Vec<T> = record.ux_l2_series.iter().map(|&v| v * v).collect();
    let diss = trapezoid(&record.times, &ux_sq, record.len() - 1);
    Ok(sup + diss.sqrt())
}

/// Well-posedness constant
/// `C_T = sqrt(3/2) (1 + e^{2 sup|lambda| T})^(1/2) e^{(sup|lambda| + sup|lambda0|) T}`
/// with sampled sup-norms. Strictly increasing in `T`.
pub fn ct_constant<T: Scalar>(lambda0: &Field<T>, lambda: &Field<T>, t_end: T) -> T {
    let l_inf = lambda.linf_norm();
    let l0_inf = lambda0.linf_norm();
    let two = cast::<T>(2.0);
    (cast::<T>(1.5)).sqrt()
        * (T::one() + (two * l_inf * t_end).exp()).sqrt()
        * ((l_inf + l0_inf) * t_end).exp()
}

/// Outcome of an inequality check: both sides plus the verdict.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InequalityCheck<T: Scalar> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
    /// `rhs - lhs`; negative means violated.
    pub slack: T,
}

fn verdict<T: Scalar>(lhs: T, rhs: T, rel_slack: T) -> InequalityCheck<T> {
    InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (T::one() + rel_slack),
        slack: rhs - lhs,
    }
}

/// Checks the a-priori bound for the linear inhomogeneous problem with
/// `f = 0`:
///
/// ```text
/// ||u||_{B_T} <= C_T { ||u(0)||_2
///   + (sup|lambda| tau^(1/2) + sup|lambda|^(1/2)) ||u||_{L^2(-tau,0;L^2)} }.
/// ```
pub fn verify_bt_bound<T: Scalar>(
    record: &SimulationRecord<T>,
    lambda0: &Field<T>,
    lambda: &Field<T>,
) -> Result<InequalityCheck<T>> {
    if record.config_echo.nonlinear {
        return Err(Error::BadRecord(
            "the norm bound is stated for the linear model; got a nonlinear record".into(),
        ));
    }
    let lhs = bt_norm(record)?;
    let l_inf = lambda.linf_norm();
    let tau = record.config_echo.tau;
    let u0_norm = (cast::<T>(2.0) * record.e_series[0]).sqrt();
    let ct = ct_constant(lambda0, lambda, record.final_time());
    let rhs = ct * (u0_norm + (l_inf * tau.sqrt() + l_inf.sqrt()) * record.history_l2_norm);
    Ok(verdict(lhs, rhs, cast::<T>(1e-12)))
}

/// Checks the sup-norm interpolation inequality
/// `||v||_inf^2 <= 2 ||v||_2 ||v_x||_2`.
///
/// Valid for decaying functions on the line; on the torus it fails for
/// nonzero constants, so the field must be effectively supported in
/// `|x| <= L/2` (outer deviation below 1e-12).
pub fn check_interpolation_inequality<T: Scalar>(v: &Field<T>) -> Result<InequalityCheck<T>> {
    let outer = v.max_outside_half_box();
    if outer > cast::<T>(1e-12) {
        return Err(Error::SupportViolation {
            max_outer: outer.to_f64().unwrap_or(f64::NAN),
        });
    }
    let sup = v.linf_norm();
    let lhs = sup * sup;
    let rhs = cast::<T>(2.0) * v.l2_norm() * v.derivative(1)?.l2_norm();
    Ok(verdict(lhs, rhs, cast::<T>(1e-8)))
}

/// Checks the Hoelder interpolation `||u||_{2q}^2 <= ||u||_2^{2/q} ||u||_inf^{2/p}`
/// with `q = p/(p-1)`, `p > 1`.
pub fn check_holder_interpolation<T: Scalar>(u: &Field<T>, p: T) -> Result<InequalityCheck<T>> {
    if !(p.is_finite() && p > T::one()) {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("requires finite p > 1, got {p}"),
        });
    }
    let q = p / (p - T::one());
    let two = cast::<T>(2.0);
    let lhs = u.lp_norm(two * q)?.powf(two);
    let rhs = u.l2_norm().powf(two / q) * u.linf_norm().powf(two / p);
    Ok(verdict(lhs, rhs, cast::<T>(1e-8)))
}

/// Pointwise decay verdict plus the fitted rate.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport<T: Scalar> {
    /// Least-squares slope of `-log calE` over the fit window.
    pub fitted_rate: T,
    /// Certified rate the record was checked against.
    pub certified_rate: T,
    /// Fit window `[t1, t2]`.
    pub window: (T, T),
    /// Pointwise check `calE(t) <= calE(0) e^{-gamma t} (1 + tol)` over the
    /// whole record.
    pub bound_satisfied: bool,
    /// `max_t calE(t) / (calE(0) e^{-gamma t}) - 1`; positive means excess.
    pub max_violation: T,
    pub tolerance: T,
}

/// Relative slack allowed in the pointwise decay check: quadrature allowance
/// plus a machine-level term.
pub fn default_decay_tolerance<T: Scalar>() -> T {
    cast::<T>(1e-3) + cast::<T>(1e-6)
}

/// Fits the decay rate over the trailing `window_fraction` of the run and
/// checks the certified pointwise bound.
///
/// The fit excludes samples with `calE < 1e-14` (floating-point floor). The
/// window must span at least `5/gamma`; the pointwise bound, not the fit, is
/// the primary verdict.
pub fn decay_report<T: Scalar>(
    record: &SimulationRecord<T>,
    certified_rate: T,
    window_fraction: T,
    tolerance: T,
) -> Result<DecayReport<T>> {
    if record.len() < 3 {
        return Err(Error::BadRecord(
            "too few samples for a decay report".into(),
        ));
    }
    if !certified_rate.is_finite() || certified_rate <= T::zero() {
        return Err(Error::InvalidParameter {
            name: "certified_rate",
            message: format!("rate must be positive, got {certified_rate}"),
        });
    }
    if !(window_fraction > T::zero() && window_fraction <= T::one()) {
        return Err(Error::InvalidParameter {
            name: "window_fraction",
            message: format!("must lie in (0, 1], got {window_fraction}"),
        });
    }

    let t_final = record.final_time();
    let t_start = t_final * (T::one() - window_fraction);
    let span = t_final - t_start;
    let required = cast::<T>(5.0) / certified_rate;
    if span < required {
        return Err(Error::WindowTooShort {
            span: span.to_f64().unwrap_or(f64::NAN),
            required: required.to_f64().unwrap_or(f64::NAN),
        });
    }

    let floor = cast::<T>(1e-14);
    let fit: Vec<(T, T)> = record
        .times
        .iter()
        .zip(&record.cal_e_series)
        .filter(|(&t, &e)| t >= t_start && e > floor)
        .map(|(&t, &e)| (t, -(e.ln())))
        .collect();
    if fit.len() < 2 {
        return Err(Error::FloorReached);
    }

    // least squares slope of -log(calE) against t
    let n = cast::<T>(fit.len() as f64);
    let sum_t = fit.iter().map(|&(t, _)| t).fold(T::zero(), |a, b| a + b);
    let sum_y = fit.iter().map(|&(_, y)| y).fold(T::zero(), |a, b| a + b);
    let sum_tt = fit
        .iter()
        .map(|&(t, _)| t * t)
        .fold(T::zero(), |a, b| a + b);
    let sum_ty = fit
        .iter()
        .map(|&(t, y)| t * y)
        .fold(T::zero(), |a, b| a + b);
    let denom = n * sum_tt - sum_t * sum_t;
    if denom == T::zero() {
        return Err(Error::FloorReached);
    }
    let fitted_rate = (n * sum_ty - sum_t * sum_y) / denom;

    let e0 = record.cal_e_series[0];
    let mut max_violation = T::neg_infinity();
    let mut bound_satisfied = true;
    for (&t, &e) in record.times.iter().zip(&record.cal_e_series) {
        let envelope = e0 * (-certified_rate * t).exp();
        let excess = if envelope > T::zero() {
            e / envelope - T::one()
        } else if e > T::zero() {
            T::infinity()
        } else {
            T::zero()
        };
        if excess > max_violation {
            max_violation = excess;
        }
        if excess > tolerance {
            bound_satisfied = false;
        }
    }

    Ok(DecayReport {
        fitted_rate,
        certified_rate,
        window: (t_start, t_final),
        bound_satisfied,
        max_violation,
        tolerance,
    })
}
