//! Independent reference solutions for cross-validating the spectral solver.
//!
//! Three oracles, deliberately from different method families:
//!
//! * [`exact_linear_constant`] -- per-mode exact Fourier solution of the
//!   undelayed linear problem with constant damping;
//! * [`delay_ode_reference`] -- the scalar delay ODE `u' = -lambda0 u -
//!   lambda u(t - tau)` integrated interval-by-interval with classic RK4
//!   (spatially constant runs reduce to this exactly);
//! * [`fd_rk4_reference`] -- method of lines with second-order periodic
//!   central differences and RK4, a different discretization family so that
//!   agreement with the spectral solver is evidence against common-mode bugs.

use std::collections::VecDeque;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::history::TimeProfile;
use crate::scalar::{cast, Scalar};

/// Which oracle produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    ExactFourier,
    DelayOdeSteps,
    FdRk4,
}

/// Scalar time series produced by an oracle; times strictly increasing.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarSeries<T: Scalar> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub method: MethodTag,
}

impl<T: Scalar> ScalarSeries<T> {
    pub fn final_value(&self) -> T {
        *self.values.last().expect("series nonempty")
    }
}

/// Field time series produced by an oracle.
#[derive(Debug, Clone)]
pub struct FieldSeries<T: Scalar> {
    pub times: Vec<T>,
    pub fields: Vec<Field<T>>,
    pub method: MethodTag,
}

impl<T: Scalar> FieldSeries<T> {
    pub fn final_field(&self) -> &Field<T> {
        self.fields.last().expect("series nonempty")
    }
}

/// Exact solution of `u_t + u_xxx - u_xx + lambda0 u = 0` with constant
/// `lambda0`: every mode is multiplied by `exp((i k^3 - k^2 - lambda0) t)`.
pub fn exact_linear_constant<T: Scalar>(u0: &Field<T>, lambda0_const: T, t: T) -> Result<Field<T>> {
    if !(t.is_finite() && t >= T::zero()) {
        return Err(Error::InvalidParameter {
            name: "t",
            message: format!("time must be nonnegative, got {t}"),
        });
    }
    let grid = u0.grid();
    let mut spectrum = u0.to_spectrum();
    for (c, &k) in spectrum.iter_mut().zip(grid.wavenumbers()) {
        let exponent = Complex::new(-(k * k) - lambda0_const, k * k * k) * t;
        *c = *c * exponent.exp();
    }
    Field::from_spectrum(Arc::clone(grid), &spectrum)
}

/// Integrates the scalar delay ODE `u' = -lambda0 u - lambda u(t - tau)` by
/// classic RK4 with the delayed value read from the table of past samples
/// (linear interpolation at half steps). Requires `tau` to be an integer
/// number of steps.
pub fn delay_ode_reference<T: Scalar>(
    lambda0: T,
    lambda: T,
    tau: T,
    history: impl Fn(T) -> T,
    t_end: T,
    dt: T,
) -> Result<ScalarSeries<T>> {
    if !(dt > T::zero() && t_end >= dt) {
        return Err(Error::InvalidParameter {
            name: "dt",
            message: format!("need 0 < dt <= t_end, got dt = {dt}, t_end = {t_end}"),
        });
    }
    let ratio = (tau / dt).to_f64().unwrap();
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::MisalignedDelay {
            tau: tau.to_f64().unwrap_or(f64::NAN),
            dt: dt.to_f64().unwrap_or(f64::NAN),
        });
    }
    let m = m as usize;
    let n_steps = (t_end / dt).to_f64().unwrap().round() as usize;

    // samples[i] = u(-tau + i dt); entries 0..=m come from the history.
    let mut samples: Vec<T> = (0..=m)
        .map(|i| history(dt * cast::<T>(i as f64 - m as f64)))
        .collect();
    let delayed = |samples: &[T], idx: usize, frac: T| -> T {
        if frac == T::zero() {
            samples[idx]
        } else {
            samples[idx] * (T::one() - frac) + samples[idx + 1] * frac
        }
    };
    let f = |u: T, u_d: T| -> T { -(lambda0 * u) - lambda * u_d };

    let half = cast::<T>(0.5);
    let sixth = T::one() / cast::<T>(6.0);
    let two = cast::<T>(2.0);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    times.push(T::zero());
    values.push(samples[m]);

    for n in 0..n_steps {
        let u = samples[m + n];
        // delayed arguments at t_n - tau, t_n - tau + dt/2, t_n - tau + dt
        let d0 = delayed(&samples, n, T::zero());
        let dh = delayed(&samples, n, half);
        let d1 = samples[n + 1];

        let k1 = f(u, d0);
        let k2 = f(u + half * dt * k1, dh);
        let k3 = f(u + half * dt * k2, dh);
        let k4 = f(u + dt * k3, d1);
        let next = u + dt * sixth * (k1 + two * k2 + two * k3 + k4);
        if !next.is_finite() {
            return Err(Error::Blowup {
                step: (n + 1) as u64,
                time: (dt * cast::<T>((n + 1) as f64))
                    .to_f64()
                    .unwrap_or(f64::NAN),
            });
        }
        samples.push(next);
        times.push(dt * cast::<T>((n + 1) as f64));
        values.push(next);
    }

    Ok(ScalarSeries {
        times,
        values,
        method: MethodTag::DelayOdeSteps,
    })
}

/// Second-order periodic central differences.
pub fn fd_derivative<T: Scalar>(values: &[T], dx: T, order: u32) -> Result<Vec<T>> {
    let n = values.len();
    let idx = |j: isize| -> T {
        let wrapped = j.rem_euclid(n as isize) as usize;
        values[wrapped]
    };
    let two = cast::<T>(2.0);
    match order {
        1 => {
            let denom = two * dx;
            Ok((0..n as isize)
                .map(|j| (idx(j + 1) - idx(j - 1)) / denom)
                .collect())
        }
        2 => {
            let denom = dx * dx;
            Ok((0..n as isize)
                .map(|j| (idx(j + 1) - two * idx(j) + idx(j - 1)) / denom)
                .collect())
        }
        3 => {
            let denom = two * dx * dx * dx;
            Ok((0..n as isize)
                .map(|j| (idx(j + 2) - two * idx(j + 1) + two * idx(j - 1) - idx(j - 2)) / denom)
                .collect())
        }
        _ => Err(Error::UnsupportedOrder { order }),
    }
}

/// Configuration of the finite-difference reference run. Intended usage is a
/// grid at least twice as fine as the spectral run and a step at most a
/// quarter of the spectral step (the explicit CFL bound usually forces far
/// less).
#[derive(Debug, Clone)]
pub struct FdOracleConfig<T: Scalar> {
    pub grid: Arc<Grid<T>>,
    pub dt: T,
    pub n_tau: usize,
    pub t_end: T,
    pub nonlinear: bool,
    pub lambda0: Field<T>,
    pub lambda: Field<T>,
    /// Spatial profile of the separable initial history, sampled on the
    /// oracle grid.
    pub history_spatial: Field<T>,
    pub history_temporal: TimeProfile<T>,
}

/// Method of lines with central differences and classic RK4; the delayed
/// field is frozen per step at `u(t - tau)`.
///
/// For `t_end <= tau` the delayed values come straight from the initial
/// history and no computed states are retained; beyond one delay window the
/// oracle keeps `n_tau + 1` full states in memory, so long runs at CFL-sized
/// steps are out of its intended scope.
pub fn fd_rk4_reference<T: Scalar>(cfg: &FdOracleConfig<T>) -> Result<FieldSeries<T>> {
    let grid = &cfg.grid;
    let dx = grid.spacing();
    let cfl_limit = cast::<T>(0.05) * dx * dx * dx;
    if cfg.dt > cfl_limit {
        return Err(Error::FdCflViolation {
            dt: cfg.dt.to_f64().unwrap_or(f64::NAN),
            limit: cfl_limit.to_f64().unwrap_or(f64::NAN),
        });
    }
    if cfg.n_tau == 0 {
        return Err(Error::InvalidParameter {
            name: "n_tau",
            message: "delay resolution must be at least one step".into(),
        });
    }
    let n_steps = {
        let ratio = (cfg.t_end / cfg.dt).to_f64().unwrap();
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                message: format!(
                    "t_end = {} is not an integer number of steps of dt = {}",
                    cfg.t_end, cfg.dt
                ),
            });
        }
        steps as usize
    };

    let tau = cfg.dt * cast::<T>(cfg.n_tau as f64);
    let history_at = |s: T| -> Vec<T> {
        let a = cfg.history_temporal.eval(s);
        cfg.history_spatial
            .values()
            .iter()
            .map(|&v| v * a)
            .collect()
    };

    // Computed states are only retained when the run outlives the first
    // delay window.
    let keep_past = n_steps > cfg.n_tau;
    let mut past: VecDeque<Vec<T>> = VecDeque::new();

    let lambda0 = cfg.lambda0.values();
    let lambda = cfg.lambda.values();
    let rhs = |u: &[T], u_d: &[T]| -> Result<Vec<T>> {
        let ux = fd_derivative(u, dx, 1)?;
        let uxx = fd_derivative(u, dx, 2)?;
        let uxxx = fd_derivative(u, dx, 3)?;
        Ok((0..u.len())
            .map(|j| {
                let mut v = -uxxx[j] + uxx[j] - lambda0[j] * u[j] - lambda[j] * u_d[j];
                if cfg.nonlinear {
                    v = v - u[j] * ux[j];
                }
                v
            })
            .collect())
    };

    let record_stride = (n_steps / 32).max(1);
    let mut u = history_at(T::zero());
    if keep_past {
        past.push_back(u.clone());
    }
    let mut times = vec![T::zero()];
    let mut fields = vec![Field::from_values(Arc::clone(grid), u.clone())?];

    let half = cast::<T>(0.5);
    let sixth = T::one() / cast::<T>(6.0);
    let two = cast::<T>(2.0);
    for n in 0..n_steps {
        // frozen delayed field u(t_n - tau)
        let u_d: Vec<T> = if n < cfg.n_tau {
            history_at(cfg.dt * cast::<T>(n as f64) - tau)
        } else {
            past.front().expect("past states retained").clone()
        };

        let k1 = rhs(&u, &u_d)?;
        let stage = |base: &[T], k: &[T], c: T| -> Vec<T> {
            base.iter().zip(k).map(|(&b, &kv)| b + c * kv).collect()
        };
        let k2 = rhs(&stage(&u, &k1, half * cfg.dt), &u_d)?;
        let k3 = rhs(&stage(&u, &k2, half * cfg.dt), &u_d)?;
        let k4 = rhs(&stage(&u, &k3, cfg.dt), &u_d)?;
        for j in 0..u.len() {
            u[j] = u[j] + cfg.dt * sixth * (k1[j] + two * k2[j] + two * k3[j] + k4[j]);
        }
        let t_next = cfg.dt * cast::<T>((n + 1) as f64);
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::Blowup {
                step: (n + 1) as u64,
                time: t_next.to_f64().unwrap_or(f64::NAN),
            });
        }
        if keep_past {
            past.push_back(u.clone());
            while past.len() > cfg.n_tau + 1 {
                past.pop_front();
            }
        }
        if (n + 1) % record_stride == 0 || n + 1 == n_steps {
            times.push(t_next);
            fields.push(Field::from_values(Arc::clone(grid), u.clone())?);
        }
    }

    Ok(FieldSeries {
        times,
        fields,
        method: MethodTag::FdRk4,
    })
}
