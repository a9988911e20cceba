//! Exact-resolution storage of the delayed solution segment.
//!
//! The delay is pinned to the step size: `tau = n_tau * dt` by construction,
//! so the delayed state `u(t - tau)` is always the oldest stored slot and no
//! interpolation ever happens. This mirrors the interval-by-interval
//! structure used to build solutions of the delayed problem: on each step the
//! whole segment `u(s), s in [t - tau, t]` is known data.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSpec;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{grid_mismatch, Grid};
use crate::scalar::{cast, Scalar};

/// Ring buffer of the `n_tau + 1` most recent states, spaced exactly `dt`
/// apart. Oldest slot = `u(t - tau)`, newest = `u(t)`.
///
/// Single-writer: `push` takes `&mut self`; reads are safe concurrently with
/// no writer.
#[derive(Debug, Clone)]
pub struct HistoryBuffer<T: Scalar> {
    slots: VecDeque<Field<T>>,
    n_tau: usize,
    dt: T,
    /// Step index of the newest slot; the newest timestamp is `index * dt`.
    newest_index: i64,
}

impl<T: Scalar> HistoryBuffer<T> {
    /// Fills the buffer from `initial(x, s)` at `s = -n_tau*dt, ..., -dt, 0`.
    pub fn from_fn(
        grid: &Arc<Grid<T>>,
        n_tau: usize,
        dt: T,
        initial: impl Fn(T, T) -> T,
    ) -> Result<Self> {
        if n_tau == 0 {
            return Err(Error::InvalidParameter {
                name: "n_tau",
                message: "delay resolution must be at least one step".into(),
            });
        }
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                message: format!("step size must be positive, got {dt}"),
            });
        }
        let mut slots = VecDeque::with_capacity(n_tau + 1);
        for i in 0..=n_tau {
            let s = dt * cast::<T>(i as f64 - n_tau as f64);
            slots.push_back(Field::from_fn(Arc::clone(grid), |x| initial(x, s))?);
        }
        Ok(HistoryBuffer {
            slots,
            n_tau,
            dt,
            newest_index: 0,
        })
    }

    /// Builds a buffer from pre-sampled slots, oldest first.
    pub fn from_slots(slots: Vec<Field<T>>, dt: T) -> Result<Self> {
        if slots.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "slots",
                message: "need at least two slots (n_tau >= 1)".into(),
            });
        }
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                message: format!("step size must be positive, got {dt}"),
            });
        }
        let grid = Arc::clone(slots[0].grid());
        for s in &slots[1..] {
            if s.grid().as_ref() != grid.as_ref() {
                return Err(grid_mismatch(grid.as_ref(), s.grid().as_ref()));
            }
        }
        let n_tau = slots.len() - 1;
        Ok(HistoryBuffer {
            slots: slots.into(),
            n_tau,
            dt,
            newest_index: 0,
        })
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// `tau = n_tau * dt`, exact by construction.
    pub fn tau(&self) -> T {
        self.dt * cast::<T>(self.n_tau as f64)
    }

    pub fn current_time(&self) -> T {
        self.dt * cast::<T>(self.newest_index as f64)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.slots[0].grid()
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Slot `i` steps after the oldest; `slot(0)` is `u(t - tau)`,
    /// `slot(n_tau)` is `u(t)`.
    pub fn slot(&self, i: usize) -> &Field<T> {
        &self.slots[i]
    }

    /// The delayed state `u(t - tau)`: exactly the oldest slot.
    pub fn delayed_state(&self) -> &Field<T> {
        self.slots.front().expect("buffer is never empty")
    }

    /// The newest slot `u(t)`.
    pub fn newest(&self) -> &Field<T> {
        self.slots.back().expect("buffer is never empty")
    }

    /// Evicts the oldest slot, appends `newest`, advances time by `dt`.
    pub fn push(&mut self, newest: Field<T>) -> Result<()> {
        if newest.grid().as_ref() != self.grid().as_ref() {
            return Err(grid_mismatch(self.grid().as_ref(), newest.grid().as_ref()));
        }
        self.slots.pop_front();
        self.slots.push_back(newest);
        self.newest_index += 1;
        Ok(())
    }

    /// Memory term of the Lyapunov functional,
    /// `(1/2) * int_{t-tau}^{t} int e^{-(t-s)} |lambda(x)| u^2(x, s) dx ds`,
    /// by the composite trapezoidal rule over the stored slots. The
    /// exponential weight is evaluated analytically at the slot times.
    pub fn memory_integral(&self, abs_lambda: &Field<T>) -> Result<T> {
        if abs_lambda.grid().as_ref() != self.grid().as_ref() {
            return Err(grid_mismatch(
                self.grid().as_ref(),
                abs_lambda.grid().as_ref(),
            ));
        }
        if abs_lambda.values().iter().any(|&v| v < T::zero()) {
            return Err(Error::InvalidParameter {
                name: "abs_lambda",
                message: "weight must be pointwise nonnegative".into(),
            });
        }
        let dx = self.grid().spacing();
        let half = cast::<T>(0.5);
        let mut integral = T::zero();
        for (i, slot) in self.slots.iter().enumerate() {
            // s_i = t - (n_tau - i) dt, so t - s_i = (n_tau - i) dt
            let age = self.dt * cast::<T>((self.n_tau - i) as f64);
            let weight = (-age).exp();
            let spatial = slot
                .values()
                .iter()
                .zip(abs_lambda.values())
                .map(|(&u, &l)| l * u * u)
                .fold(T::zero(), |a, b| a + b)
                * dx;
            let trapezoid = if i == 0 || i == self.n_tau {
                half
            } else {
                T::one()
            };
            integral = integral + trapezoid * weight * spatial;
        }
        Ok(half * integral * self.dt)
    }

    /// `||u||_{L^2(-tau, 0; L^2)}`: trapezoid in s of `||u(s)||_2^2` over the
    /// stored slots, square-rooted.
    pub fn history_l2_norm(&self) -> T {
        let half = cast::<T>(0.5);
        let mut sum = T::zero();
        for (i, slot) in self.slots.iter().enumerate() {
            let w = if i == 0 || i == self.n_tau {
                half
            } else {
                T::one()
            };
            let n = slot.l2_norm();
            sum = sum + w * n * n;
        }
        (sum * self.dt).sqrt()
    }

    /// Writes the checkpoint: little-endian header
    /// `(N: u64, n_tau: u64, dt: f64, current_time: f64, L: f64)` followed by
    /// the slot payloads, oldest first, as little-endian 64-bit floats.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let grid = self.grid();
        w.write_all(&(grid.node_count() as u64).to_le_bytes())?;
        w.write_all(&(self.n_tau as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_f64().unwrap().to_le_bytes())?;
        w.write_all(&self.current_time().to_f64().unwrap().to_le_bytes())?;
        w.write_all(&grid.half_width().to_f64().unwrap().to_le_bytes())?;
        for slot in &self.slots {
            for v in slot.values() {
                w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Restores a buffer written by [`HistoryBuffer::write_checkpoint`].
    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut u64_buf = [0u8; 8];
        let mut f64_buf = [0u8; 8];

        r.read_exact(&mut u64_buf)?;
        let n = u64::from_le_bytes(u64_buf) as usize;
        r.read_exact(&mut u64_buf)?;
        let n_tau = u64::from_le_bytes(u64_buf) as usize;
        r.read_exact(&mut f64_buf)?;
        let dt = f64::from_le_bytes(f64_buf);
        r.read_exact(&mut f64_buf)?;
        let current_time = f64::from_le_bytes(f64_buf);
        r.read_exact(&mut f64_buf)?;
        let half_width = f64::from_le_bytes(f64_buf);

        if n_tau == 0 {
            return Err(Error::BadCheckpoint("n_tau must be positive".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::BadCheckpoint(format!("bad dt: {dt}")));
        }
        let grid = Grid::<T>::new(
            T::from_f64(half_width).ok_or_else(|| Error::BadCheckpoint("bad L".into()))?,
            n,
        )
        .map_err(|e| Error::BadCheckpoint(e.to_string()))?;

        let mut slots = Vec::with_capacity(n_tau + 1);
        for _ in 0..=n_tau {
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut f64_buf)?;
                let v = f64::from_le_bytes(f64_buf);
                values.push(T::from_f64(v).ok_or_else(|| {
                    Error::BadCheckpoint("payload value not representable".into())
                })?);
            }
            slots.push(
                Field::from_values(Arc::clone(&grid), values)
                    .map_err(|e| Error::BadCheckpoint(e.to_string()))?,
            );
        }

        let newest_index = (current_time / dt).round() as i64;
        Ok(HistoryBuffer {
            slots: slots.into(),
            n_tau,
            dt: T::from_f64(dt).unwrap(),
            newest_index,
        })
    }
}

/// Temporal modulation of a separable initial history.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile<T: Scalar> {
    /// `a(s) = 1`
    Constant,
    /// `a(s) = exp(rate * s)`
    Exponential { rate: T },
}

impl<T: Scalar> TimeProfile<T> {
    pub fn eval(&self, s: T) -> T {
        match self {
            TimeProfile::Constant => T::one(),
            TimeProfile::Exponential { rate } => (*rate * s).exp(),
        }
    }
}

/// Declarative initial history `u(x, s)`, `s in [-tau, 0]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HistoryInit<T: Scalar> {
    /// `u(x, s) = a(s) * v(x)`
    Separable {
        spatial: CoefficientSpec<T>,
        temporal: TimeProfile<T>,
    },
    /// One profile per slot, oldest first; must have `n_tau + 1` entries.
    PerSlot { slots: Vec<CoefficientSpec<T>> },
}

impl<T: Scalar> HistoryInit<T> {
    pub fn build(&self, grid: &Arc<Grid<T>>, n_tau: usize, dt: T) -> Result<HistoryBuffer<T>> {
        match self {
            HistoryInit::Separable { spatial, temporal } => {
                let base = spatial.sample(grid)?;
                let mut slots = Vec::with_capacity(n_tau + 1);
                for i in 0..=n_tau {
                    let s = dt * cast::<T>(i as f64 - n_tau as f64);
                    slots.push(base.scaled(temporal.eval(s)));
                }
                HistoryBuffer::from_slots(slots, dt)
            }
            HistoryInit::PerSlot { slots } => {
                if slots.len() != n_tau + 1 {
                    return Err(Error::InvalidParameter {
                        name: "slots",
                        message: format!(
                            "expected {} slot profiles, got {}",
                            n_tau + 1,
                            slots.len()
                        ),
                    });
                }
                let fields = slots
                    .iter()
                    .map(|spec| spec.sample(grid))
                    .collect::<Result<Vec<_>>>()?;
                HistoryBuffer::from_slots(fields, dt)
            }
        }
    }

    /// Spatial profile at `s = 0` (the run's initial condition).
    pub fn initial_field(&self, grid: &Arc<Grid<T>>, n_tau: usize, dt: T) -> Result<Field<T>> {
        Ok(self.build(grid, n_tau, dt)?.newest().clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<Grid<f64>> {
        Grid::new(4.0, 64).unwrap()
    }

    #[test]
    fn init_fills_slots() {
        let g = grid();
        let buf = HistoryBuffer::from_fn(&g, 4, 0.25, |_, _| 1.0).unwrap();
        assert_eq!(buf.slot_count(), 5);
        for i in 0..5 {
            assert!(buf.slot(i).values().iter().all(|&v| v == 1.0));
        }
        assert_eq!(buf.current_time(), 0.0);
        assert_eq!(buf.tau(), 1.0);
    }

    #[test]
    fn init_evaluates_time_argument() {
        let g = grid();
        let buf = HistoryBuffer::from_fn(&g, 10, 0.1, |x, s| s.exp() * x.sin()).unwrap();
        let tau = buf.tau();
        let oldest = buf.delayed_state();
        for (x, v) in g.nodes().iter().zip(oldest.values()) {
            assert!((v - (-tau).exp() * x.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn init_rejects_zero_n_tau_and_bad_samples() {
        let g = grid();
        assert!(HistoryBuffer::from_fn(&g, 0, 0.1, |_, _| 0.0).is_err());
        assert!(HistoryBuffer::from_fn(&g, 2, 0.1, |_, s| s / 0.0).is_err());
        assert!(HistoryBuffer::from_fn(&g, 2, 0.0, |_, _| 0.0).is_err());
    }

    #[test]
    fn delayed_state_is_time_shift() {
        let g = grid();
        let buf = HistoryBuffer::from_fn(&g, 3, 0.5, |_, s| s).unwrap();
        assert!(buf
            .delayed_state()
            .values()
            .iter()
            .all(|&v| (v + 1.5).abs() < 1e-15));
    }

    #[test]
    fn push_is_fifo_with_fixed_capacity() {
        let g = grid();
        let mut buf = HistoryBuffer::from_fn(&g, 3, 0.5, |_, _| 0.0).unwrap();
        let seed_newest = buf.newest().clone();

        let mut pushed = Vec::new();
        for i in 1..=3 {
            let f = Field::from_fn(Arc::clone(&g), |x| x + i as f64).unwrap();
            pushed.push(f.clone());
            buf.push(f).unwrap();
            assert_eq!(buf.slot_count(), 4);
        }
        // After n_tau pushes the delayed state is the slot that was newest at init.
        assert_eq!(buf.delayed_state().values(), seed_newest.values());
        assert!((buf.current_time() - 1.5).abs() < 1e-15);

        // One more push: delayed state is the first pushed field, bitwise.
        buf.push(Field::zeros(Arc::clone(&g))).unwrap();
        assert_eq!(buf.delayed_state().values(), pushed[0].values());
    }

    #[test]
    fn push_rejects_foreign_grid() {
        let g = grid();
        let other = Grid::<f64>::new(4.0, 128).unwrap();
        let mut buf = HistoryBuffer::from_fn(&g, 2, 0.5, |_, _| 0.0).unwrap();
        assert!(buf.push(Field::zeros(other)).is_err());
    }

    #[test]
    fn delayed_state_unmoved_by_single_push() {
        let g = grid();
        let mut buf = HistoryBuffer::from_fn(&g, 4, 0.5, |_, _| 0.0).unwrap();
        buf.push(Field::from_fn(Arc::clone(&g), |x| x).unwrap())
            .unwrap();
        assert_eq!(buf.delayed_state().linf_norm(), 0.0);
    }

    #[test]
    fn memory_integral_zero_weight() {
        let g = grid();
        let buf = HistoryBuffer::from_fn(&g, 8, 0.125, |x, _| x.cos()).unwrap();
        let zero = Field::zeros(Arc::clone(&g));
        assert_eq!(buf.memory_integral(&zero).unwrap(), 0.0);
    }

    #[test]
    fn memory_integral_matches_closed_form() {
        // u = 1, |lambda| = 1, tau = 1 on [-L, L):
        // (1/2) * 2L * int_{-1}^{0} e^s ds = L (1 - e^{-1}).
        let g = grid();
        let ones = Field::from_fn(Arc::clone(&g), |_| 1.0).unwrap();
        let l = g.half_width();
        let exact = l * (1.0 - (-1.0f64).exp());

        let buf = HistoryBuffer::from_fn(&g, 100, 0.01, |_, _| 1.0).unwrap();
        let approx = buf.memory_integral(&ones).unwrap();
        assert!(
            ((approx - exact) / exact).abs() < 1e-5,
            "trapezoid value {approx} vs exact {exact}"
        );
    }

    #[test]
    fn memory_integral_is_second_order_in_n_tau() {
        let g = grid();
        let ones = Field::from_fn(Arc::clone(&g), |_| 1.0).unwrap();
        let l = g.half_width();
        let exact = l * (1.0 - (-1.0f64).exp());
        let err = |n_tau: usize| {
            let buf = HistoryBuffer::from_fn(&g, n_tau, 1.0 / n_tau as f64, |_, _| 1.0).unwrap();
            (buf.memory_integral(&ones).unwrap() - exact).abs()
        };
        let ratio = err(50) / err(100);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn memory_integral_rejects_negative_weight() {
        let g = grid();
        let buf = HistoryBuffer::from_fn(&g, 2, 0.5, |_, _| 1.0).unwrap();
        let bad = Field::from_fn(Arc::clone(&g), |x| x).unwrap();
        assert!(buf.memory_integral(&bad).is_err());
    }

    #[test]
    fn memory_integral_sign_flip_invariant() {
        let g = grid();
        let lam = Field::from_fn(Arc::clone(&g), |x| (-x * x).exp()).unwrap();
        let buf = HistoryBuffer::from_fn(&g, 16, 0.0625, |x, s| (x + s).sin()).unwrap();
        let flipped = HistoryBuffer::from_fn(&g, 16, 0.0625, |x, s| -(x + s).sin()).unwrap();
        let a = buf.memory_integral(&lam).unwrap();
        let b = flipped.memory_integral(&lam).unwrap();
        assert!(a >= 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let g = grid();
        let mut buf =
            HistoryBuffer::from_fn(&g, 5, 0.2, |x, s| (x * 1.7 + s).sin() * 0.37).unwrap();
        for i in 0..7 {
            buf.push(Field::from_fn(Arc::clone(&g), |x| (x + i as f64).cos()).unwrap())
                .unwrap();
        }

        let mut bytes = Vec::new();
        buf.write_checkpoint(&mut bytes).unwrap();
        let restored = HistoryBuffer::<f64>::read_checkpoint(bytes.as_slice()).unwrap();

        assert_eq!(restored.n_tau(), buf.n_tau());
        assert_eq!(restored.dt(), buf.dt());
        assert_eq!(restored.current_time(), buf.current_time());
        for i in 0..buf.slot_count() {
            assert_eq!(restored.slot(i).values(), buf.slot(i).values());
        }
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let bytes = vec![0u8; 12];
        assert!(HistoryBuffer::<f64>::read_checkpoint(bytes.as_slice()).is_err());
    }

    #[test]
    fn separable_history_init_scales_in_time() {
        let g = grid();
        let init = HistoryInit::Separable {
            spatial: CoefficientSpec::GaussianBump {
                amplitude: 1.0,
                center: 0.0,
                width: 1.0,
            },
            temporal: TimeProfile::Exponential { rate: 1.0 },
        };
        let buf = init.build(&g, 4, 0.25).unwrap();
        let newest = buf.newest();
        for (a, b) in buf.delayed_state().values().iter().zip(newest.values()) {
            assert!((a - b * (-1.0f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn per_slot_history_init_checks_slot_count() {
        let g = grid();
        let slots = vec![
            CoefficientSpec::Constant { value: 1.0 },
            CoefficientSpec::Constant { value: 2.0 },
            CoefficientSpec::Constant { value: 3.0 },
        ];
        let init = HistoryInit::PerSlot { slots };
        let buf = init.build(&g, 2, 0.5).unwrap();
        assert_eq!(buf.delayed_state().values()[0], 1.0);
        assert_eq!(buf.newest().values()[0], 3.0);

        assert!(init.build(&g, 3, 0.5).is_err());
    }
}
