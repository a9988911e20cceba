//! Uniform periodic grid with spectral transforms.
//!
//! The spatial domain is the periodic box `[-L, L)` sampled at `N` equispaced
//! nodes `x_j = -L + j * (2L/N)`. Discrete transforms use the standard FFT
//! ordering; mode `m` in `{-N/2, ..., N/2-1}` carries the wavenumber
//! `k_m = pi * m / L`. Fields are real-valued: spectra are produced by a
//! complex transform of real input and the imaginary residue of an inverse
//! transform is checked and discarded.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

/// Periodic spatial discretization of the real line.
///
/// Immutable after construction; all operations are pure and safe to share
/// across threads.
pub struct Grid<T: Scalar> {
    half_width: T,
    node_count: usize,
    spacing: T,
    nodes: Vec<T>,
    /// Signed integer mode indices in FFT ordering: 0, 1, ..., N/2-1, -N/2, ..., -1.
    modes: Vec<i64>,
    /// Wavenumbers k_m = pi * m / L in the same ordering.
    wavenumbers: Vec<T>,
    fft_forward: Arc<dyn Fft<T>>,
    fft_inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_width", &self.half_width)
            .field("node_count", &self.node_count)
            .finish()
    }
}

impl<T: Scalar> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node_count == other.node_count && self.half_width == other.half_width
    }
}

impl<T: Scalar> Grid<T> {
    /// Builds the grid for the box `[-L, L)` with `N` nodes.
    ///
    /// `N` must be a power of two with `N >= 8` and `L` must be positive and
    /// finite.
    pub fn new(half_width: T, node_count: usize) -> Result<Arc<Self>> {
        if !(half_width.is_finite() && half_width > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "half_width",
                message: format!("must be positive and finite, got {half_width}"),
            });
        }
        if node_count < 8 || !node_count.is_power_of_two() {
            return Err(Error::InvalidParameter {
                name: "node_count",
                message: format!("must be a power of two >= 8, got {node_count}"),
            });
        }

        let n = node_count;
        let two_l = cast::<T>(2.0) * half_width;
        let spacing = two_l / cast::<T>(n as f64);
        let nodes: Vec<T> = (0..n)
            .map(|j| -half_width + spacing * cast::<T>(j as f64))
            .collect();
        let modes: Vec<i64> = (0..n)
            .map(|i| {
                if i < n / 2 {
                    i as i64
                } else {
                    i as i64 - n as i64
                }
            })
            .collect();
        let k0 = T::PI() / half_width;
        let wavenumbers: Vec<T> = modes.iter().map(|&m| k0 * cast::<T>(m as f64)).collect();

        let mut planner = FftPlanner::<T>::new();
        let fft_forward = planner.plan_fft_forward(n);
        let fft_inverse = planner.plan_fft_inverse(n);

        Ok(Arc::new(Grid {
            half_width,
            node_count,
            spacing,
            nodes,
            modes,
            wavenumbers,
            fft_forward,
            fft_inverse,
        }))
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Uniform node spacing `2L/N`.
    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    pub fn wavenumbers(&self) -> &[T] {
        &self.wavenumbers
    }

    /// Largest wavenumber magnitude, `pi * (N/2) / L`.
    pub fn k_max(&self) -> T {
        T::PI() * cast::<T>((self.node_count / 2) as f64) / self.half_width
    }

    /// Forward transform of a real field; coefficients are normalized so
    /// that mode `m` holds the amplitude of `exp(i k_m (x + L))`.
    pub fn forward(&self, values: &[T]) -> Vec<Complex<T>> {
        assert_eq!(values.len(), self.node_count, "value/grid length mismatch");
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft_forward.process(&mut buf);
        let scale = T::one() / cast::<T>(self.node_count as f64);
        for c in &mut buf {
            *c = *c * scale;
        }
        buf
    }

    /// Inverse transform back to a real field.
    ///
    /// The imaginary residue must be below `Scalar::imag_residue_tol()`
    /// relative to the real part; a larger residue indicates a broken
    /// conjugate symmetry and is treated as an internal invariant failure.
    pub fn inverse(&self, spectrum: &[Complex<T>]) -> Vec<T> {
        assert_eq!(
            spectrum.len(),
            self.node_count,
            "spectrum/grid length mismatch"
        );
        let mut buf = spectrum.to_vec();
        self.fft_inverse.process(&mut buf);

        let mut re_sq = T::zero();
        let mut im_sq = T::zero();
        for c in &buf {
            re_sq = re_sq + c.re * c.re;
            im_sq = im_sq + c.im * c.im;
        }
        let tol = T::imag_residue_tol();
        let floor = cast::<T>(1e-30);
        assert!(
            im_sq.sqrt() <= tol * re_sq.sqrt() + floor,
            "imaginary residue of inverse transform exceeds tolerance"
        );

        buf.into_iter().map(|c| c.re).collect()
    }

    /// Spectral multiplier of the derivative of the given order, `(i k)^order`,
    /// with the Nyquist mode zeroed for odd orders so the result stays real.
    pub fn derivative_multiplier(&self, order: u32) -> Result<Vec<Complex<T>>> {
        if !(1..=3).contains(&order) {
            return Err(Error::UnsupportedOrder { order });
        }
        let n = self.node_count;
        let mult = self
            .wavenumbers
            .iter()
            .zip(&self.modes)
            .map(|(&k, &m)| {
                if order % 2 == 1 && m == -((n / 2) as i64) {
                    return Complex::new(T::zero(), T::zero());
                }
                let ik = Complex::new(T::zero(), k);
                match order {
                    1 => ik,
                    2 => ik * ik,
                    _ => ik * ik * ik,
                }
            })
            .collect();
        Ok(mult)
    }

    /// Zeroes every mode with `|m| > N/3` (the 2/3 rule applied to the
    /// result of a quadratic product).
    pub fn dealias(&self, spectrum: &mut [Complex<T>]) {
        assert_eq!(
            spectrum.len(),
            self.node_count,
            "spectrum/grid length mismatch"
        );
        let cutoff = (self.node_count / 3) as i64;
        for (c, &m) in spectrum.iter_mut().zip(&self.modes) {
            if m.abs() > cutoff {
                *c = Complex::new(T::zero(), T::zero());
            }
        }
    }
}

/// Structural grid identity used for cross-grid checks: same node count and
/// half width. Survives checkpoint round-trips, unlike pointer identity.
pub fn same_grid<T: Scalar>(a: &Grid<T>, b: &Grid<T>) -> bool {
    a == b
}

pub(crate) fn grid_mismatch<T: Scalar>(a: &Grid<T>, b: &Grid<T>) -> Error {
    Error::GridMismatch {
        left_n: a.node_count(),
        left_l: a.half_width().to_f64().unwrap_or(f64::NAN),
        right_n: b.node_count(),
        right_l: b.half_width().to_f64().unwrap_or(f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_pi_8_matches_definition() {
        let g = Grid::<f64>::new(std::f64::consts::PI, 8).unwrap();
        assert!((g.spacing() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(g.modes(), &[0, 1, 2, 3, -4, -3, -2, -1]);
        // k_m = m for L = pi
        for (k, m) in g.wavenumbers().iter().zip(g.modes()) {
            assert!((k - *m as f64).abs() < 1e-14);
        }
        let mut sorted = g.modes().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (-4..4).collect::<Vec<_>>());
    }

    #[test]
    fn grid_spacing_512() {
        let g = Grid::<f64>::new(32.0, 512).unwrap();
        assert_eq!(g.spacing(), 0.125);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::<f64>::new(std::f64::consts::PI, 7).is_err());
        assert!(Grid::<f64>::new(1.0, 4).is_err());
        assert!(Grid::<f64>::new(1.0, 12).is_err());
        assert!(Grid::<f64>::new(0.0, 64).is_err());
        assert!(Grid::<f64>::new(-3.0, 64).is_err());
    }

    #[test]
    fn nodes_uniform_and_increasing() {
        let g = Grid::<f64>::new(5.0, 32).unwrap();
        let dx = g.spacing();
        for w in g.nodes().windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - dx).abs() < 1e-14);
        }
        assert_eq!(g.nodes()[0], -5.0);
    }

    #[test]
    fn dealias_cutoffs() {
        let g = Grid::<f64>::new(1.0, 8).unwrap();
        let mut spec = vec![Complex::new(1.0, 0.0); 8];
        g.dealias(&mut spec);
        let kept: Vec<i64> = g
            .modes()
            .iter()
            .zip(&spec)
            .filter(|(_, c)| c.re != 0.0)
            .map(|(m, _)| *m)
            .collect();
        assert_eq!(kept, vec![0, 1, 2, -2, -1]);

        let g16 = Grid::<f64>::new(1.0, 16).unwrap();
        let mut spec16 = vec![Complex::new(1.0, 0.0); 16];
        g16.dealias(&mut spec16);
        let survivors: Vec<i64> = g16
            .modes()
            .iter()
            .zip(&spec16)
            .filter(|(_, c)| c.re != 0.0)
            .map(|(m, _)| *m)
            .collect();
        assert!(survivors.iter().all(|m| m.abs() <= 5));
        assert_eq!(survivors.len(), 11);
    }

    #[test]
    fn dealias_keeps_band_limited_input() {
        let g = Grid::<f64>::new(std::f64::consts::PI, 32).unwrap();
        let values: Vec<f64> = g.nodes().iter().map(|&x| (2.0 * x).sin()).collect();
        let spec = g.forward(&values);
        let mut dealiased = spec.clone();
        g.dealias(&mut dealiased);
        for (a, b) in spec.iter().zip(&dealiased) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn round_trip_f32_smoke() {
        let g = Grid::<f32>::new(2.0f32, 16).unwrap();
        let values: Vec<f32> = g.nodes().iter().map(|&x| (x * 1.5).sin() + 0.25).collect();
        let back = g.inverse(&g.forward(&values));
        for (a, b) in values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
