//! Real-valued fields sampled on a [`Grid`], with the norms and pairings
//! used by the energy functionals.
//!
//! `L^p` norms use the rectangle rule `(sum |f_j|^p dx)^(1/p)`, which is
//! exact for piecewise-constant data on the mesh and spectrally accurate for
//! smooth fields. The `L^2` pairing is `sum f_j g_j dx`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grid_mismatch, Grid};
use crate::scalar::{cast, Scalar};

/// A real field bound to one grid. Values are finite by construction.
#[derive(Debug, Clone)]
pub struct Field<T: Scalar> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Scalar> Field<T> {
    /// Wraps raw samples, rejecting non-finite entries.
    pub fn from_values(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidParameter {
                name: "values",
                message: format!(
                    "expected {} samples, got {}",
                    grid.node_count(),
                    values.len()
                ),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        Ok(Field { grid, values })
    }

    /// Samples `f(x)` at every node.
    pub fn from_fn(grid: Arc<Grid<T>>, f: impl Fn(T) -> T) -> Result<Self> {
        let values: Vec<T> = grid.nodes().iter().map(|&x| f(x)).collect();
        Field::from_values(grid, values)
    }

    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let values = vec![T::zero(); grid.node_count()];
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shares_grid(&self, other: &Field<T>) -> bool {
        self.grid.as_ref() == other.grid.as_ref()
    }

    fn check_same_grid(&self, other: &Field<T>) -> Result<()> {
        if self.shares_grid(other) {
            Ok(())
        } else {
            Err(grid_mismatch(self.grid.as_ref(), other.grid.as_ref()))
        }
    }

    /// Spectral coefficients of the field.
    pub fn to_spectrum(&self) -> Vec<Complex<T>> {
        self.grid.forward(&self.values)
    }

    /// Rebuilds a field from spectral coefficients.
    pub fn from_spectrum(grid: Arc<Grid<T>>, spectrum: &[Complex<T>]) -> Result<Self> {
        let values = grid.inverse(spectrum);
        Field::from_values(grid, values)
    }

    /// Spectral derivative of order 1, 2 or 3.
    pub fn derivative(&self, order: u32) -> Result<Field<T>> {
        let mult = self.grid.derivative_multiplier(order)?;
        let mut spec = self.to_spectrum();
        for (c, m) in spec.iter_mut().zip(&mult) {
            *c = *c * *m;
        }
        let values = self.grid.inverse(&spec);
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    /// `(sum |f_j|^p dx)^(1/p)` for finite `p >= 1`, `max |f_j|` for
    /// `p = infinity`.
    pub fn lp_norm(&self, p: T) -> Result<T> {
        if p.is_nan() || p < T::one() {
            return Err(Error::InvalidParameter {
                name: "p",
                message: format!("norm exponent must satisfy p >= 1, got {p}"),
            });
        }
        if p.is_infinite() {
            return Ok(self.linf_norm());
        }
        let dx = self.grid.spacing();
        let sum = self
            .values
            .iter()
            .map(|v| v.abs().powf(p))
            .fold(T::zero(), |a, b| a + b);
        Ok((sum * dx).powf(T::one() / p))
    }

    /// `L^2` norm; identical to `lp_norm(2)` but avoids `powf`.
    pub fn l2_norm(&self) -> T {
        let dx = self.grid.spacing();
        let sum = self
            .values
            .iter()
            .map(|&v| v * v)
            .fold(T::zero(), |a, b| a + b);
        (sum * dx).sqrt()
    }

    pub fn linf_norm(&self) -> T {
        self.values
            .iter()
            .map(|v| v.abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Discrete `L^2` pairing `sum f_j g_j dx`.
    pub fn inner_product(&self, other: &Field<T>) -> Result<T> {
        self.check_same_grid(other)?;
        let dx = self.grid.spacing();
        let sum = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .fold(T::zero(), |a, b| a + b);
        Ok(sum * dx)
    }

    /// `sum f_j dx`, the discrete integral over the box.
    pub fn mass(&self) -> T {
        let dx = self.grid.spacing();
        self.values.iter().fold(T::zero(), |a, &b| a + b) * dx
    }

    pub fn scaled(&self, c: T) -> Field<T> {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn abs(&self) -> Field<T> {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn add(&self, other: &Field<T>) -> Result<Field<T>> {
        self.check_same_grid(other)?;
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Field<T>> {
        self.check_same_grid(other)?;
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field<T>) -> Result<Field<T>> {
        self.check_same_grid(other)?;
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a * b)
                .collect(),
        })
    }

    /// Largest `|f(x)|` over nodes with `|x| > L/2`; zero deviation means the
    /// field is effectively supported in the inner half of the box.
    pub fn max_outside_half_box(&self) -> T {
        let half = self.grid.half_width() * cast::<T>(0.5);
        self.grid
            .nodes()
            .iter()
            .zip(&self.values)
            .filter(|(x, _)| x.abs() > half)
            .map(|(_, v)| v.abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}

/// Plain-data form of a field for structured reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldData<T: Scalar> {
    pub half_width: T,
    pub node_count: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> From<&Field<T>> for FieldData<T> {
    fn from(f: &Field<T>) -> Self {
        FieldData {
            half_width: f.grid().half_width(),
            node_count: f.grid().node_count(),
            values: f.values().to_vec(),
        }
    }
}

impl<T: Scalar> FieldData<T> {
    pub fn into_field(self) -> Result<Field<T>> {
        let grid = Grid::new(self.half_width, self.node_count)?;
        Field::from_values(grid, self.values)
    }
}
