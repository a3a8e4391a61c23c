//! Complex scalar fields and real Fourier multipliers on a grid.
//!
//! A [`ComplexField`] stores `N^n` samples in row-major order together with
//! its [`Grid`]; a [`Multiplier`] stores one real symbol value per Fourier
//! mode in the same layout. Construction validates shape and finiteness,
//! so downstream numerics never have to re-check either.

use num_complex::Complex64;

use crate::error::SrspError;
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    /// Wraps sample values after checking length and finiteness.
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self, SrspError> {
        if values.len() != grid.total_points() {
            return Err(SrspError::Field(format!(
                "expected {} samples, got {}",
                grid.total_points(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(SrspError::Field(format!(
                "non-finite sample at flat index {i}"
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.total_points());
        Self { grid, values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_raw(grid.clone(), vec![Complex64::new(0.0, 0.0); grid.total_points()])
    }

    /// Samples `f` at every grid point; `f` receives physical coordinates.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> Complex64) -> Result<Self, SrspError> {
        let values = (0..grid.total_points())
            .map(|i| f(grid.coordinates(i)))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Discrete inner product `h^n Σ_x conj(self) · other` (antilinear in
    /// the first slot).
    pub fn inner(&self, other: &Self) -> Result<Complex64, SrspError> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let sum: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(sum * self.grid.cell_measure())
    }

    /// Discrete `L²` norm, `(h^n Σ|ψ|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (sum * self.grid.cell_measure()).sqrt()
    }

    /// Largest sample modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Pointwise difference on a shared grid.
    pub fn sub(&self, other: &Self) -> Result<Self, SrspError> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self::from_raw(self.grid.clone(), values))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let values = self.values.iter().map(|v| v * factor).collect();
        Self::from_raw(self.grid.clone(), values)
    }
}

/// Real symbol sampled on the Fourier modes of a grid, row-major in FFT
/// ordering (same layout as transformed fields).
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    grid: Grid,
    values: Vec<f64>,
}

impl Multiplier {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self, SrspError> {
        if values.len() != grid.total_points() {
            return Err(SrspError::Field(format!(
                "expected {} symbol values, got {}",
                grid.total_points(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SrspError::Field(format!(
                "non-finite symbol value at flat index {i}"
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f` on every Fourier mode; `f` receives the wavevector.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Result<Self, SrspError> {
        let values = (0..grid.total_points())
            .map(|i| f(grid.wavevector(i)))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| v.abs().max(m))
    }
}

pub(crate) fn ensure_same_grid(a: &Grid, b: &Grid) -> Result<(), SrspError> {
    if a == b {
        Ok(())
    } else {
        Err(SrspError::Field(format!(
            "grid mismatch: {}^{} (L = {}) vs {}^{} (L = {})",
            a.points(),
            a.dim(),
            a.box_length(),
            b.points(),
            b.dim(),
            b.box_length()
        )))
    }
}
