//! Uniform periodic grids over `[0, L)^n`.
//!
//! A grid fixes the spatial discretisation for every field in a run:
//! `points` samples per axis at spacing `h = L / points`, with the discrete
//! Fourier modes `k_j = 2π m_j / L`, `m_j ∈ {−N/2, …, N/2 − 1}` in standard
//! FFT ordering. All quadrature uses the cell measure `h^n`, so discrete
//! norms approximate their continuum counterparts without further scaling.

use crate::error::SrspError;

/// Smallest admissible per-axis resolution.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    points: usize,
    box_length: f64,
    /// Wavenumbers per axis in FFT order, `wavenumbers[i] = 2π m_i / L`.
    wavenumbers: Vec<f64>,
}

/// Builds a grid after validating dimension, resolution and box length.
///
/// `points` must be a power of two (index arithmetic and the split-radix
/// transforms rely on it) and at least [`MIN_POINTS`]; `dim` must be 1, 2
/// or 3; `box_length` must be positive and finite.
pub fn make_grid(dim: usize, points: usize, box_length: f64) -> Result<Grid, SrspError> {
    if !(1..=3).contains(&dim) {
        return Err(SrspError::Grid(format!(
            "dimension must be 1, 2 or 3 (got {dim})"
        )));
    }
    if points < MIN_POINTS || !points.is_power_of_two() {
        return Err(SrspError::Grid(format!(
            "points per axis must be a power of two >= {MIN_POINTS} (got {points})"
        )));
    }
    if !(box_length.is_finite() && box_length > 0.0) {
        return Err(SrspError::Grid(format!(
            "box length must be positive and finite (got {box_length})"
        )));
    }
    let base = 2.0 * std::f64::consts::PI / box_length;
    let half = points / 2;
    let wavenumbers = (0..points)
        .map(|i| {
            let m = if i < half {
                i as isize
            } else {
                i as isize - points as isize
            };
            base * m as f64
        })
        .collect();
    Ok(Grid {
        dim,
        points,
        box_length,
        wavenumbers,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Samples per axis.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Grid spacing `h = L / N`.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.points as f64
    }

    /// Total number of samples `N^n`.
    pub fn total_points(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Quadrature weight of one cell, `h^n`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Row-major stride of `axis` (axis 0 varies slowest).
    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    /// Decomposes a flat row-major index into per-axis indices.
    #[inline]
    pub fn axis_indices(&self, flat: usize) -> [usize; 3] {
        let n = self.points;
        let mut out = [0usize; 3];
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % n;
            rest /= n;
        }
        out
    }

    /// Physical coordinates of a flat index, `x_j = i_j · h`.
    #[inline]
    pub fn coordinates(&self, flat: usize) -> [f64; 3] {
        let idx = self.axis_indices(flat);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = idx[axis] as f64 * h;
        }
        x
    }

    /// Wavenumber vector of a flat index in FFT ordering.
    #[inline]
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let idx = self.axis_indices(flat);
        let mut k = [0.0; 3];
        for axis in 0..self.dim {
            k[axis] = self.wavenumbers[idx[axis]];
        }
        k
    }

    /// `|k|²` of a flat index.
    #[inline]
    pub fn k_squared(&self, flat: usize) -> f64 {
        let k = self.wavevector(flat);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    /// Integer mode indices `m_j ∈ {−N/2, …, N/2−1}` of a flat index.
    #[inline]
    pub fn mode_indices(&self, flat: usize) -> [isize; 3] {
        let idx = self.axis_indices(flat);
        let n = self.points as isize;
        let mut m = [0isize; 3];
        for axis in 0..self.dim {
            let i = idx[axis] as isize;
            m[axis] = if i < n / 2 { i } else { i - n };
        }
        m
    }

    /// Flat index of integer modes (wrap-around FFT ordering). Modes must
    /// lie in the representable range per axis.
    pub fn flat_from_modes(&self, modes: &[isize]) -> Result<usize, SrspError> {
        if modes.len() != self.dim {
            return Err(SrspError::Grid(format!(
                "expected {} mode indices, got {}",
                self.dim,
                modes.len()
            )));
        }
        let n = self.points as isize;
        let mut flat = 0usize;
        for &m in modes {
            if m < -n / 2 || m >= n / 2 {
                return Err(SrspError::Grid(format!(
                    "mode index {m} outside representable range [{}, {})",
                    -n / 2,
                    n / 2
                )));
            }
            let i = if m < 0 { m + n } else { m } as usize;
            flat = flat * self.points + i;
        }
        Ok(flat)
    }

    /// Displacement `x − c` folded into `[−L/2, L/2)` per axis.
    #[inline]
    pub fn min_image(&self, x: f64, c: f64) -> f64 {
        let l = self.box_length;
        let mut d = (x - c) % l;
        if d < -l / 2.0 {
            d += l;
        } else if d >= l / 2.0 {
            d -= l;
        }
        d
    }
}
