//! Discrete Fourier transforms, multiplier application and Sobolev norms.
//!
//! Conventions. The forward transform returns unnormalised coefficients
//! `c(k) = Σ_x ψ(x) e^{−ik·x}`; the inverse carries the `1/N^n` factor so
//! the pair composes to the identity. Physical normalisation enters only
//! through the Parseval weight `h^n / N^n`:
//!
//! ```text
//! h^n Σ_x |ψ(x)|² = (h^n / N^n) Σ_k |c(k)|²
//! ```
//!
//! which makes `|ψ̂(k)|² = (h^n/N^n)|c(k)|²` the squared coefficient
//! against the orthonormal basis `e^{ik·x} / L^{n/2}`. Sobolev norms and
//! spectral quadratic forms all sum that weighted power spectrum.

use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::SrspError;
use crate::field::{ensure_same_grid, ComplexField, Multiplier};
use crate::grid::Grid;

static PLANNER: Lazy<Mutex<FftPlanner<f64>>> = Lazy::new(|| Mutex::new(FftPlanner::new()));

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.lock().unwrap().plan_fft(len, direction)
}

/// Visits the base flat index of every grid line along `axis`.
fn for_each_line_base(grid: &Grid, axis: usize, mut f: impl FnMut(usize)) {
    let n = grid.points();
    let lines = grid.total_points() / n;
    for r in 0..lines {
        let mut rest = r;
        let mut base = 0;
        for a in (0..grid.dim()).rev() {
            if a == axis {
                continue;
            }
            base += (rest % n) * grid.stride(a);
            rest /= n;
        }
        f(base);
    }
}

fn transform_in_place(grid: &Grid, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.points();
    let fft = plan(n, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        if stride == 1 {
            for line in data.chunks_exact_mut(n) {
                fft.process_with_scratch(line, &mut scratch);
            }
        } else {
            let mut line = vec![Complex64::default(); n];
            for_each_line_base(grid, axis, |base| {
                for j in 0..n {
                    line[j] = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for j in 0..n {
                    data[base + j * stride] = line[j];
                }
            });
        }
    }
}

/// Unnormalised forward coefficients `c(k) = Σ_x ψ(x) e^{−ik·x}` in FFT
/// mode ordering.
pub fn forward(field: &ComplexField) -> Vec<Complex64> {
    let mut data = field.values().to_vec();
    transform_in_place(field.grid(), &mut data, FftDirection::Forward);
    data
}

/// Inverse of [`forward`]; includes the `1/N^n` normalisation.
pub fn inverse(grid: &Grid, mut coeffs: Vec<Complex64>) -> Vec<Complex64> {
    transform_in_place(grid, &mut coeffs, FftDirection::Inverse);
    let scale = 1.0 / grid.total_points() as f64;
    for v in &mut coeffs {
        *v *= scale;
    }
    coeffs
}

/// Parseval weight per squared raw coefficient, `h^n / N^n`.
#[inline]
pub(crate) fn coefficient_weight(grid: &Grid) -> f64 {
    grid.cell_measure() / grid.total_points() as f64
}

/// Weighted power spectrum `(h^n/N^n) |c(k)|²`; sums to the squared
/// discrete `L²` norm.
pub fn power_spectrum(field: &ComplexField) -> Vec<f64> {
    let w = coefficient_weight(field.grid());
    forward(field).iter().map(|c| w * c.norm_sqr()).collect()
}

/// Transforms, maps each raw coefficient through `f(flat, c)`, transforms
/// back. The workhorse behind multiplier and propagator application.
pub(crate) fn map_spectrum(
    field: &ComplexField,
    f: impl Fn(usize, Complex64) -> Complex64,
) -> ComplexField {
    let grid = field.grid().clone();
    let mut coeffs = forward(field);
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c = f(i, *c);
    }
    let values = inverse(&grid, coeffs);
    ComplexField::from_raw(grid, values)
}

/// Applies a real Fourier multiplier: transform, scale each mode by the
/// symbol, transform back. Exact (to round-off) on single modes.
pub fn apply_multiplier(field: &ComplexField, symbol: &Multiplier) -> Result<ComplexField, SrspError> {
    ensure_same_grid(field.grid(), symbol.grid())?;
    let values = symbol.values();
    let out = map_spectrum(field, |i, c| c * values[i]);
    if !out.is_finite() {
        return Err(SrspError::Field(
            "multiplier application produced non-finite values".into(),
        ));
    }
    Ok(out)
}

/// Sobolev weight of one mode: `(1 + |k|²)^s`, or `|k|^{2s}` in the
/// homogeneous case with the zero mode contributing nothing (for `s = 0`
/// both versions reduce to plain `L²`).
#[inline]
pub(crate) fn sobolev_weight(k_squared: f64, s: f64, homogeneous: bool) -> f64 {
    if homogeneous {
        if k_squared == 0.0 {
            if s == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            k_squared.powf(s)
        }
    } else {
        (1.0 + k_squared).powf(s)
    }
}

/// Discrete Sobolev norm of order `s`. With `homogeneous = false` this is
/// `(Σ_k (1+|k|²)^s |ψ̂(k)|²)^{1/2}`; the homogeneous variant uses
/// `|k|^{2s}` and quotients out the constant mode. `s = 0` recovers the
/// `L²` norm in both cases.
pub fn sobolev_norm(field: &ComplexField, s: f64, homogeneous: bool) -> f64 {
    let grid = field.grid();
    let w = coefficient_weight(grid);
    let coeffs = forward(field);
    let mut acc = 0.0;
    for (i, c) in coeffs.iter().enumerate() {
        acc += sobolev_weight(grid.k_squared(i), s, homogeneous) * c.norm_sqr();
    }
    (acc * w).sqrt()
}

/// Spectral quadratic form `Σ_k σ(k) |ψ̂(k)|²` with Parseval-normalised
/// coefficients. Used by the kinetic part of the energy functional.
pub fn symbol_quadratic_form(field: &ComplexField, symbol: &Multiplier) -> Result<f64, SrspError> {
    ensure_same_grid(field.grid(), symbol.grid())?;
    let w = coefficient_weight(field.grid());
    let coeffs = forward(field);
    let sym = symbol.values();
    let mut acc = 0.0;
    for (i, c) in coeffs.iter().enumerate() {
        acc += sym[i] * c.norm_sqr();
    }
    Ok(acc * w)
}

#[cfg(test)]
pub(crate) mod testing {
    //! Direct-evaluation transform used as an independent oracle in tests.

    use super::*;

    /// `O(total²)` forward DFT evaluated mode by mode from the definition.
    pub(crate) fn naive_forward(grid: &Grid, values: &[Complex64]) -> Vec<Complex64> {
        let total = grid.total_points();
        let mut out = vec![Complex64::default(); total];
        for (kf, slot) in out.iter_mut().enumerate() {
            let k = grid.wavevector(kf);
            let mut acc = Complex64::default();
            for (xf, v) in values.iter().enumerate() {
                let x = grid.coordinates(xf);
                let phase = -(k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
                acc += v * Complex64::from_polar(1.0, phase);
            }
            *slot = acc;
        }
        out
    }

    pub(crate) fn random_field(grid: &Grid, seed: u64) -> ComplexField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.total_points())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexField::new(grid, values).unwrap()
    }
}
