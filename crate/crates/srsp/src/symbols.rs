//! Fourier symbols of the model operators.
//!
//! * Semi-relativistic kinetic energy: `a_m(k) = √(m² + |k|²) − m`, the
//!   symbol of `√(m² − Δ) − m`. It interpolates between `|k|` at `m = 0`
//!   and `|k|²/(2m)` as `m → ∞`, with `0 ≤ a_m(k) ≤ |k|` everywhere and
//!   `|a_m(k) − |k|²/(2m)| ≤ |k|⁴/(8m³)`.
//! * Non-relativistic kinetic energy: `|k|²/(2m)` for `m > 0`.
//! * Riesz interaction: the kernel `w(x) = g/|x|^γ` acts by convolution
//!   with symbol `ŵ(k) = g · c_{n,γ} |k|^{γ−n}` where
//!   `c_{n,γ} = 2^{n−γ} π^{n/2} Γ((n−γ)/2) / Γ(γ/2)`. The zero mode is
//!   set to 0, which fixes the additive gauge of the potential (mean-zero
//!   over the box) and leaves every observable unchanged.

use statrs::function::gamma::gamma;

use crate::error::SrspError;
use crate::field::Multiplier;
use crate::grid::Grid;

/// Checks the admissible Riesz exponent range: `0 < γ ≤ 1`, with `γ = 1`
/// excluded in one dimension (`|x|^{-1}` is not locally integrable there).
pub fn validate_riesz_exponent(dim: usize, gamma_exp: f64) -> Result<(), SrspError> {
    let ok = gamma_exp > 0.0 && (gamma_exp < 1.0 || (gamma_exp == 1.0 && dim >= 2));
    if ok {
        Ok(())
    } else {
        Err(SrspError::config(
            "gamma",
            format!(
                "interaction exponent must satisfy 0 < gamma {} 1 for dim = {dim} (got {gamma_exp})",
                if dim == 1 { "<" } else { "<=" }
            ),
        ))
    }
}

/// Normalisation constant of the Riesz symbol,
/// `c_{n,γ} = 2^{n−γ} π^{n/2} Γ((n−γ)/2) / Γ(γ/2)`.
pub fn riesz_constant(dim: usize, gamma_exp: f64) -> f64 {
    let n = dim as f64;
    2f64.powf(n - gamma_exp) * std::f64::consts::PI.powf(n / 2.0)
        * gamma((n - gamma_exp) / 2.0)
        / gamma(gamma_exp / 2.0)
}

/// Evaluates `√(m² + t) − m` for `t = |k|² ≥ 0` in the cancellation-free
/// form `t / (m + √(m² + t))`.
#[inline]
pub fn relativistic_dispersion(k_squared: f64, mass: f64) -> f64 {
    if k_squared == 0.0 {
        0.0
    } else {
        k_squared / (mass + (mass * mass + k_squared).sqrt())
    }
}

/// Symbol of the semi-relativistic kinetic operator `√(m² − Δ) − m` on the
/// grid modes. `mass = 0` yields `|k|` exactly.
pub fn kinetic_symbol(grid: &Grid, mass: f64) -> Result<Multiplier, SrspError> {
    if !(mass.is_finite() && mass >= 0.0) {
        return Err(SrspError::config(
            "mass",
            format!("mass must be finite and >= 0 (got {mass})"),
        ));
    }
    let values = (0..grid.total_points())
        .map(|i| relativistic_dispersion(grid.k_squared(i), mass))
        .collect();
    Multiplier::new(grid, values)
}

/// Symbol of the non-relativistic kinetic operator `−Δ/(2m)`.
pub fn nonrelativistic_symbol(grid: &Grid, mass: f64) -> Result<Multiplier, SrspError> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(SrspError::config(
            "mass",
            format!("non-relativistic flow needs mass > 0 (got {mass})"),
        ));
    }
    let values = (0..grid.total_points())
        .map(|i| grid.k_squared(i) / (2.0 * mass))
        .collect();
    Multiplier::new(grid, values)
}

/// Symbol of convolution against `g/|x|^γ`, with zero mode gauged to 0.
pub fn riesz_symbol(grid: &Grid, gamma_exp: f64, coupling: f64) -> Result<Multiplier, SrspError> {
    validate_riesz_exponent(grid.dim(), gamma_exp)?;
    if !coupling.is_finite() {
        return Err(SrspError::config(
            "coupling",
            format!("coupling must be finite (got {coupling})"),
        ));
    }
    let c = coupling * riesz_constant(grid.dim(), gamma_exp);
    let exponent = (gamma_exp - grid.dim() as f64) / 2.0;
    let values = (0..grid.total_points())
        .map(|i| {
            let ksq = grid.k_squared(i);
            if ksq == 0.0 {
                0.0
            } else {
                c * ksq.powf(exponent)
            }
        })
        .collect();
    Multiplier::new(grid, values)
}
