//! Mixed states: weighted orthonormal families and their kernels.
//!
//! A mixed state is a finite family `(λ_k, ψ_k)` of occupation weights and
//! pairwise orthonormal components on a shared grid. Weights must be
//! non-negative and sum to one; a deviation inside [`WEIGHT_SUM_TOL`] is
//! renormalised away, anything larger is rejected. Orthonormality is
//! enforced at construction against the tolerance passed by the caller
//! (default [`DEFAULT_ORTHONORMALITY_TOL`]).
//!
//! The density-matrix kernel `ρ(x, y) = Σ_k λ_k ψ_k(x) conj(ψ_k(y))` is
//! materialised as a dense matrix only behind a hard row guard; its
//! diagonal is the particle density and its spectrum (as the integral
//! operator with measure `h^n`) reproduces the weights.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::SrspError;
use crate::field::{ensure_same_grid, ComplexField};
use crate::fourier;
use crate::grid::Grid;

/// Tolerated deviation of `Σ λ_k` from one before rejection.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Default orthonormality tolerance at construction.
pub const DEFAULT_ORTHONORMALITY_TOL: f64 = 1e-10;

/// Largest dense kernel (rows = grid points) this crate will materialise.
pub const KERNEL_ROW_GUARD: usize = 4096;

#[derive(Debug, Clone)]
pub struct MixedState {
    weights: Vec<f64>,
    components: Vec<ComplexField>,
    tol: f64,
}

/// Equality is over the data (weights and components); the validation
/// tolerance is a construction setting, not part of the state.
impl PartialEq for MixedState {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights && self.components == other.components
    }
}

impl MixedState {
    /// Validates and builds a mixed state. `tol` bounds the admissible
    /// orthonormality residual `max_{j,l} |⟨ψ_j, ψ_l⟩ − δ_{jl}|`.
    pub fn new(
        weights: Vec<f64>,
        components: Vec<ComplexField>,
        tol: f64,
    ) -> Result<Self, SrspError> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(SrspError::State(format!(
                "need matching non-empty weights and components (got {} and {})",
                weights.len(),
                components.len()
            )));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(SrspError::State(format!(
                "orthonormality tolerance must be positive (got {tol})"
            )));
        }
        let grid = components[0].grid();
        for c in &components[1..] {
            ensure_same_grid(grid, c.grid()).map_err(|e| SrspError::State(e.to_string()))?;
        }
        if let Some((k, &w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(SrspError::State(format!("weight {k} is invalid: {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(SrspError::State(format!(
                "weights sum to {sum:.17}, beyond the renormalisation window of {WEIGHT_SUM_TOL:.0e} around 1"
            )));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        let state = Self {
            weights,
            components,
            tol,
        };
        let residual = state.orthonormality_residual();
        if residual > tol {
            return Err(SrspError::State(format!(
                "orthonormality residual {residual:.3e} exceeds tolerance {tol:.0e}"
            )));
        }
        Ok(state)
    }

    /// Rebuilds a state from parts already known to satisfy the invariants
    /// (propagator output, snapshot payloads written by this crate).
    pub(crate) fn from_validated_parts(
        weights: Vec<f64>,
        components: Vec<ComplexField>,
        tol: f64,
    ) -> Self {
        Self {
            weights,
            components,
            tol,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[ComplexField] {
        &self.components
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Per-component squared charges `‖ψ_k‖²_{L²}`.
    pub fn charges(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.l2_norm().powi(2)).collect()
    }

    /// `ℋ^s` norm of the family, `(Σ_k λ_k ‖ψ_k‖²_{H^s})^{1/2}`.
    pub fn weighted_norm(&self, s: f64) -> f64 {
        weighted_norm_of_fields(&self.weights, &self.components, s)
    }

    /// Largest deviation of the Gram matrix from the identity,
    /// `max_{j,l} |⟨ψ_j, ψ_l⟩ − δ_{jl}|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let k = self.components.len();
        let mut worst = 0.0f64;
        for j in 0..k {
            for l in j..k {
                let inner = self.components[j]
                    .inner(&self.components[l])
                    .expect("components share a grid");
                let target = if j == l { 1.0 } else { 0.0 };
                worst = worst.max((inner - target).norm());
            }
        }
        worst
    }

    /// `ℋ^s` distance to another state carrying the same weights.
    pub fn weighted_distance(&self, other: &Self, s: f64) -> Result<f64, SrspError> {
        if self.len() != other.len() {
            return Err(SrspError::State(format!(
                "component count mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for (a, b) in self.weights.iter().zip(&other.weights) {
            if (a - b).abs() > 1e-14 {
                return Err(SrspError::State(format!(
                    "weight mismatch: {a} vs {b}"
                )));
            }
        }
        let diffs: Result<Vec<ComplexField>, SrspError> = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(weighted_norm_of_fields(&self.weights, &diffs?, s))
    }

    /// Applies `f` to every component in parallel, keeping weights and
    /// tolerance. Component order (and hence round-off) is preserved.
    pub(crate) fn map_components(
        &self,
        f: impl Fn(&ComplexField) -> ComplexField + Sync,
    ) -> Self {
        let components: Vec<ComplexField> = self.components.par_iter().map(&f).collect();
        Self {
            weights: self.weights.clone(),
            components,
            tol: self.tol,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.is_finite())
    }

    /// Dense density-matrix kernel `ρ(x, y) = Σ_k λ_k ψ_k(x) conj(ψ_k(y))`.
    /// Guarded: refuses grids with more than [`KERNEL_ROW_GUARD`] points.
    pub fn density_matrix(&self) -> Result<Kernel, SrspError> {
        let rows = self.grid().total_points();
        if rows > KERNEL_ROW_GUARD {
            return Err(SrspError::KernelTooLarge {
                rows,
                limit: KERNEL_ROW_GUARD,
            });
        }
        let mut values = vec![Complex64::default(); rows * rows];
        for (w, comp) in self.weights.iter().zip(&self.components) {
            let v = comp.values();
            for x in 0..rows {
                let wx = w * v[x];
                let row = &mut values[x * rows..(x + 1) * rows];
                for (y, slot) in row.iter_mut().enumerate() {
                    *slot += wx * v[y].conj();
                }
            }
        }
        Ok(Kernel {
            grid: self.grid().clone(),
            rows,
            values,
        })
    }
}

/// `(Σ_k λ_k ‖f_k‖²_{H^s})^{1/2}` for raw field families (differences of
/// states, Hartree images); no orthonormality is implied.
pub fn weighted_norm_of_fields(weights: &[f64], fields: &[ComplexField], s: f64) -> f64 {
    weights
        .iter()
        .zip(fields)
        .map(|(w, f)| w * fourier::sobolev_norm(f, s, false).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Dense density-matrix kernel on a small grid.
#[derive(Debug, Clone)]
pub struct Kernel {
    grid: Grid,
    rows: usize,
    values: Vec<Complex64>,
}

impl Kernel {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Row-major entries, `entry(x, y) = ρ(x, y)`.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn entry(&self, x: usize, y: usize) -> Complex64 {
        self.values[x * self.rows + y]
    }

    /// Diagonal `ρ(x, x)`, which is the particle density (real parts; the
    /// imaginary parts vanish by construction).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows).map(|x| self.entry(x, x).re).collect()
    }

    /// Trace with the physical measure, `h^n Σ_x ρ(x, x)`; equals one for
    /// a normalised family.
    pub fn trace(&self) -> f64 {
        let raw: f64 = (0..self.rows).map(|x| self.entry(x, x).re).sum();
        raw * self.grid.cell_measure()
    }

    /// `max_{x,y} |ρ(x,y) − conj(ρ(y,x))|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..self.rows {
            for y in x..self.rows {
                worst = worst.max((self.entry(x, y) - self.entry(y, x).conj()).norm());
            }
        }
        worst
    }
}
