//! Pseudospectral toolkit for the semi-relativistic Schrödinger-Poisson
//! system of mixed quantum states on a periodic box.
//!
//! The model evolves a family of orthonormal components `ψ_1, …, ψ_K` with
//! occupation weights `λ_k ≥ 0, Σλ_k = 1` under
//!
//! ```text
//! i ∂_t ψ_k = (√(m² − Δ) − m) ψ_k + (w_γ ⋆ n) ψ_k,      n = Σ_k λ_k |ψ_k|²
//! ```
//!
//! where `w_γ(x) = g / |x|^γ` is a Riesz interaction kernel. All spatial
//! operators are diagonal in Fourier space and realised on a uniform grid
//! over `[0, L)^n`, `n ∈ {1, 2, 3}`, so the box plays the role of a large
//! periodic truncation of free space.
//!
//! Module layout:
//!
//! * [`grid`], [`field`], [`fourier`], [`symbols`]: grids, complex fields,
//!   transforms, Fourier multipliers and Sobolev norms.
//! * [`state`]: weighted orthonormal families and density-matrix kernels.
//! * [`hartree`]: densities, convolution potentials, energy functional.
//! * [`dynamics`]: free propagator, Strang splitting, Picard (Duhamel)
//!   windows, the non-relativistic and potential-only comparison flows.
//! * [`analysis`]: conservation reports, growth envelopes, mass-limit
//!   ladders and functional-inequality ratio probes.
//! * [`config`], [`presets`], [`snapshot`], [`runner`]: run configuration,
//!   initial data, binary snapshots and the batch driver used by the CLI.
//!
//! The companion guide under `book/` walks through the same modules with
//! runnable examples; its snippets are compiled as doc-tests.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod fourier;
pub mod grid;
pub mod hartree;
pub mod presets;
pub mod runner;
pub mod snapshot;
pub mod state;
pub mod symbols;

pub use error::SrspError;
pub use field::{ComplexField, Multiplier};
pub use grid::Grid;
pub use state::MixedState;
