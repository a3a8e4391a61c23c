//! Hartree nonlinearity: particle density, convolution potential, energy.
//!
//! The density of a mixed state is `n = Σ_k λ_k |ψ_k|²`; the mean-field
//! potential is the Riesz convolution `V = w_γ ⋆ n`, evaluated in Fourier
//! space with the gauged symbol from [`crate::symbols::riesz_symbol`], so
//! `V` always averages to zero over the box. The energy functional
//!
//! ```text
//! ℰ(Ψ) = ½ Σ_k λ_k Σ_κ a_m(κ) |ψ̂_k(κ)|²  +  ¼ h^n Σ_x n(x) V(x)
//! ```
//!
//! is the conserved quantity tracked by the integrators.

use num_complex::Complex64;

use crate::error::SrspError;
use crate::field::{ensure_same_grid, ComplexField, Multiplier};
use crate::fourier;
use crate::grid::Grid;
use crate::state::{weighted_norm_of_fields, MixedState};

/// Most negative density sample tolerated before rejection.
pub const DENSITY_FLOOR: f64 = -1e-14;

/// Largest imaginary residue tolerated when realising the (real)
/// potential from its spectral representation, relative to the
/// potential's magnitude.
pub const IMAG_RESIDUE_TOL: f64 = 1e-13;

/// Non-negative particle density on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self, SrspError> {
        if values.len() != grid.total_points() {
            return Err(SrspError::Field(format!(
                "expected {} density samples, got {}",
                grid.total_points(),
                values.len()
            )));
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < DENSITY_FLOOR)
        {
            return Err(SrspError::Field(format!(
                "density sample {v:e} at flat index {i} below floor {DENSITY_FLOOR:e}"
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total mass `h^n Σ_x n(x)`; equals one for a normalised state.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_measure()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v))
    }
}

/// Real mean-zero Hartree potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    grid: Grid,
    values: Vec<f64>,
}

impl PotentialField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// `h^n Σ_x n(x) V(x)`, the pairing entering the interaction energy.
    pub fn pair_with(&self, dens: &DensityField) -> Result<f64, SrspError> {
        ensure_same_grid(&self.grid, dens.grid())?;
        let dot: f64 = self
            .values
            .iter()
            .zip(dens.values())
            .map(|(v, n)| v * n)
            .sum();
        Ok(dot * self.grid.cell_measure())
    }
}

/// Particle density `n = Σ_k λ_k |ψ_k|²`. Non-negative exactly, since it
/// is a sum of non-negative products.
pub fn density(state: &MixedState) -> DensityField {
    let grid = state.grid().clone();
    let mut values = vec![0.0f64; grid.total_points()];
    for (w, comp) in state.weights().iter().zip(state.components()) {
        for (slot, v) in values.iter_mut().zip(comp.values()) {
            *slot += w * v.norm_sqr();
        }
    }
    DensityField { grid, values }
}

/// Convolution potential `V = w ⋆ n` realised spectrally: transform the
/// density, scale by the symbol, transform back. The output must be real
/// up to [`IMAG_RESIDUE_TOL`] (the symbol is even), and inherits mean zero
/// from the gauged zero mode.
pub fn potential(dens: &DensityField, symbol: &Multiplier) -> Result<PotentialField, SrspError> {
    potential_filtered(dens, symbol, false)
}

/// [`potential`] with an optional 2/3-rule filter: when `dealias` is set,
/// density modes with an index above `N/3` on any axis are dropped before
/// the symbol acts, removing the part of the quadratic product `|ψ|²`
/// that aliasing folds back into the resolved band.
pub fn potential_filtered(
    dens: &DensityField,
    symbol: &Multiplier,
    dealias: bool,
) -> Result<PotentialField, SrspError> {
    ensure_same_grid(dens.grid(), symbol.grid())?;
    let grid = dens.grid().clone();
    let cutoff = (grid.points() / 3) as isize;
    let complex_dens = ComplexField::from_raw(
        grid.clone(),
        dens.values().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    );
    let mut coeffs = fourier::forward(&complex_dens);
    for (i, (c, s)) in coeffs.iter_mut().zip(symbol.values()).enumerate() {
        let keep = if dealias {
            let m = grid.mode_indices(i);
            (0..grid.dim()).all(|a| m[a].abs() <= cutoff)
        } else {
            true
        };
        *c = if keep { *c * *s } else { Complex64::default() };
    }
    let complex_v = fourier::inverse(&grid, coeffs);
    let residue = complex_v.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    let scale = complex_v.iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
    // Round-off in the transforms grows with the field, so the bound on the
    // spurious imaginary part is relative to the potential's magnitude.
    if residue > IMAG_RESIDUE_TOL * (1.0 + scale) {
        return Err(SrspError::Field(format!(
            "potential has imaginary residue {residue:e} above {IMAG_RESIDUE_TOL:e} relative; symbol is not even"
        )));
    }
    let values: Vec<f64> = complex_v.iter().map(|v| v.re).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SrspError::Field("potential is non-finite".into()));
    }
    Ok(PotentialField { grid, values })
}

/// Applies the Hartree term to every component: returns the family
/// `(V[Ψ] ψ_k)_k` (not orthonormal, hence plain fields). The potential is
/// evaluated once and shared across components.
pub fn apply_hartree(
    state: &MixedState,
    symbol: &Multiplier,
) -> Result<Vec<ComplexField>, SrspError> {
    let v = potential(&density(state), symbol)?;
    Ok(state
        .components()
        .iter()
        .map(|comp| {
            let values = comp
                .values()
                .iter()
                .zip(v.values())
                .map(|(psi, &pot)| psi * pot)
                .collect();
            ComplexField::from_raw(state.grid().clone(), values)
        })
        .collect())
}

/// Total energy `½⟨Ψ, H_m Ψ⟩ + ¼⟨Ψ, V[Ψ]Ψ⟩` with the kinetic part summed
/// spectrally per component and the interaction part paired in physical
/// space.
pub fn energy(state: &MixedState, kinetic: &Multiplier, symbol: &Multiplier) -> Result<f64, SrspError> {
    let mut kin = 0.0;
    for (w, comp) in state.weights().iter().zip(state.components()) {
        kin += w * fourier::symbol_quadratic_form(comp, kinetic)?;
    }
    let dens = density(state);
    let v = potential(&dens, symbol)?;
    Ok(0.5 * kin + 0.25 * v.pair_with(&dens)?)
}

/// Empirical Lipschitz quotient of the Hartree map between two states
/// sharing a weight vector:
///
/// ```text
/// ‖V[a]a − V[b]b‖_{ℋ^s} / ((‖a‖²_{ℋ^s} + ‖b‖²_{ℋ^s}) · ‖a − b‖_{ℋ^s})
/// ```
///
/// Degenerate inputs (`a = b`) are rejected rather than returning 0/0.
pub fn lipschitz_ratio(
    a: &MixedState,
    b: &MixedState,
    s: f64,
    symbol: &Multiplier,
) -> Result<f64, SrspError> {
    let dist = a.weighted_distance(b, s)?;
    if dist == 0.0 {
        return Err(SrspError::Degenerate(
            "states coincide; Lipschitz quotient is undefined".into(),
        ));
    }
    let fa = apply_hartree(a, symbol)?;
    let fb = apply_hartree(b, symbol)?;
    let diffs: Result<Vec<ComplexField>, SrspError> = fa
        .iter()
        .zip(&fb)
        .map(|(x, y)| x.sub(y))
        .collect();
    let num = weighted_norm_of_fields(a.weights(), &diffs?, s);
    let scale = a.weighted_norm(s).powi(2) + b.weighted_norm(s).powi(2);
    Ok(num / (scale * dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::symbols::{kinetic_symbol, riesz_symbol};

    fn plane_wave(grid: &Grid, modes: &[isize]) -> ComplexField {
        let flat = grid.flat_from_modes(modes).unwrap();
        let k = grid.wavevector(flat);
        let amp = 1.0 / grid.box_length().powf(grid.dim() as f64 / 2.0);
        ComplexField::from_fn(grid, |x| {
            Complex64::from_polar(amp, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
        })
        .unwrap()
    }

    #[test]
    fn density_has_unit_mass_and_is_nonnegative() {
        let g = make_grid(1, 64, 4.0).unwrap();
        let state = MixedState::new(
            vec![0.7, 0.3],
            vec![plane_wave(&g, &[1]), plane_wave(&g, &[-2])],
            1e-10,
        )
        .unwrap();
        let n = density(&state);
        assert!((n.mass() - 1.0).abs() < 1e-13, "mass {}", n.mass());
        assert!(n.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn density_floor_is_enforced_on_external_data() {
        let g = make_grid(1, 8, 1.0).unwrap();
        assert!(DensityField::new(&g, vec![-1e-13; 8]).is_err());
        assert!(DensityField::new(&g, vec![-5e-15; 8]).is_ok(), "round-off negativity passes");
    }

    #[test]
    fn single_mode_density_yields_closed_form_potential() {
        // n(x) = A(1 + ½ cos(k₀ x)) responds with V = A/2 · ŵ(k₀) cos(k₀ x):
        // the constant is gauged away, the oscillation is scaled by the symbol.
        let g = make_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let flat = g.flat_from_modes(&[3]).unwrap();
        let k0 = g.wavevector(flat)[0];
        let amp = 0.8;
        let values: Vec<f64> = (0..g.total_points())
            .map(|i| amp * (1.0 + 0.5 * (k0 * g.coordinates(i)[0]).cos()))
            .collect();
        let dens = DensityField::new(&g, values).unwrap();
        let symbol = riesz_symbol(&g, 0.5, 1.0).unwrap();
        let v = potential(&dens, &symbol).unwrap();
        let w_k0 = symbol.values()[flat];
        let mut worst = 0.0f64;
        for i in 0..g.total_points() {
            let want = amp * 0.5 * w_k0 * (k0 * g.coordinates(i)[0]).cos();
            worst = worst.max((v.values()[i] - want).abs());
        }
        assert!(worst < 1e-13, "single-mode response defect {worst}");
        assert!(v.mean().abs() < 1e-14, "potential mean {}", v.mean());
    }

    #[test]
    fn potential_is_mean_zero_for_generic_densities() {
        let g = make_grid(2, 16, 3.0).unwrap();
        let state = MixedState::new(
            vec![0.5, 0.5],
            vec![plane_wave(&g, &[1, 0]), plane_wave(&g, &[0, 2])],
            1e-10,
        )
        .unwrap();
        // Plane-wave densities are constant; superpose an orthonormal pair
        // with structure instead.
        let mixed = {
            let a = plane_wave(&g, &[1, 0]);
            let b = plane_wave(&g, &[0, 2]);
            let sum = ComplexField::new(
                &g,
                a.values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| (x + y) / 2f64.sqrt())
                    .collect(),
            )
            .unwrap();
            let diff = ComplexField::new(
                &g,
                a.values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| (x - y) / 2f64.sqrt())
                    .collect(),
            )
            .unwrap();
            MixedState::new(vec![0.6, 0.4], vec![sum, diff], 1e-10).unwrap()
        };
        drop(state);
        let symbol = riesz_symbol(&g, 1.0, -2.5).unwrap();
        let v = potential(&density(&mixed), &symbol).unwrap();
        assert!(v.mean().abs() < 1e-14, "gauged potential mean {}", v.mean());
    }

    #[test]
    fn hartree_image_shares_the_potential_across_components() {
        let g = make_grid(1, 32, 5.0).unwrap();
        let a = plane_wave(&g, &[1]);
        let b = plane_wave(&g, &[2]);
        let sum = ComplexField::new(
            &g,
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x + y) / 2f64.sqrt())
                .collect(),
        )
        .unwrap();
        let diff = ComplexField::new(
            &g,
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y) / 2f64.sqrt())
                .collect(),
        )
        .unwrap();
        let state = MixedState::new(vec![0.5, 0.5], vec![sum, diff], 1e-10).unwrap();
        let symbol = riesz_symbol(&g, 0.5, 1.0).unwrap();
        let image = apply_hartree(&state, &symbol).unwrap();
        let v = potential(&density(&state), &symbol).unwrap();
        for (comp, img) in state.components().iter().zip(&image) {
            for i in 0..g.total_points() {
                let want = comp.values()[i] * v.values()[i];
                assert!((img.values()[i] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn free_energy_of_plane_waves_is_half_the_dispersion() {
        // g = 0: ℰ = ½ Σ_k λ_k a_m(κ_k) for single-mode components.
        let g = make_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let mass = 1.3;
        let kin = kinetic_symbol(&g, mass).unwrap();
        let zero = riesz_symbol(&g, 0.5, 0.0).unwrap();
        let state = MixedState::new(
            vec![0.25, 0.75],
            vec![plane_wave(&g, &[2]), plane_wave(&g, &[-5])],
            1e-10,
        )
        .unwrap();
        let e = energy(&state, &kin, &zero).unwrap();
        let a = |m: isize| {
            let flat = g.flat_from_modes(&[m]).unwrap();
            kin.values()[flat]
        };
        let want = 0.5 * (0.25 * a(2) + 0.75 * a(-5));
        assert!((e - want).abs() < 1e-14, "{e} vs {want}");
    }

    #[test]
    fn energy_matches_direct_transform_path() {
        use crate::fourier::testing::naive_forward;
        let g = make_grid(1, 32, 4.0).unwrap();
        let a = plane_wave(&g, &[1]);
        let b = plane_wave(&g, &[3]);
        let sum = ComplexField::new(
            &g,
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x + y) / 2f64.sqrt())
                .collect(),
        )
        .unwrap();
        let diff = ComplexField::new(
            &g,
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y) / 2f64.sqrt())
                .collect(),
        )
        .unwrap();
        let state = MixedState::new(vec![0.5, 0.5], vec![sum, diff], 1e-10).unwrap();
        let mass = 2.0;
        let kin = kinetic_symbol(&g, mass).unwrap();
        let symbol = riesz_symbol(&g, 0.5, 1.0).unwrap();
        let e = energy(&state, &kin, &symbol).unwrap();

        // Kinetic part through the O(N²) transform.
        let wgt = g.cell_measure() / g.total_points() as f64;
        let mut kin_direct = 0.0;
        for (w, comp) in state.weights().iter().zip(state.components()) {
            let coeffs = naive_forward(&g, comp.values());
            for (i, c) in coeffs.iter().enumerate() {
                kin_direct += w * kin.values()[i] * c.norm_sqr() * wgt;
            }
        }
        // Interaction part through the O(N²) transform of the density.
        let dens = density(&state);
        let dvals: Vec<Complex64> = dens.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let dcoeffs = naive_forward(&g, &dvals);
        let mut inter_direct = 0.0;
        for (i, c) in dcoeffs.iter().enumerate() {
            // ⟨n, w ⋆ n⟩ = Σ_k ŵ(k)|ñ(k)|²/L in one dimension.
            inter_direct += symbol.values()[i] * c.norm_sqr();
        }
        inter_direct *= g.cell_measure().powi(2) / g.box_length();
        let want = 0.5 * kin_direct + 0.25 * inter_direct;
        assert!(
            (e - want).abs() < 1e-11 * want.abs().max(1.0),
            "energy {e} vs direct {want}"
        );
    }

    #[test]
    fn lipschitz_ratio_is_stable_under_perturbation_size() {
        let g = make_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let symbol = riesz_symbol(&g, 0.5, 1.0).unwrap();
        let base = plane_wave(&g, &[1]);
        let bump = plane_wave(&g, &[4]);
        let make = |eps: f64| {
            let norm = (1.0 + eps * eps).sqrt();
            let comp = ComplexField::new(
                &g,
                base.values()
                    .iter()
                    .zip(bump.values())
                    .map(|(b, p)| (b + eps * p) / norm)
                    .collect(),
            )
            .unwrap();
            MixedState::new(vec![1.0], vec![comp], 1e-10).unwrap()
        };
        let a = make(0.0);
        let mut ratios = Vec::new();
        for eps in [1e-2, 1e-3, 1e-4] {
            ratios.push(lipschitz_ratio(&a, &make(eps), 0.5, &symbol).unwrap());
        }
        for r in &ratios {
            assert!(r.is_finite() && *r > 0.0);
        }
        let spread = ratios.iter().fold(0.0f64, |m, r| m.max(*r))
            / ratios.iter().fold(f64::INFINITY, |m, r| m.min(*r));
        assert!(
            spread < 1.5,
            "quotient should stabilise as the perturbation shrinks: {ratios:?}"
        );
        assert!(
            lipschitz_ratio(&a, &a.clone(), 0.5, &symbol).is_err(),
            "coincident states are degenerate"
        );
    }

    #[test]
    fn density_is_phase_gauge_invariant() {
        let g = make_grid(1, 32, 3.0).unwrap();
        let comp = plane_wave(&g, &[2]);
        let state = MixedState::new(vec![1.0], vec![comp.clone()], 1e-10).unwrap();
        let rotated = MixedState::new(
            vec![1.0],
            vec![comp.scale(Complex64::from_polar(1.0, 1.234))],
            1e-10,
        )
        .unwrap();
        let n0 = density(&state);
        let n1 = density(&rotated);
        for (a, b) in n0.values().iter().zip(n1.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
