//! Initial-data families: Gaussians, plane waves, random band-limited
//! fields, all orthonormalised where needed.
//!
//! Every preset is deterministic: the random family draws from a seeded
//! ChaCha stream and orthonormalisation runs sequentially in component
//! order, so a `(preset, seed)` pair reproduces the same state bit for bit.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{InitPreset, RunConfig};
use crate::error::SrspError;
use crate::field::ComplexField;
use crate::fourier;
use crate::grid::Grid;
use crate::state::MixedState;

/// A component whose norm collapses below this fraction of its original
/// size during orthogonalisation is reported as dependent.
pub const GRAM_SCHMIDT_BREAKDOWN: f64 = 1e-8;

/// Two-pass modified Gram-Schmidt. The second pass scrubs the `O(ε κ)`
/// residue the first one leaves for ill-conditioned inputs, landing the
/// family at round-off orthonormality.
pub fn gram_schmidt(fields: Vec<ComplexField>) -> Result<Vec<ComplexField>, SrspError> {
    let mut out: Vec<ComplexField> = Vec::with_capacity(fields.len());
    for (index, field) in fields.into_iter().enumerate() {
        let original = field.l2_norm();
        let mut current = field;
        for _pass in 0..2 {
            for prev in &out {
                let overlap = prev.inner(&current)?;
                let projected = prev.scale(overlap);
                current = current.sub(&projected)?;
            }
        }
        let norm = current.l2_norm();
        if norm < GRAM_SCHMIDT_BREAKDOWN * original || norm == 0.0 {
            return Err(SrspError::GramSchmidtBreakdown { index, norm });
        }
        out.push(current.scale(Complex64::new(1.0 / norm, 0.0)));
    }
    Ok(out)
}

/// Periodically wrapped Gaussian bumps `ψ_j ∝ exp(−d_j²/(2 w_j²))` with
/// `d_j` the minimum-image distance to the centre, orthonormalised.
/// Distinct centres separated by a few widths stay close to the raw bumps;
/// coincident centres trigger the breakdown error.
pub fn gaussian_family(
    grid: &Grid,
    centers: &[[f64; 3]],
    widths: &[f64],
) -> Result<Vec<ComplexField>, SrspError> {
    if centers.len() != widths.len() {
        return Err(SrspError::State(format!(
            "need one width per centre: {} centres, {} widths",
            centers.len(),
            widths.len()
        )));
    }
    if let Some((j, &w)) = widths.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
        return Err(SrspError::config(
            "preset_widths",
            format!("width {j} must be positive and finite (got {w})"),
        ));
    }
    let mut raw = Vec::with_capacity(centers.len());
    for (center, width) in centers.iter().zip(widths) {
        let field = ComplexField::from_fn(grid, |x| {
            let mut dsq = 0.0;
            for a in 0..grid.dim() {
                let d = grid.min_image(x[a], center[a]);
                dsq += d * d;
            }
            Complex64::new((-dsq / (2.0 * width * width)).exp(), 0.0)
        })?;
        let norm = field.l2_norm();
        raw.push(field.scale(Complex64::new(1.0 / norm, 0.0)));
    }
    gram_schmidt(raw)
}

/// Exactly orthonormal single-mode family `e^{ik_j·x} / L^{n/2}`.
/// Modes must be pairwise distinct and representable.
pub fn plane_wave_family(
    grid: &Grid,
    modes: &[Vec<isize>],
) -> Result<Vec<ComplexField>, SrspError> {
    for (i, a) in modes.iter().enumerate() {
        for b in modes.iter().skip(i + 1) {
            if a == b {
                return Err(SrspError::config(
                    "preset_modes",
                    format!("duplicate mode {a:?}; plane waves must be distinct"),
                ));
            }
        }
    }
    let amp = 1.0 / grid.box_length().powf(grid.dim() as f64 / 2.0);
    modes
        .iter()
        .map(|m| {
            let flat = grid.flat_from_modes(m)?;
            let k = grid.wavevector(flat);
            ComplexField::from_fn(grid, |x| {
                Complex64::from_polar(amp, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
            })
        })
        .collect()
}

/// First `count` lattice modes ordered by `|m|²`, ties broken
/// lexicographically: 0, ±e₁, ±e₂, … Deterministic default for the
/// plane-wave preset.
pub fn default_modes(dim: usize, count: usize) -> Vec<Vec<isize>> {
    let radius = 1 + (count as isize); // generous shell; pruned below
    let mut all: Vec<Vec<isize>> = Vec::new();
    let mut stack = vec![Vec::with_capacity(dim)];
    while let Some(prefix) = stack.pop() {
        if prefix.len() == dim {
            all.push(prefix);
            continue;
        }
        for m in -radius..=radius {
            let mut next = prefix.clone();
            next.push(m);
            stack.push(next);
        }
    }
    all.sort_by_key(|m| {
        let normsq: isize = m.iter().map(|x| x * x).sum();
        (normsq, m.clone())
    });
    all.truncate(count);
    all
}

/// One random field with spectrum supported on `‖m‖_∞ ≤ bandlimit`:
/// independent complex Gaussian coefficients, inverse transform, unit
/// `L²` normalisation.
pub fn random_band_limited(
    grid: &Grid,
    rng: &mut ChaCha8Rng,
    bandlimit: usize,
) -> Result<ComplexField, SrspError> {
    if bandlimit == 0 || bandlimit >= grid.points() / 2 {
        return Err(SrspError::config(
            "preset_bandlimit",
            format!(
                "band limit must lie in [1, {}) (got {bandlimit})",
                grid.points() / 2
            ),
        ));
    }
    let total = grid.total_points();
    let mut coeffs = vec![Complex64::default(); total];
    // Deterministic mode order: flat index order of the coefficient array.
    for (i, c) in coeffs.iter_mut().enumerate() {
        let m = grid.mode_indices(i);
        let inside = (0..grid.dim()).all(|a| m[a].unsigned_abs() <= bandlimit);
        if inside {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *c = Complex64::new(re, im);
        }
    }
    let values = fourier::inverse(grid, coeffs);
    let field = ComplexField::new(grid, values)?;
    let norm = field.l2_norm();
    if norm == 0.0 {
        return Err(SrspError::Degenerate("random draw produced the zero field".into()));
    }
    Ok(field.scale(Complex64::new(1.0 / norm, 0.0)))
}

/// Seeded family of random band-limited fields, orthonormalised.
pub fn random_orthonormal_family(
    grid: &Grid,
    count: usize,
    bandlimit: usize,
    seed: u64,
) -> Result<Vec<ComplexField>, SrspError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Result<Vec<ComplexField>, SrspError> = (0..count)
        .map(|_| random_band_limited(grid, &mut rng, bandlimit))
        .collect();
    gram_schmidt(raw?)
}

/// Builds the initial mixed state described by a run configuration.
pub fn init_preset(config: &RunConfig) -> Result<MixedState, SrspError> {
    let grid = config.grid()?;
    let components = match &config.init {
        InitPreset::Gaussian { centers, widths } => gaussian_family(&grid, centers, widths)?,
        InitPreset::PlaneWaves { modes } => plane_wave_family(&grid, modes)?,
        InitPreset::RandomOrthonormal { bandlimit } => {
            random_orthonormal_family(&grid, config.components, *bandlimit, config.seed)?
        }
    };
    MixedState::new(
        config.weights.clone(),
        components,
        config.orthonormality_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn gaussian_family_is_orthonormal_to_round_off() {
        let g = make_grid(1, 128, 12.0).unwrap();
        let comps = gaussian_family(
            &g,
            &[[3.0, 0.0, 0.0], [6.0, 0.0, 0.0], [9.0, 0.0, 0.0]],
            &[0.5, 0.5, 0.5],
        )
        .unwrap();
        let state = MixedState::new(vec![1.0 / 3.0; 3], comps, 1e-10).unwrap();
        assert!(
            state.orthonormality_residual() < 1e-12,
            "residual {}",
            state.orthonormality_residual()
        );
    }

    #[test]
    fn coincident_centres_break_down_with_index() {
        let g = make_grid(1, 64, 10.0).unwrap();
        let err = gaussian_family(&g, &[[5.0, 0.0, 0.0], [5.0, 0.0, 0.0]], &[0.7, 0.7]);
        match err {
            Err(SrspError::GramSchmidtBreakdown { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected breakdown, got {other:?}"),
        }
    }

    #[test]
    fn random_families_are_deterministic_per_seed() {
        let g = make_grid(2, 16, 4.0).unwrap();
        let a = random_orthonormal_family(&g, 3, 3, 77).unwrap();
        let b = random_orthonormal_family(&g, 3, 3, 77).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values(), y.values(), "same seed must reproduce bits");
        }
        let c = random_orthonormal_family(&g, 3, 3, 78).unwrap();
        assert_ne!(a[0].values(), c[0].values(), "different seed, different draw");
    }

    #[test]
    fn random_family_is_band_limited_and_orthonormal() {
        let g = make_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let bandlimit = 3;
        let comps = random_orthonormal_family(&g, 4, bandlimit, 5).unwrap();
        let state = MixedState::new(vec![0.25; 4], comps, 1e-10).unwrap();
        assert!(state.orthonormality_residual() < 1e-12);
        for comp in state.components() {
            let spectrum = fourier::power_spectrum(comp);
            for (i, p) in spectrum.iter().enumerate() {
                let m = g.mode_indices(i)[0];
                if m.unsigned_abs() > bandlimit {
                    assert!(
                        *p < 1e-26,
                        "mode {m} outside the band carries power {p:e}"
                    );
                }
            }
        }
    }

    #[test]
    fn default_modes_enumerate_low_frequencies_first() {
        let modes = default_modes(1, 5);
        assert_eq!(modes, vec![vec![0], vec![-1], vec![1], vec![-2], vec![2]]);
        let modes2 = default_modes(2, 5);
        assert_eq!(modes2[0], vec![0, 0]);
        // The four unit-norm modes follow in lexicographic order.
        assert_eq!(modes2[1], vec![-1, 0]);
        assert_eq!(modes2.len(), 5);
    }

    #[test]
    fn plane_wave_family_rejects_duplicates() {
        let g = make_grid(1, 16, 1.0).unwrap();
        let err = plane_wave_family(&g, &[vec![1], vec![1]]);
        assert!(err.is_err());
    }
}
