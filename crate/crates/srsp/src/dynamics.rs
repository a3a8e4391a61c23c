//! Time integration: free propagator, Strang splitting, Picard windows.
//!
//! Two interchangeable steppers advance the coupled system:
//!
//! * **Strang splitting.** Half-step potential phase, full kinetic step in
//!   Fourier space, half-step potential phase with the potential recomputed
//!   from the advanced density. The potential substep is exact because the
//!   density (hence `V`) is invariant under pure phase rotation, so the
//!   scheme is second order with unitary substeps: per-component charge is
//!   conserved to round-off.
//! * **Picard (Duhamel) windows.** On each window `[t, t + dt]` the mild
//!   form `Ψ(τ) = U(τ)Ψ(0) − i ∫₀^τ U(τ−σ) V[Ψ(σ)]Ψ(σ) dσ` is iterated to
//!   a fixed point on [`PICARD_SUBINTERVALS`] composite-trapezoid nodes.
//!   The iteration contracts when `dt · ‖Ψ‖²_{ℋ^s} < ½`; the returned
//!   result reports that margin together with the update history.
//!
//! Both steppers take the kinetic symbol as an argument, so the same code
//! drives the semi-relativistic flow, its non-relativistic comparison and
//! the massless flow.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::SrspError;
use crate::field::{ensure_same_grid, ComplexField, Multiplier};
use crate::fourier;
use crate::hartree::{self, PotentialField};
use crate::state::MixedState;
use crate::symbols;

/// Sub-intervals per Picard window (composite trapezoid, 9 nodes).
pub const PICARD_SUBINTERVALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Strang,
    Picard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorParams {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Abort once `‖Ψ(t)‖_{ℋ^s}` exceeds this multiple of its initial value.
    pub blowup_threshold: f64,
    /// Sobolev index used for diagnostics, Picard convergence and the guard.
    pub sobolev_s: f64,
    /// Apply the 2/3-rule filter to the density before the convolution.
    pub dealias: bool,
    /// Keep a state snapshot every this many steps (0 = none).
    pub snapshot_cadence: usize,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            scheme: Scheme::Strang,
            picard_tol: 1e-8,
            picard_max_iter: 50,
            blowup_threshold: 10.0,
            sobolev_s: 0.5,
            dealias: false,
            snapshot_cadence: 0,
        }
    }
}

impl IntegratorParams {
    pub fn validate(&self) -> Result<(), SrspError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SrspError::config("dt", format!("must be positive (got {})", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(SrspError::config(
                "t_final",
                format!("must be non-negative (got {})", self.t_final),
            ));
        }
        if !(self.picard_tol.is_finite() && self.picard_tol > 0.0) {
            return Err(SrspError::config(
                "picard_tol",
                format!("must be positive (got {})", self.picard_tol),
            ));
        }
        if self.picard_max_iter == 0 {
            return Err(SrspError::config("picard_max_iter", "must be at least 1"));
        }
        if !(self.blowup_threshold.is_finite() && self.blowup_threshold > 1.0) {
            return Err(SrspError::config(
                "blowup_threshold",
                format!("must exceed 1 (got {})", self.blowup_threshold),
            ));
        }
        if !self.sobolev_s.is_finite() || self.sobolev_s < 0.0 {
            return Err(SrspError::config(
                "sobolev_s",
                format!("must be a finite non-negative real (got {})", self.sobolev_s),
            ));
        }
        Ok(())
    }

    /// Number of full steps, `floor(t_final / dt)` with a relative slack
    /// guarding against representation error in the quotient.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt + 1e-9).floor() as usize
    }
}

/// Extra stepping knobs shared by the experiment drivers.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepOptions {
    /// Filter the density through the 2/3 rule before the convolution.
    pub dealias: bool,
    /// Constant added to the potential. Shifts of this kind amount to a
    /// global phase and must leave every observable unchanged; the gauge
    /// experiments exercise exactly that.
    pub gauge_shift: f64,
}

fn unit_phases(symbol: &Multiplier, t: f64) -> Vec<Complex64> {
    symbol
        .values()
        .iter()
        .map(|&a| Complex64::from_polar(1.0, -t * a))
        .collect()
}

fn rotate_in_fourier(state: &MixedState, phases: &[Complex64]) -> MixedState {
    state.map_components(|c| fourier::map_spectrum(c, |i, v| v * phases[i]))
}

fn rotate_in_space(state: &MixedState, table: &[Complex64]) -> MixedState {
    let grid = state.grid().clone();
    state.map_components(|c| {
        ComplexField::from_raw(
            grid.clone(),
            c.values().iter().zip(table).map(|(v, p)| v * p).collect(),
        )
    })
}

fn current_potential(
    state: &MixedState,
    interaction: &Multiplier,
    opts: &StepOptions,
) -> Result<PotentialField, SrspError> {
    let dens = hartree::density(state);
    hartree::potential_filtered(&dens, interaction, opts.dealias)
}

fn half_potential_rotation(
    state: &MixedState,
    interaction: &Multiplier,
    dt: f64,
    opts: &StepOptions,
) -> Result<MixedState, SrspError> {
    let v = current_potential(state, interaction, opts)?;
    let table: Vec<Complex64> = v
        .values()
        .iter()
        .map(|&p| Complex64::from_polar(1.0, -0.5 * dt * (p + opts.gauge_shift)))
        .collect();
    Ok(rotate_in_space(state, &table))
}

/// Exact free flow `ψ̂_k(t) = e^{−i t σ(κ)} ψ̂_k(0)` for the given kinetic
/// symbol.
pub fn free_propagate(
    state: &MixedState,
    kinetic: &Multiplier,
    t: f64,
) -> Result<MixedState, SrspError> {
    ensure_same_grid(state.grid(), kinetic.grid())?;
    if !t.is_finite() {
        return Err(SrspError::config("t", format!("must be finite (got {t})")));
    }
    let out = rotate_in_fourier(state, &unit_phases(kinetic, t));
    if !out.is_finite() {
        return Err(SrspError::Field("free propagation produced non-finite values".into()));
    }
    Ok(out)
}

/// One Strang step with explicit options; see module docs for the
/// substep order.
pub fn strang_step_with(
    state: &MixedState,
    kinetic: &Multiplier,
    interaction: &Multiplier,
    dt: f64,
    opts: &StepOptions,
) -> Result<MixedState, SrspError> {
    ensure_same_grid(state.grid(), kinetic.grid())?;
    ensure_same_grid(state.grid(), interaction.grid())?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SrspError::config("dt", format!("must be positive (got {dt})")));
    }
    let phases = unit_phases(kinetic, dt);
    let half = half_potential_rotation(state, interaction, dt, opts)?;
    let drifted = rotate_in_fourier(&half, &phases);
    let out = half_potential_rotation(&drifted, interaction, dt, opts)?;
    if !out.is_finite() {
        return Err(SrspError::Field("Strang step produced non-finite values".into()));
    }
    Ok(out)
}

/// One Strang step of the semi-relativistic flow at the given mass.
pub fn strang_step(
    state: &MixedState,
    kinetic: &Multiplier,
    interaction: &Multiplier,
    dt: f64,
) -> Result<MixedState, SrspError> {
    strang_step_with(state, kinetic, interaction, dt, &StepOptions::default())
}

/// One Strang step of the non-relativistic comparison flow (`−Δ/2m`),
/// `mass > 0`.
pub fn nonrel_step(
    state: &MixedState,
    mass: f64,
    interaction: &Multiplier,
    dt: f64,
) -> Result<MixedState, SrspError> {
    let kinetic = symbols::nonrelativistic_symbol(state.grid(), mass)?;
    strang_step(state, &kinetic, interaction, dt)
}

/// Auxiliary kinetic-free flow: the density (hence the potential) is a
/// constant of motion, so `ψ_k(t) = e^{−i t V[Ψ(0)]} ψ_k(0)` exactly.
pub fn potential_only_flow(
    state: &MixedState,
    interaction: &Multiplier,
    t: f64,
) -> Result<MixedState, SrspError> {
    ensure_same_grid(state.grid(), interaction.grid())?;
    if !t.is_finite() {
        return Err(SrspError::config("t", format!("must be finite (got {t})")));
    }
    let v = current_potential(state, interaction, &StepOptions::default())?;
    let table: Vec<Complex64> = v
        .values()
        .iter()
        .map(|&p| Complex64::from_polar(1.0, -t * p))
        .collect();
    Ok(rotate_in_space(state, &table))
}

/// Converged Picard window together with its convergence record.
#[derive(Debug, Clone)]
pub struct PicardResult {
    pub state: MixedState,
    /// Fixed-point sweeps performed (the free flow is sweep zero).
    pub iterations: usize,
    /// Successive-iterate `ℋ^s` distances, one per sweep.
    pub updates: Vec<f64>,
    /// `dt · ‖Ψ(0)‖²_{ℋ^s}`; the iteration is a contraction when < ½.
    pub contraction_parameter: f64,
}

/// Solves one Duhamel window of length `dt` by fixed-point iteration on
/// trapezoid nodes; `s` is the Sobolev index of the convergence norm.
pub fn picard_window(
    state: &MixedState,
    kinetic: &Multiplier,
    interaction: &Multiplier,
    dt: f64,
    tol: f64,
    max_iter: usize,
    s: f64,
) -> Result<PicardResult, SrspError> {
    ensure_same_grid(state.grid(), kinetic.grid())?;
    ensure_same_grid(state.grid(), interaction.grid())?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SrspError::config("dt", format!("must be positive (got {dt})")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(SrspError::config("picard_tol", format!("must be positive (got {tol})")));
    }
    if max_iter == 0 {
        return Err(SrspError::config("picard_max_iter", "must be at least 1"));
    }

    let grid = state.grid().clone();
    let total = grid.total_points();
    let kcount = state.len();
    let m = PICARD_SUBINTERVALS;
    let h_sub = dt / m as f64;
    let rho = state.weighted_norm(s);
    let contraction_parameter = dt * rho * rho;

    // e^{−i d·h σ(κ)} for lags d = 0..m; table d serves both U(t_d) and
    // U(t_j − t_l) with d = j − l.
    let lag_phases: Vec<Vec<Complex64>> = (0..=m)
        .map(|d| unit_phases(kinetic, d as f64 * h_sub))
        .collect();

    // Sobolev weights of the convergence norm, Parseval normalised.
    let coeff_w = grid.cell_measure() / total as f64;
    let norm_weights: Vec<f64> = (0..total)
        .map(|i| (1.0 + grid.k_squared(i)).powf(s) * coeff_w)
        .collect();

    // Everything linear happens on raw spectral coefficients.
    let c0: Vec<Vec<Complex64>> = state.components().iter().map(fourier::forward).collect();

    // Free flow as the initial trajectory iterate, nodes j = 0..m.
    let free_at = |j: usize| -> Vec<Vec<Complex64>> {
        c0.iter()
            .map(|c| {
                c.iter()
                    .zip(&lag_phases[j])
                    .map(|(v, p)| v * p)
                    .collect()
            })
            .collect()
    };
    let mut trajectory: Vec<Vec<Vec<Complex64>>> = (0..=m).map(free_at).collect();

    let weights = state.weights().to_vec();
    let tol_state = state.tol();
    let to_state = |coeffs: &Vec<Vec<Complex64>>| -> MixedState {
        let comps = coeffs
            .iter()
            .map(|c| ComplexField::from_raw(grid.clone(), fourier::inverse(&grid, c.clone())))
            .collect();
        MixedState::from_validated_parts(weights.clone(), comps, tol_state)
    };

    let mut updates = Vec::new();
    for sweep in 1..=max_iter {
        // Hartree images of the current iterate at every node, in
        // coefficient space.
        let mut images: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(m + 1);
        for node in &trajectory {
            let st = to_state(node);
            let img = hartree::apply_hartree(&st, interaction)?;
            images.push(img.iter().map(fourier::forward).collect());
        }

        // Trapezoid accumulation of −i ∫ U(t_j − σ) N(σ) dσ on nodes 0..j.
        let mut next: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(m + 1);
        next.push(trajectory[0].clone());
        for j in 1..=m {
            let mut node: Vec<Vec<Complex64>> = free_at(j);
            for l in 0..=j {
                let w = if l == 0 || l == j { 0.5 * h_sub } else { h_sub };
                let factor = Complex64::new(0.0, -w);
                let phases = &lag_phases[j - l];
                for k in 0..kcount {
                    let img = &images[l][k];
                    let dst = &mut node[k];
                    for i in 0..total {
                        dst[i] += factor * phases[i] * img[i];
                    }
                }
            }
            next.push(node);
        }

        // Sup-in-time ℋ^s distance between sweeps.
        let mut delta = 0.0f64;
        for (old, new) in trajectory.iter().zip(&next) {
            let mut acc = 0.0;
            for k in 0..kcount {
                let mut comp = 0.0;
                for i in 0..total {
                    comp += norm_weights[i] * (new[k][i] - old[k][i]).norm_sqr();
                }
                acc += weights[k] * comp;
            }
            delta = delta.max(acc.sqrt());
        }
        trajectory = next;
        updates.push(delta);

        if delta < tol {
            let out = to_state(&trajectory[m]);
            if !out.is_finite() {
                return Err(SrspError::Field("Picard window produced non-finite values".into()));
            }
            return Ok(PicardResult {
                state: out,
                iterations: sweep,
                updates,
                contraction_parameter,
            });
        }
    }

    Err(SrspError::PicardDiverged {
        iterations: max_iter,
        last_update: *updates.last().unwrap_or(&f64::NAN),
        tolerance: tol,
    })
}

/// Per-step observables recorded by [`evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub step: usize,
    pub time: f64,
    /// Per-component squared charges `‖ψ_k‖²_{L²}`.
    pub charges: Vec<f64>,
    pub energy: f64,
    pub hs_norm: f64,
    pub orthonormality_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// The guard `‖Ψ(t)‖_{ℋ^s} > threshold · ‖Ψ(0)‖_{ℋ^s}` fired.
    BlowUp {
        step: usize,
        time: f64,
        norm: f64,
        threshold: f64,
    },
    /// Overflow or NaN appeared in the state.
    NonFinite { step: usize, time: f64 },
    /// A Picard window missed its tolerance.
    PicardFailure {
        step: usize,
        time: f64,
        iterations: usize,
        last_update: f64,
    },
}

impl RunOutcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunOutcome::Completed)
    }
}

/// Stepwise record of one run. Diagnostics are kept for every step up to
/// and including the aborting one, whatever the outcome.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<DiagnosticRow>,
    /// `(time, state)` pairs at the configured cadence (plus the initial
    /// and final states when a cadence is set).
    pub snapshots: Vec<(f64, MixedState)>,
    pub final_state: MixedState,
    pub outcome: RunOutcome,
    pub sobolev_s: f64,
    /// Picard sweep counts per step (empty for Strang runs).
    pub picard_iterations: Vec<usize>,
    pub warnings: Vec<String>,
}

fn observe(
    step: usize,
    time: f64,
    state: &MixedState,
    kinetic: &Multiplier,
    interaction: &Multiplier,
    s: f64,
) -> Result<DiagnosticRow, SrspError> {
    Ok(DiagnosticRow {
        step,
        time,
        charges: state.charges(),
        energy: hartree::energy(state, kinetic, interaction)?,
        hs_norm: state.weighted_norm(s),
        orthonormality_residual: state.orthonormality_residual(),
    })
}

/// Advances `initial` over `floor(t_final/dt)` uniform steps of the
/// configured scheme, recording diagnostics each step. The blow-up guard
/// compares the running `ℋ^s` norm against its initial value; crossing the
/// threshold (or losing finiteness, or a Picard failure) aborts the run
/// with partial diagnostics retained in the returned trajectory.
pub fn evolve(
    initial: &MixedState,
    kinetic: &Multiplier,
    interaction: &Multiplier,
    params: &IntegratorParams,
) -> Result<Trajectory, SrspError> {
    params.validate()?;
    ensure_same_grid(initial.grid(), kinetic.grid())?;
    ensure_same_grid(initial.grid(), interaction.grid())?;

    let steps = params.steps();
    let s = params.sobolev_s;
    let opts = StepOptions {
        dealias: params.dealias,
        gauge_shift: 0.0,
    };
    let kin_phases = unit_phases(kinetic, params.dt);

    let mut warnings = Vec::new();
    let mut picard_iterations = Vec::new();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();

    let mut state = initial.clone();
    let initial_norm = state.weighted_norm(s);
    rows.push(observe(0, 0.0, &state, kinetic, interaction, s)?);
    if params.snapshot_cadence > 0 {
        snapshots.push((0.0, state.clone()));
    }

    if params.scheme == Scheme::Picard {
        let margin = params.dt * initial_norm * initial_norm;
        if margin >= 0.5 {
            warnings.push(format!(
                "Picard contraction margin dt·‖Ψ‖² = {margin:.3e} is not below 1/2; windows may not contract"
            ));
        }
    }

    let mut outcome = RunOutcome::Completed;
    for step in 1..=steps {
        let time = step as f64 * params.dt;
        let advanced = match params.scheme {
            Scheme::Strang => {
                let half = half_potential_rotation(&state, interaction, params.dt, &opts);
                match half {
                    Ok(h) => {
                        let drifted = rotate_in_fourier(&h, &kin_phases);
                        half_potential_rotation(&drifted, interaction, params.dt, &opts)
                    }
                    Err(e) => Err(e),
                }
            }
            Scheme::Picard => picard_window(
                &state,
                kinetic,
                interaction,
                params.dt,
                params.picard_tol,
                params.picard_max_iter,
                s,
            )
            .map(|r| {
                picard_iterations.push(r.iterations);
                r.state
            }),
        };

        state = match advanced {
            Ok(next) => next,
            Err(SrspError::PicardDiverged {
                iterations,
                last_update,
                ..
            }) => {
                outcome = RunOutcome::PicardFailure {
                    step,
                    time,
                    iterations,
                    last_update,
                };
                break;
            }
            Err(SrspError::Field(_)) => {
                outcome = RunOutcome::NonFinite { step, time };
                break;
            }
            Err(e) => return Err(e),
        };

        if !state.is_finite() {
            outcome = RunOutcome::NonFinite { step, time };
            break;
        }

        let row = observe(step, time, &state, kinetic, interaction, s)?;
        let hs = row.hs_norm;
        rows.push(row);
        if params.snapshot_cadence > 0
            && (step % params.snapshot_cadence == 0 || step == steps)
        {
            snapshots.push((time, state.clone()));
        }
        if hs > params.blowup_threshold * initial_norm {
            outcome = RunOutcome::BlowUp {
                step,
                time,
                norm: hs,
                threshold: params.blowup_threshold,
            };
            break;
        }
    }

    Ok(Trajectory {
        rows,
        snapshots,
        final_state: state,
        outcome,
        sobolev_s: s,
        picard_iterations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grid};
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

    fn superposed_pair(grid: &Grid, m1: isize, m2: isize) -> MixedState {
        let a = plane_wave(grid, &[m1]);
        let b = plane_wave(grid, &[m2]);
        let mix = |sign: f64| {
            ComplexField::new(
                grid,
                a.values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| (x + sign * y) / 2f64.sqrt())
                    .collect(),
            )
            .unwrap()
        };
        // Unequal weights keep the cross terms of the two components from
        // cancelling, so the density is genuinely modulated and V ≠ 0.
        MixedState::new(vec![0.65, 0.35], vec![mix(1.0), mix(-1.0)], 1e-10).unwrap()
    }

    fn max_component_deviation(a: &MixedState, b: &MixedState) -> f64 {
        a.components()
            .iter()
            .zip(b.components())
            .flat_map(|(x, y)| {
                x.values()
                    .iter()
                    .zip(y.values())
                    .map(|(u, v)| (u - v).norm())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn free_flow_rotates_single_modes_by_dispersion_phase() {
        let g = make_grid(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let kin = kinetic_symbol(&g, 1.5).unwrap();
        let state = MixedState::new(vec![1.0], vec![plane_wave(&g, &[2])], 1e-10).unwrap();
        let t = 0.37;
        let moved = free_propagate(&state, &kin, t).unwrap();
        let flat = g.flat_from_modes(&[2]).unwrap();
        let phase = Complex64::from_polar(1.0, -t * kin.values()[flat]);
        let want = state.components()[0].scale(phase);
        let err = moved.components()[0]
            .values()
            .iter()
            .zip(want.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-13, "dispersion phase defect {err}");
    }

    #[test]
    fn free_flow_is_a_semigroup() {
        let g = make_grid(1, 64, 5.0).unwrap();
        let kin = kinetic_symbol(&g, 0.7).unwrap();
        let state = superposed_pair(&g, 1, 3);
        let one = free_propagate(&free_propagate(&state, &kin, 0.3).unwrap(), &kin, 0.45).unwrap();
        let two = free_propagate(&state, &kin, 0.75).unwrap();
        assert!(
            max_component_deviation(&one, &two) < 1e-12,
            "U(t₂)U(t₁) deviates from U(t₁+t₂)"
        );
    }

    #[test]
    fn free_flow_preserves_charge_and_orthonormality() {
        let g = make_grid(1, 64, 4.0).unwrap();
        let kin = kinetic_symbol(&g, 0.0).unwrap();
        let state = superposed_pair(&g, 1, -2);
        let moved = free_propagate(&state, &kin, 2.0).unwrap();
        for (a, b) in state.charges().iter().zip(moved.charges()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(moved.orthonormality_residual() < 1e-12);
    }

    #[test]
    fn strang_reduces_to_free_flow_without_coupling() {
        let g = make_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let kin = kinetic_symbol(&g, 1.0).unwrap();
        let zero = riesz_symbol(&g, 0.5, 0.0).unwrap();
        let state = superposed_pair(&g, 1, 2);
        let dt = 1e-2;
        let stepped = strang_step(&state, &kin, &zero, dt).unwrap();
        let free = free_propagate(&state, &kin, dt).unwrap();
        assert!(
            max_component_deviation(&stepped, &free) < 1e-13,
            "g = 0 must recover the free propagator"
        );
    }

    #[test]
    fn strang_conserves_charge_per_component() {
        let g = make_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let kin = kinetic_symbol(&g, 1.0).unwrap();
        let w = riesz_symbol(&g, 0.5, 1.0).unwrap();
        let mut state = superposed_pair(&g, 1, -1);
        let before = state.charges();
        for _ in 0..50 {
            state = strang_step(&state, &kin, &w, 1e-2).unwrap();
        }
        for (a, b) in before.iter().zip(state.charges()) {
            assert!(
                (a - b).abs() < 1e-13,
                "unitary substeps must conserve charge ({a} vs {b})"
            );
        }
        assert!(state.orthonormality_residual() < 1e-12);
    }

    #[test]
    fn gauge_shift_changes_phases_not_observables() {
        let g = make_grid(1, 64, 3.0).unwrap();
        let kin = kinetic_symbol(&g, 1.0).unwrap();
        let w = riesz_symbol(&g, 0.5, 1.0).unwrap();
        let state = superposed_pair(&g, 1, 2);
        let dt = 5e-3;
        let shift = 0.8;
        let plain = strang_step(&state, &kin, &w, dt).unwrap();
        let shifted = strang_step_with(
            &state,
            &kin,
            &w,
            dt,
            &StepOptions {
                dealias: false,
                gauge_shift: shift,
            },
        )
        .unwrap();
        // Densities agree pointwise; states differ by a global phase e^{−i dt shift}.
        let n0 = hartree::density(&plain);
        let n1 = hartree::density(&shifted);
        for (a, b) in n0.values().iter().zip(n1.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let rephased = shifted.map_components(|c| c.scale(Complex64::from_polar(1.0, dt * shift)));
        assert!(
            max_component_deviation(&plain, &rephased) < 1e-12,
            "gauge shift must act as a global phase"
        );
    }

    #[test]
    fn potential_only_flow_composes_and_freezes_density() {
        let g = make_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let w = riesz_symbol(&g, 0.5, -1.0).unwrap();
        let state = superposed_pair(&g, 1, 3);
        let n0 = hartree::density(&state);
        let t1 = 0.4;
        let t2 = 0.35;
        let once = potential_only_flow(&state, &w, t1 + t2).unwrap();
        let twice =
            potential_only_flow(&potential_only_flow(&state, &w, t1).unwrap(), &w, t2).unwrap();
        assert!(
            max_component_deviation(&once, &twice) < 1e-13,
            "flow property requires the frozen density"
        );
        let n1 = hartree::density(&once);
        let drift = n0
            .values()
            .iter()
            .zip(n1.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-13, "density drift {drift}");
    }

    #[test]
    fn picard_recovers_free_flow_in_one_sweep_without_coupling() {
        let g = make_grid(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let kin = kinetic_symbol(&g, 1.0).unwrap();
        let zero = riesz_symbol(&g, 0.5, 0.0).unwrap();
        let state = superposed_pair(&g, 1, 2);
        let dt = 1e-2;
        let result = picard_window(&state, &kin, &zero, dt, 1e-12, 10, 0.5).unwrap();
        assert_eq!(result.iterations, 1, "the free flow is already the fixed point");
        let free = free_propagate(&state, &kin, dt).unwrap();
        assert!(max_component_deviation(&result.state, &free) < 1e-13);
    }

    #[test]
    fn picard_updates_decay_geometrically_at_the_contraction_rate() {
        let g = make_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let kin = kinetic_symbol(&g, 1.0).unwrap();
        let w = riesz_symbol(&g, 0.5, 1.0).unwrap();
        let state = superposed_pair(&g, 1, -2);
        let dt = 5e-2;
        let result = picard_window(&state, &kin, &w, dt, 1e-13, 30, 0.5).unwrap();
        assert!(
            result.iterations >= 3,
            "interacting window should need several sweeps at this tolerance"
        );
        // Successive update quotients should sit near (well under a small
        // multiple of) the contraction parameter dt·ρ².
        let margin = result.contraction_parameter;
        for pair in result.updates.windows(2) {
            if pair[0] < 1e3 * f64::EPSILON {
                break; // below round-off the quotient is noise
            }
            let q = pair[1] / pair[0];
            assert!(
                q < 6.0 * margin,
                "update quotient {q:.3e} far above contraction margin {margin:.3e}"
            );
        }
    }

    #[test]
    fn picard_agrees_with_strang_at_second_order() {
        let g = make_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let kin = kinetic_symbol(&g, 1.0).unwrap();
        let w = riesz_symbol(&g, 0.5, 1.0).unwrap();
        let state = superposed_pair(&g, 1, 2);
        let dist = |dt: f64| {
            let p = picard_window(&state, &kin, &w, dt, 1e-13, 40, 0.5).unwrap();
            let s = strang_step(&state, &kin, &w, dt).unwrap();
            p.state.weighted_distance(&s, 0.5).unwrap()
        };
        let coarse = dist(2e-2);
        let fine = dist(1e-2);
        let ratio = coarse / fine;
        // Single-window (local) errors are O(dt³): halving dt should shrink
        // the gap by roughly 8.
        assert!(
            (5.0..12.0).contains(&ratio),
            "local order defect: ratio {ratio} (coarse {coarse:e}, fine {fine:e})"
        );
    }

    #[test]
    fn picard_reports_non_convergence() {
        let g = make_grid(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let kin = kinetic_symbol(&g, 1.0).unwrap();
        let w = riesz_symbol(&g, 0.5, 40.0).unwrap();
        let state = superposed_pair(&g, 1, -1);
        // dt·ρ² well above the contraction threshold and a tolerance the
        // few allowed sweeps cannot reach.
        let err = picard_window(&state, &kin, &w, 2.0, 1e-14, 4, 0.5);
        match err {
            Err(SrspError::PicardDiverged { iterations, .. }) => assert_eq!(iterations, 4),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn evolve_records_the_full_diagnostic_grid() {
        let g = make_grid(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let kin = kinetic_symbol(&g, 1.0).unwrap();
        let w = riesz_symbol(&g, 0.5, 1.0).unwrap();
        let state = superposed_pair(&g, 1, 2);
        let params = IntegratorParams {
            dt: 1e-2,
            t_final: 0.1,
            snapshot_cadence: 5,
            ..IntegratorParams::default()
        };
        let traj = evolve(&state, &kin, &w, &params).unwrap();
        assert_eq!(traj.rows.len(), 11, "floor(t_final/dt) + 1 rows");
        assert!(traj.outcome.is_completed());
        for (i, row) in traj.rows.iter().enumerate() {
            assert_eq!(row.step, i);
            assert!((row.time - i as f64 * 1e-2).abs() < 1e-15);
            assert_eq!(row.charges.len(), 2);
        }
        // Snapshots at steps 0, 5, 10.
        assert_eq!(traj.snapshots.len(), 3);
        assert!((traj.snapshots[2].0 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn evolve_with_picard_scheme_reports_iteration_counts() {
        let g = make_grid(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let kin = kinetic_symbol(&g, 1.0).unwrap();
        let w = riesz_symbol(&g, 0.5, 1.0).unwrap();
        let state = superposed_pair(&g, 1, 2);
        let params = IntegratorParams {
            dt: 1e-2,
            t_final: 0.05,
            scheme: Scheme::Picard,
            picard_tol: 1e-10,
            ..IntegratorParams::default()
        };
        let traj = evolve(&state, &kin, &w, &params).unwrap();
        assert!(traj.outcome.is_completed());
        assert_eq!(traj.picard_iterations.len(), 5);
        assert!(traj.picard_iterations.iter().all(|&n| n >= 1));
    }

    #[test]
    fn evolve_aborts_on_picard_failure_with_partial_rows() {
        let g = make_grid(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let kin = kinetic_symbol(&g, 1.0).unwrap();
        let w = riesz_symbol(&g, 0.5, 60.0).unwrap();
        let state = superposed_pair(&g, 1, -1);
        let params = IntegratorParams {
            dt: 1.0,
            t_final: 3.0,
            scheme: Scheme::Picard,
            picard_tol: 1e-13,
            picard_max_iter: 3,
            ..IntegratorParams::default()
        };
        let traj = evolve(&state, &kin, &w, &params).unwrap();
        match traj.outcome {
            RunOutcome::PicardFailure { step, .. } => assert_eq!(step, 1),
            ref other => panic!("expected Picard failure, got {other:?}"),
        }
        assert_eq!(traj.rows.len(), 1, "diagnostics up to the failure are kept");
        assert!(!traj.warnings.is_empty(), "contraction warning expected");
    }
}
