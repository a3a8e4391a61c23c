//! Run configuration: a flat, typed key-value document (TOML) with strict
//! validation.
//!
//! Unknown keys are rejected outright, every violation names the offending
//! key and its admissible range, and all optional keys have documented
//! defaults, so a minimal file like
//!
//! ```toml
//! dim = 1
//! gamma = 0.5
//! coupling = 1.0
//! mass = 1.0
//! components = 2
//! ```
//!
//! resolves to a complete [`RunConfig`]. Weights are given either as an
//! explicit list of proportions (normalised to sum one) or as the string
//! `"geometric:r"` meaning `λ_k ∝ r^k`; `r = 1` is the uniform family.

use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::dynamics::{IntegratorParams, Scheme};
use crate::error::SrspError;
use crate::field::Multiplier;
use crate::grid::{make_grid, Grid};
use crate::presets;
use crate::state::MixedState;
use crate::symbols;

/// Resolved initial-data description.
#[derive(Debug, Clone, PartialEq)]
pub enum InitPreset {
    Gaussian {
        centers: Vec<[f64; 3]>,
        widths: Vec<f64>,
    },
    PlaneWaves {
        modes: Vec<Vec<isize>>,
    },
    RandomOrthonormal {
        bandlimit: usize,
    },
}

/// Fully validated and default-filled run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub grid_points: usize,
    pub box_length: f64,
    pub gamma: f64,
    pub coupling: f64,
    pub mass: f64,
    pub components: usize,
    /// Occupation weights, normalised to sum one.
    pub weights: Vec<f64>,
    pub init: InitPreset,
    pub seed: u64,
    pub orthonormality_tol: f64,
    pub integrator: IntegratorParams,
    pub output_dir: PathBuf,
    /// SHA-256 of the source text; stamped into snapshots and reports.
    pub digest: String,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid, SrspError> {
        make_grid(self.dim, self.grid_points, self.box_length)
    }

    /// Semi-relativistic kinetic symbol at the configured mass.
    pub fn kinetic(&self, grid: &Grid) -> Result<Multiplier, SrspError> {
        symbols::kinetic_symbol(grid, self.mass)
    }

    pub fn interaction(&self, grid: &Grid) -> Result<Multiplier, SrspError> {
        symbols::riesz_symbol(grid, self.gamma, self.coupling)
    }

    pub fn initial_state(&self) -> Result<MixedState, SrspError> {
        presets::init_preset(self)
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WeightSpec {
    List(Vec<f64>),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dim: usize,
    gamma: f64,
    coupling: f64,
    mass: f64,
    components: usize,

    grid_points: Option<usize>,
    box_length: Option<f64>,
    weights: Option<WeightSpec>,
    init_preset: Option<String>,
    preset_centers: Option<Vec<f64>>,
    preset_widths: Option<Vec<f64>>,
    preset_modes: Option<Vec<i64>>,
    preset_bandlimit: Option<usize>,
    seed: Option<u64>,
    orthonormality_tol: Option<f64>,

    scheme: Option<String>,
    dt: Option<f64>,
    t_final: Option<f64>,
    picard_tol: Option<f64>,
    picard_max_iter: Option<usize>,
    blowup_threshold: Option<f64>,
    sobolev_s: Option<f64>,
    dealias: Option<bool>,
    snapshot_cadence: Option<usize>,

    output_dir: Option<String>,
}

fn positive(key: &str, value: f64) -> Result<f64, SrspError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(SrspError::config(
            key,
            format!("must be positive and finite (got {value})"),
        ))
    }
}

fn resolve_weights(spec: Option<WeightSpec>, components: usize) -> Result<Vec<f64>, SrspError> {
    let raw = match spec {
        None => vec![1.0; components],
        Some(WeightSpec::List(list)) => {
            if list.len() != components {
                return Err(SrspError::config(
                    "weights",
                    format!("expected {components} entries, got {}", list.len()),
                ));
            }
            list
        }
        Some(WeightSpec::Text(text)) => {
            let ratio = text
                .strip_prefix("geometric:")
                .ok_or_else(|| {
                    SrspError::config(
                        "weights",
                        format!("expected a list or \"geometric:r\" (got {text:?})"),
                    )
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| SrspError::config("weights", format!("bad geometric ratio: {e}")))?;
            positive("weights", ratio)?;
            (0..components).map(|k| ratio.powi(k as i32)).collect()
        }
    };
    if let Some((k, &w)) = raw.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
        return Err(SrspError::config(
            "weights",
            format!("entry {k} must be a finite non-negative proportion (got {w})"),
        ));
    }
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(SrspError::config("weights", "proportions sum to zero"));
    }
    Ok(raw.iter().map(|w| w / sum).collect())
}

fn resolve_init(
    raw: &RawConfig,
    dim: usize,
    grid_points: usize,
    box_length: f64,
    components: usize,
) -> Result<InitPreset, SrspError> {
    let name = raw.init_preset.as_deref().unwrap_or("random_orthonormal");
    match name {
        "gaussian" => {
            let centers: Vec<[f64; 3]> = match &raw.preset_centers {
                Some(flat) => {
                    if flat.len() != components * dim {
                        return Err(SrspError::config(
                            "preset_centers",
                            format!(
                                "expected {} coordinates ({components} centres in {dim} dimensions), got {}",
                                components * dim,
                                flat.len()
                            ),
                        ));
                    }
                    flat.chunks(dim)
                        .map(|c| {
                            let mut out = [box_length / 2.0; 3];
                            out[..dim].copy_from_slice(c);
                            out
                        })
                        .collect()
                }
                // Default: evenly spaced along the first axis, centred on
                // the remaining ones.
                None => (0..components)
                    .map(|j| {
                        let mut c = [box_length / 2.0; 3];
                        c[0] = (j as f64 + 0.5) * box_length / components as f64;
                        c
                    })
                    .collect(),
            };
            let widths = match &raw.preset_widths {
                Some(w) if w.len() == 1 => vec![w[0]; components],
                Some(w) if w.len() == components => w.clone(),
                Some(w) => {
                    return Err(SrspError::config(
                        "preset_widths",
                        format!("expected 1 or {components} widths, got {}", w.len()),
                    ));
                }
                None => vec![box_length / (8.0 * components as f64); components],
            };
            for (j, &w) in widths.iter().enumerate() {
                positive("preset_widths", w).map_err(|_| {
                    SrspError::config(
                        "preset_widths",
                        format!("width {j} must be positive and finite (got {w})"),
                    )
                })?;
            }
            Ok(InitPreset::Gaussian { centers, widths })
        }
        "plane_waves" => {
            let modes: Vec<Vec<isize>> = match &raw.preset_modes {
                Some(flat) => {
                    if flat.len() != components * dim {
                        return Err(SrspError::config(
                            "preset_modes",
                            format!(
                                "expected {} indices ({components} modes in {dim} dimensions), got {}",
                                components * dim,
                                flat.len()
                            ),
                        ));
                    }
                    flat.chunks(dim)
                        .map(|m| m.iter().map(|&v| v as isize).collect())
                        .collect()
                }
                None => presets::default_modes(dim, components),
            };
            let half = grid_points as isize / 2;
            for m in &modes {
                for &v in m {
                    if v < -half || v >= half {
                        return Err(SrspError::config(
                            "preset_modes",
                            format!("mode index {v} outside representable range [{}, {})", -half, half),
                        ));
                    }
                }
            }
            Ok(InitPreset::PlaneWaves { modes })
        }
        "random_orthonormal" => {
            let bandlimit = raw.preset_bandlimit.unwrap_or(3);
            if bandlimit == 0 || bandlimit >= grid_points / 2 {
                return Err(SrspError::config(
                    "preset_bandlimit",
                    format!("must lie in [1, {}) (got {bandlimit})", grid_points / 2),
                ));
            }
            Ok(InitPreset::RandomOrthonormal { bandlimit })
        }
        other => Err(SrspError::config(
            "init_preset",
            format!(
                "unknown preset {other:?}; expected gaussian, plane_waves or random_orthonormal"
            ),
        )),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, SrspError> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| SrspError::config("parse", e.message().to_string()))?;

    if !(1..=3).contains(&raw.dim) {
        return Err(SrspError::config(
            "dim",
            format!("must be 1, 2 or 3 (got {})", raw.dim),
        ));
    }
    let grid_points = raw.grid_points.unwrap_or(64);
    if grid_points < crate::grid::MIN_POINTS || !grid_points.is_power_of_two() {
        return Err(SrspError::config(
            "grid_points",
            format!(
                "must be a power of two >= {} (got {grid_points})",
                crate::grid::MIN_POINTS
            ),
        ));
    }
    let box_length = positive("box_length", raw.box_length.unwrap_or(2.0 * std::f64::consts::PI))?;
    symbols::validate_riesz_exponent(raw.dim, raw.gamma)?;
    if !raw.coupling.is_finite() {
        return Err(SrspError::config(
            "coupling",
            format!("must be finite (got {})", raw.coupling),
        ));
    }
    if !(raw.mass.is_finite() && raw.mass >= 0.0) {
        return Err(SrspError::config(
            "mass",
            format!("must be finite and >= 0 (got {})", raw.mass),
        ));
    }
    if raw.components == 0 || raw.components > 64 {
        return Err(SrspError::config(
            "components",
            format!("must lie in [1, 64] (got {})", raw.components),
        ));
    }

    let init = resolve_init(&raw, raw.dim, grid_points, box_length, raw.components)?;
    // Preset parameters that the chosen preset never reads are almost
    // certainly a mistake; reject them like unknown keys.
    let given = [
        raw.preset_centers.as_ref().map(|_| "preset_centers"),
        raw.preset_widths.as_ref().map(|_| "preset_widths"),
        raw.preset_modes.as_ref().map(|_| "preset_modes"),
        raw.preset_bandlimit.map(|_| "preset_bandlimit"),
    ];
    let used: &[&str] = match &init {
        InitPreset::Gaussian { .. } => &["preset_centers", "preset_widths"],
        InitPreset::PlaneWaves { .. } => &["preset_modes"],
        InitPreset::RandomOrthonormal { .. } => &["preset_bandlimit"],
    };
    if let Some(key) = given.into_iter().flatten().find(|k| !used.contains(k)) {
        return Err(SrspError::config(
            key,
            "not used by the selected init_preset".to_string(),
        ));
    }
    let weights = resolve_weights(raw.weights, raw.components)?;

    let scheme = match raw.scheme.as_deref().unwrap_or("strang") {
        "strang" => Scheme::Strang,
        "picard" => Scheme::Picard,
        other => {
            return Err(SrspError::config(
                "scheme",
                format!("unknown scheme {other:?}; expected strang or picard"),
            ));
        }
    };
    let integrator = IntegratorParams {
        dt: raw.dt.unwrap_or(1e-3),
        t_final: raw.t_final.unwrap_or(1.0),
        scheme,
        picard_tol: raw.picard_tol.unwrap_or(1e-8),
        picard_max_iter: raw.picard_max_iter.unwrap_or(50),
        blowup_threshold: raw.blowup_threshold.unwrap_or(10.0),
        sobolev_s: raw.sobolev_s.unwrap_or_else(|| (raw.gamma / 2.0).max(0.5)),
        dealias: raw.dealias.unwrap_or(false),
        snapshot_cadence: raw.snapshot_cadence.unwrap_or(0),
    };
    integrator.validate()?;

    let orthonormality_tol = raw.orthonormality_tol.unwrap_or(1e-10);
    positive("orthonormality_tol", orthonormality_tol)?;

    let digest = {
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect::<String>()
    };

    Ok(RunConfig {
        dim: raw.dim,
        grid_points,
        box_length,
        gamma: raw.gamma,
        coupling: raw.coupling,
        mass: raw.mass,
        components: raw.components,
        weights,
        init,
        seed: raw.seed.unwrap_or(0),
        orthonormality_tol,
        integrator,
        output_dir: PathBuf::from(raw.output_dir.as_deref().unwrap_or("run-output")),
        digest,
    })
}
