//! Run orchestration: builds everything from a [`RunConfig`], evolves,
//! and persists artifacts under the configured output directory.
//!
//! Artifacts: `diagnostics.csv` (one row per step, written whatever the
//! outcome, so aborted runs keep their partial record), numbered
//! `snapshot-NNNN.srsp` files at the configured cadence, and `run.log`
//! with one line per event. Nothing in any artifact depends on wall-clock
//! time or thread scheduling, so identical configs produce byte-identical
//! diagnostics.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::dynamics::{evolve, DiagnosticRow, RunOutcome, Trajectory};
use crate::error::SrspError;
use crate::snapshot;

#[derive(Debug)]
pub struct RunArtifacts {
    pub trajectory: Trajectory,
    pub diagnostics_path: PathBuf,
    pub snapshot_paths: Vec<PathBuf>,
    pub log_path: PathBuf,
}

fn table_err(message: impl Into<String>) -> SrspError {
    SrspError::Io(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        message.into(),
    ))
}

/// Writes the per-step diagnostics table. Floats go through the shortest
/// round-trip decimal form, so reading the file back recovers them exactly.
pub fn write_diagnostics(path: &Path, rows: &[DiagnosticRow]) -> Result<(), SrspError> {
    let k = rows.first().map_or(0, |r| r.charges.len());
    let mut writer = csv::Writer::from_path(path).map_err(|e| table_err(e.to_string()))?;
    let mut header = vec!["step".to_string(), "time".to_string()];
    header.extend((1..=k).map(|i| format!("charge_{i}")));
    header.extend(["energy", "hs_norm", "orthonormality_residual"].map(String::from));
    writer
        .write_record(&header)
        .map_err(|e| table_err(e.to_string()))?;
    for row in rows {
        if row.charges.len() != k {
            return Err(table_err(format!(
                "row {} has {} charges, header promises {k}",
                row.step,
                row.charges.len()
            )));
        }
        let mut record = vec![row.step.to_string(), row.time.to_string()];
        record.extend(row.charges.iter().map(|c| c.to_string()));
        record.push(row.energy.to_string());
        record.push(row.hs_norm.to_string());
        record.push(row.orthonormality_residual.to_string());
        writer
            .write_record(&record)
            .map_err(|e| table_err(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a diagnostics table written by [`write_diagnostics`].
pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticRow>, SrspError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| table_err(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| table_err(e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let k = names.iter().filter(|n| n.starts_with("charge_")).count();
    let mut expected = vec!["step".to_string(), "time".to_string()];
    expected.extend((1..=k).map(|i| format!("charge_{i}")));
    expected.extend(["energy", "hs_norm", "orthonormality_residual"].map(String::from));
    if names != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(table_err(format!("unexpected diagnostics header {names:?}")));
    }

    let parse =
        |field: &str| -> Result<f64, SrspError> {
            field
                .parse::<f64>()
                .map_err(|e| table_err(format!("bad float {field:?}: {e}")))
        };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| table_err(e.to_string()))?;
        if record.len() != expected.len() {
            return Err(table_err(format!(
                "row has {} fields, expected {}",
                record.len(),
                expected.len()
            )));
        }
        let step = record[0]
            .parse::<usize>()
            .map_err(|e| table_err(format!("bad step {:?}: {e}", &record[0])))?;
        let time = parse(&record[1])?;
        let charges = (0..k)
            .map(|i| parse(&record[2 + i]))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(DiagnosticRow {
            step,
            time,
            charges,
            energy: parse(&record[2 + k])?,
            hs_norm: parse(&record[3 + k])?,
            orthonormality_residual: parse(&record[4 + k])?,
        });
    }
    if rows.is_empty() {
        return Err(table_err("diagnostics table has no rows"));
    }
    Ok(rows)
}

fn run_logged<W: Write>(config: &RunConfig, log: &mut W) -> Result<RunArtifacts, SrspError> {
    writeln!(log, "config digest {}", config.digest)?;
    writeln!(
        log,
        "grid dim {} points {} box_length {}",
        config.dim, config.grid_points, config.box_length
    )?;
    writeln!(
        log,
        "model gamma {} coupling {} mass {} components {}",
        config.gamma, config.coupling, config.mass, config.components
    )?;
    let grid = config.grid()?;
    let kinetic = config.kinetic(&grid)?;
    let interaction = config.interaction(&grid)?;
    let initial = config.initial_state()?;
    writeln!(
        log,
        "initial state ready: orthonormality residual {:.3e}",
        initial.orthonormality_residual()
    )?;

    let trajectory = evolve(&initial, &kinetic, &interaction, &config.integrator)?;
    for warning in &trajectory.warnings {
        writeln!(log, "warning: {warning}")?;
    }

    let diagnostics_path = config.output_dir.join("diagnostics.csv");
    write_diagnostics(&diagnostics_path, &trajectory.rows)?;
    writeln!(log, "diagnostics: {} rows", trajectory.rows.len())?;

    let mut snapshot_paths = Vec::new();
    for (idx, (time, state)) in trajectory.snapshots.iter().enumerate() {
        let path = config.output_dir.join(format!("snapshot-{idx:04}.srsp"));
        snapshot::write_snapshot(&path, state, *time, &config.digest)?;
        writeln!(log, "snapshot {idx} at t = {time}")?;
        snapshot_paths.push(path);
    }

    match trajectory.outcome {
        RunOutcome::Completed => {
            let t_end = trajectory.rows.last().map_or(0.0, |r| r.time);
            writeln!(log, "completed at t = {t_end}")?;
            Ok(RunArtifacts {
                trajectory,
                diagnostics_path,
                snapshot_paths,
                log_path: PathBuf::new(),
            })
        }
        RunOutcome::BlowUp {
            time,
            norm,
            threshold,
            ..
        } => Err(SrspError::BlowUp {
            time,
            norm,
            threshold,
        }),
        RunOutcome::NonFinite { time, .. } => Err(SrspError::NonFinite { time }),
        RunOutcome::PicardFailure {
            iterations,
            last_update,
            ..
        } => Err(SrspError::PicardDiverged {
            iterations,
            last_update,
            tolerance: config.integrator.picard_tol,
        }),
    }
}

/// Executes one configured run end to end. On abnormal outcomes the error
/// is returned *after* the partial diagnostics, snapshots and log entry
/// are on disk.
pub fn run(config: &RunConfig) -> Result<RunArtifacts, SrspError> {
    fs::create_dir_all(&config.output_dir)?;
    let log_path = config.output_dir.join("run.log");
    let mut log = BufWriter::new(File::create(&log_path)?);
    let result = run_logged(config, &mut log);
    let result = match result {
        Ok(mut artifacts) => {
            artifacts.log_path = log_path;
            Ok(artifacts)
        }
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            Err(e)
        }
    };
    log.flush()?;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn scratch_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("srsp-runner-{}-{tag}", std::process::id()));
        fs::remove_dir_all(&dir).ok();
        dir
    }

    fn base_config(tag: &str, extra: &str) -> RunConfig {
        let dir = scratch_dir(tag);
        let base = [
            "dim = 1",
            "gamma = 0.5",
            "coupling = 1.0",
            "mass = 1.0",
            "components = 2",
            "grid_points = 32",
            "seed = 3",
            "dt = 0.01",
            "t_final = 0.1",
        ];
        // Keys in `extra` replace the base values; TOML rejects duplicates.
        let overridden: Vec<&str> = extra
            .lines()
            .filter_map(|l| l.split('=').next())
            .map(str::trim)
            .collect();
        let mut text = String::new();
        for line in base {
            let key = line.split('=').next().unwrap().trim();
            if !overridden.contains(&key) {
                text.push_str(line);
                text.push('\n');
            }
        }
        text.push_str(&format!("output_dir = \"{}\"\n", dir.display()));
        text.push_str(extra);
        parse_config(&text).unwrap()
    }

    #[test]
    fn completed_run_writes_all_artifacts() {
        let cfg = base_config("ok", "snapshot_cadence = 5\n");
        let artifacts = run(&cfg).unwrap();
        assert_eq!(artifacts.trajectory.rows.len(), 11, "floor(t_final/dt) + 1 rows");
        assert!(artifacts.diagnostics_path.is_file());
        assert!(artifacts.log_path.is_file());
        // Cadence 5 over 10 steps: initial, step 5, step 10.
        assert_eq!(artifacts.snapshot_paths.len(), 3);
        for (path, (time, state)) in artifacts
            .snapshot_paths
            .iter()
            .zip(&artifacts.trajectory.snapshots)
        {
            let snap = snapshot::read_snapshot(path).unwrap();
            assert_eq!(snap.time().to_bits(), time.to_bits());
            assert_eq!(&snap.state, state);
            assert_eq!(snap.header.config_digest, cfg.digest);
        }
        let rows = read_diagnostics(&artifacts.diagnostics_path).unwrap();
        assert_eq!(rows, artifacts.trajectory.rows, "table round-trips exactly");
        fs::remove_dir_all(&cfg.output_dir).ok();
    }

    #[test]
    fn identical_configs_produce_identical_diagnostics_bytes() {
        let cfg_a = base_config("det-a", "");
        let cfg_b = base_config("det-b", "");
        let a = run(&cfg_a).unwrap();
        let b = run(&cfg_b).unwrap();
        let bytes_a = fs::read(&a.diagnostics_path).unwrap();
        let bytes_b = fs::read(&b.diagnostics_path).unwrap();
        assert_eq!(bytes_a, bytes_b);
        fs::remove_dir_all(&cfg_a.output_dir).ok();
        fs::remove_dir_all(&cfg_b.output_dir).ok();
    }

    #[test]
    fn focusing_run_errors_with_blowup_but_keeps_partial_diagnostics() {
        let cfg = base_config(
            "blowup",
            "coupling = -60.0\ncomponents = 1\ninit_preset = \"gaussian\"\n\
             preset_widths = [0.25]\nblowup_threshold = 1.5\ndt = 0.005\nt_final = 2.0\n",
        );
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3, "unexpected error {err}");
        let rows = read_diagnostics(&cfg.output_dir.join("diagnostics.csv")).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.last().unwrap().time < 2.0, "aborted before the horizon");
        let log = fs::read_to_string(cfg.output_dir.join("run.log")).unwrap();
        assert!(log.contains("error: blow-up"), "log: {log}");
        fs::remove_dir_all(&cfg.output_dir).ok();
    }

    #[test]
    fn header_mismatch_is_rejected_on_read() {
        let dir = scratch_dir("badcsv");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("diagnostics.csv");
        fs::write(&path, "step,time,charge_1,energy\n0,0.0,1.0,0.5\n").unwrap();
        let err = read_diagnostics(&path).unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
        fs::remove_dir_all(&dir).ok();
    }
}
