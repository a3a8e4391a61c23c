//! On-disk state snapshots.
//!
//! Layout: an ASCII magic line, a one-line JSON header, then the payload of
//! `components × total_points` complex samples as interleaved little-endian
//! `f64` pairs `(re, im)` in component-major, row-major flat order. Values
//! round-trip bit-exactly, so restarting from a snapshot reproduces the
//! producing run sample for sample. Readers reject unknown header fields,
//! malformed weights and trailing bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::SrspError;
use crate::field::ComplexField;
use crate::grid::make_grid;
use crate::state::{MixedState, WEIGHT_SUM_TOL};

pub const SNAPSHOT_MAGIC: &str = "srsp-snapshot v1";

/// Orthonormality tolerance applied when loading. Looser than the
/// construction default: long runs accumulate round-off in the Gram matrix,
/// and the reader only needs to catch corruption, not drift.
pub const READ_ORTHONORMALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub points: usize,
    pub box_length: f64,
    pub components: usize,
    pub weights: Vec<f64>,
    pub time: f64,
    pub config_digest: String,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub state: MixedState,
}

impl Snapshot {
    pub fn time(&self) -> f64 {
        self.header.time
    }
}

fn snapshot_err(message: impl Into<String>) -> SrspError {
    SrspError::Snapshot(message.into())
}

/// Serialises `state` at simulation time `time` into `sink`.
pub fn write_snapshot_to<W: Write>(
    sink: &mut W,
    state: &MixedState,
    time: f64,
    config_digest: &str,
) -> Result<(), SrspError> {
    if !time.is_finite() {
        return Err(snapshot_err(format!("snapshot time must be finite (got {time})")));
    }
    let grid = state.grid();
    let header = SnapshotHeader {
        dim: grid.dim(),
        points: grid.points(),
        box_length: grid.box_length(),
        components: state.len(),
        weights: state.weights().to_vec(),
        time,
        config_digest: config_digest.to_string(),
    };
    let mut out = BufWriter::new(sink);
    writeln!(out, "{SNAPSHOT_MAGIC}")?;
    let header_line = serde_json::to_string(&header)
        .map_err(|e| snapshot_err(format!("header serialisation failed: {e}")))?;
    writeln!(out, "{header_line}")?;
    for component in state.components() {
        for v in component.values() {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_snapshot(
    path: &Path,
    state: &MixedState,
    time: f64,
    config_digest: &str,
) -> Result<(), SrspError> {
    let mut file = File::create(path)?;
    write_snapshot_to(&mut file, state, time, config_digest)
}

fn read_line<R: Read>(source: &mut R, what: &str) -> Result<String, SrspError> {
    // One byte at a time is fine: only the two header lines come through
    // here, the payload is read in bulk.
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = source.read(&mut byte)?;
        if n == 0 {
            return Err(snapshot_err(format!("file ended while reading the {what}")));
        }
        if byte[0] == b'\n' {
            break;
        }
        if line.len() > 1 << 20 {
            return Err(snapshot_err(format!("{what} line exceeds 1 MiB")));
        }
        line.push(byte[0]);
    }
    String::from_utf8(line).map_err(|_| snapshot_err(format!("{what} is not valid UTF-8")))
}

/// Loads a snapshot, re-validating the header against the payload.
pub fn read_snapshot_from<R: Read>(source: &mut R) -> Result<Snapshot, SrspError> {
    let mut source = BufReader::new(source);
    let magic = read_line(&mut source, "magic line")?;
    if magic != SNAPSHOT_MAGIC {
        return Err(snapshot_err(format!(
            "bad magic line {magic:?}; expected {SNAPSHOT_MAGIC:?}"
        )));
    }
    let header_line = read_line(&mut source, "header")?;
    let header: SnapshotHeader = serde_json::from_str(&header_line)
        .map_err(|e| snapshot_err(format!("malformed header: {e}")))?;

    let grid = make_grid(header.dim, header.points, header.box_length)
        .map_err(|e| snapshot_err(format!("header describes an invalid grid: {e}")))?;
    if header.components == 0 || header.weights.len() != header.components {
        return Err(snapshot_err(format!(
            "header lists {} weights for {} components",
            header.weights.len(),
            header.components
        )));
    }
    if let Some((k, &w)) = header
        .weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
    {
        return Err(snapshot_err(format!("weight {k} is invalid: {w}")));
    }
    let weight_sum: f64 = header.weights.iter().sum();
    if (weight_sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(snapshot_err(format!(
            "weights sum to {weight_sum:.17}, outside the {WEIGHT_SUM_TOL:.0e} window around 1"
        )));
    }
    if !header.time.is_finite() {
        return Err(snapshot_err(format!("snapshot time is not finite: {}", header.time)));
    }

    let total = grid.total_points();
    let mut payload = vec![0u8; header.components * total * 16];
    source.read_exact(&mut payload).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            snapshot_err("payload is shorter than the header promises")
        } else {
            SrspError::Io(e)
        }
    })?;
    let mut probe = [0u8; 1];
    if source.read(&mut probe)? != 0 {
        return Err(snapshot_err("trailing bytes after the payload"));
    }

    let mut components = Vec::with_capacity(header.components);
    for chunk in payload.chunks_exact(total * 16) {
        let values: Vec<Complex64> = chunk
            .chunks_exact(16)
            .map(|pair| {
                let re = f64::from_le_bytes(pair[..8].try_into().unwrap());
                let im = f64::from_le_bytes(pair[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        components.push(
            ComplexField::new(&grid, values)
                .map_err(|e| snapshot_err(format!("payload rejected: {e}")))?,
        );
    }

    // Weights are stored post-normalisation, so they are NOT renormalised
    // here; that keeps restarts bit-exact. Orthonormality is re-checked at
    // the loose reader tolerance only.
    let state = MixedState::from_validated_parts(
        header.weights.clone(),
        components,
        READ_ORTHONORMALITY_TOL,
    );
    let residual = state.orthonormality_residual();
    if residual > READ_ORTHONORMALITY_TOL {
        return Err(snapshot_err(format!(
            "component family has orthonormality residual {residual:.3e}, beyond {READ_ORTHONORMALITY_TOL:.0e}"
        )));
    }
    Ok(Snapshot { header, state })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, SrspError> {
    let mut file = File::open(path)?;
    read_snapshot_from(&mut file)
}
