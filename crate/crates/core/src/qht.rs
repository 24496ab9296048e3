//! QHT1 ensemble file format.
//!
//! Little-endian layout: magic `QHT1`, version u32, dt f64, n_samples u64,
//! herald_index u64, n_events u64, config fingerprint u64, then row-major
//! f64 samples. Per-event ground truth goes to an optional JSON sidecar so
//! analysis inputs never contain it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::simulator::{EventTruth, HeraldedTrace, TraceEnsemble};

const MAGIC: [u8; 4] = *b"QHT1";
const VERSION: u32 = 1;

pub fn write_ensemble(path: &Path, ensemble: &TraceEnsemble) -> Result<()> {
    let grid = ensemble.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&grid.dt.to_le_bytes())?;
    w.write_all(&(grid.n_samples as u64).to_le_bytes())?;
    w.write_all(&(grid.herald_index as u64).to_le_bytes())?;
    w.write_all(&(ensemble.n_events() as u64).to_le_bytes())?;
    w.write_all(&ensemble.fingerprint().to_le_bytes())?;
    let mut row = Vec::with_capacity(grid.n_samples * 8);
    for trace in ensemble.traces() {
        row.clear();
        for &x in &trace.samples {
            row.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ensemble(path: &Path) -> Result<TraceEnsemble> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| truncated(path))?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "{} is not a QHT1 ensemble (bad magic {:?})",
            path.display(),
            magic
        )));
    }
    let version = read_u32(&mut r, path)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported QHT version {version} in {}; this reader understands version {VERSION}",
            path.display()
        )));
    }
    let dt = f64::from_le_bytes(read_8(&mut r, path)?);
    let n_samples = read_u64(&mut r, path)? as usize;
    let herald_index = read_u64(&mut r, path)? as usize;
    let n_events = read_u64(&mut r, path)? as usize;
    let fingerprint = u64::from_le_bytes(read_8(&mut r, path)?);
    let grid = TimeGrid::new(dt, n_samples, herald_index)
        .map_err(|e| Error::Format(format!("invalid grid in {}: {e}", path.display())))?;

    let mut traces = Vec::with_capacity(n_events);
    let mut row = vec![0u8; n_samples * 8];
    for event_id in 0..n_events as u64 {
        r.read_exact(&mut row).map_err(|_| truncated(path))?;
        let samples: Vec<f64> = row
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        traces.push(HeraldedTrace { event_id, herald_index, samples, truth: None });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format(format!("trailing bytes after {n_events} events in {}", path.display())));
    }
    TraceEnsemble::from_traces(grid, traces, fingerprint)
}

/// Sidecar path convention: `<ensemble>.truth.json`.
pub fn truth_sidecar_path(ensemble_path: &Path) -> PathBuf {
    let mut os = ensemble_path.as_os_str().to_os_string();
    os.push(".truth.json");
    PathBuf::from(os)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TruthRecord {
    event_id: u64,
    fock_n: Option<usize>,
    mode_quadrature: f64,
}

pub fn write_truth_sidecar(ensemble_path: &Path, ensemble: &TraceEnsemble) -> Result<()> {
    let records: Vec<TruthRecord> = ensemble
        .traces()
        .iter()
        .filter_map(|t| {
            t.truth.map(|truth| TruthRecord {
                event_id: t.event_id,
                fock_n: truth.fock_n,
                mode_quadrature: truth.mode_quadrature,
            })
        })
        .collect();
    let file = BufWriter::new(File::create(truth_sidecar_path(ensemble_path))?);
    serde_json::to_writer(file, &records).map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Load sidecar truth records as `(event_id, truth)` pairs.
pub fn read_truth_sidecar(ensemble_path: &Path) -> Result<Vec<(u64, EventTruth)>> {
    let file = BufReader::new(File::open(truth_sidecar_path(ensemble_path))?);
    let records: Vec<TruthRecord> =
        serde_json::from_reader(file).map_err(|e| Error::Format(e.to_string()))?;
    Ok(records
        .into_iter()
        .map(|r| (r.event_id, EventTruth { fock_n: r.fock_n, mode_quadrature: r.mode_quadrature }))
        .collect())
}

fn truncated(path: &Path) -> Error {
    Error::Format(format!("{} is truncated", path.display()))
}

fn read_8(r: &mut impl Read, path: &Path) -> Result<[u8; 8]> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|_| truncated(path))?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| truncated(path))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    Ok(u64::from_le_bytes(read_8(r, path)?))
}
