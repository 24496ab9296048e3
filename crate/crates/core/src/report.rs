//! Report emission: CSV data tables for each figure-style product and a
//! machine-readable JSON summary. Every file carries the fingerprints of the
//! configuration that produced it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    Channel, Histogram, JointHistogram, QuadratureSet, TimeResolvedHistogram, VarianceProfile,
};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mode::SampledMode;
use crate::tomography::DensityDiagonal;

pub fn hex_fingerprint(fp: u64) -> String {
    format!("{fp:016x}")
}

/// Tomography results for one measurement channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelReport {
    pub channel: Channel,
    pub n_events: usize,
    pub variance: f64,
    /// Diagonal density-matrix elements ρ_nn with bootstrap errors.
    pub rho: Vec<f64>,
    pub rho_err: Vec<f64>,
    pub single_photon_fraction: f64,
    pub single_photon_fraction_err: f64,
    pub wigner_origin: f64,
    pub wigner_origin_err: f64,
    pub mle_iterations: usize,
    pub mle_converged: bool,
    pub mle_final_delta: f64,
    pub bootstrap_replicates: usize,
}

/// Machine-readable end-to-end summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub config_fingerprint: String,
    pub data_fingerprint: String,
    pub seed: u64,
    pub n_events: usize,
    pub mode_match_pca_vs_theory: f64,
    pub pca_iterations: usize,
    pub pca_converged: bool,
    pub mode_truncated_mass: f64,
    pub variance_realtime: f64,
    pub variance_postprocessed: f64,
    /// Correlation between channels with the exactly matched filter.
    pub correlation_matched: f64,
    /// Correlation with per-stage rate perturbations applied.
    pub correlation_perturbed: f64,
    pub filter_perturbation: Vec<f64>,
    pub variance_profile_peak_index: usize,
    pub herald_index: usize,
    pub tomography_cutoff: usize,
    pub channels: Vec<ChannelReport>,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, summary).map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let file = BufReader::new(File::open(path)?);
    serde_json::from_reader(file).map_err(|e| Error::Format(e.to_string()))
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Estimated vs theoretical mode samples (time measured from the herald).
pub fn write_csv_mode_estimate(
    path: &Path,
    estimated: &SampledMode,
    theory: &SampledMode,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    writeln!(w, "time_from_herald_ns,estimated,theory")?;
    let grid = &estimated.grid;
    for k in 0..grid.n_samples {
        writeln!(
            w,
            "{},{},{}",
            grid.time_from_herald(k) * 1e9,
            estimated.values[k],
            theory.values[k]
        )?;
    }
    Ok(())
}

pub fn write_csv_variance_profile(
    path: &Path,
    grid: &TimeGrid,
    profile: &VarianceProfile,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    writeln!(w, "time_from_herald_ns,variance,warmed_up")?;
    for (k, v) in profile.values.iter().enumerate() {
        writeln!(
            w,
            "{},{},{}",
            grid.time_from_herald(k) * 1e9,
            v,
            u8::from(k >= profile.warmup_samples)
        )?;
    }
    Ok(())
}

pub fn write_csv_histogram(path: &Path, hist: &Histogram) -> Result<()> {
    let mut w = csv_writer(path)?;
    writeln!(w, "bin_center,count")?;
    for (k, &c) in hist.counts.iter().enumerate() {
        writeln!(w, "{},{}", hist.spec.bin_center(k), c)?;
    }
    Ok(())
}

pub fn write_csv_joint_histogram(path: &Path, joint: &JointHistogram) -> Result<()> {
    let mut w = csv_writer(path)?;
    writeln!(w, "x_center,y_center,count")?;
    for (i, row) in joint.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            writeln!(w, "{},{},{}", joint.spec.bin_center(i), joint.spec.bin_center(j), c)?;
        }
    }
    Ok(())
}

/// Heat-map matrix: one row per time sample, one column per quadrature bin.
pub fn write_csv_time_resolved(
    path: &Path,
    grid: &TimeGrid,
    trh: &TimeResolvedHistogram,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    write!(w, "time_from_herald_ns")?;
    for b in 0..trh.spec.n_bins {
        write!(w, ",{}", trh.spec.bin_center(b))?;
    }
    writeln!(w)?;
    for (k, row) in trh.counts.iter().enumerate() {
        write!(w, "{}", grid.time_from_herald(k) * 1e9)?;
        for &c in row {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_csv_density(path: &Path, rho: &DensityDiagonal, err: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    writeln!(w, "n,rho,err")?;
    for (n, &p) in rho.weights().iter().enumerate() {
        writeln!(w, "{},{},{}", n, p, err.get(n).copied().unwrap_or(f64::NAN))?;
    }
    Ok(())
}

/// Wigner section through the phase-space origin over `x ∈ [−5, 5]`.
pub fn write_csv_wigner_section(path: &Path, rho: &DensityDiagonal) -> Result<()> {
    let mut w = csv_writer(path)?;
    writeln!(w, "x,wigner")?;
    for k in 0..=200 {
        let x = -5.0 + 0.05 * k as f64;
        writeln!(w, "{},{}", x, crate::tomography::wigner_radial(rho, x.abs()))?;
    }
    Ok(())
}

/// Paired per-event quadratures; also the input format of the tomography command.
pub fn write_csv_quadratures(
    path: &Path,
    realtime: &QuadratureSet,
    postprocessed: &QuadratureSet,
) -> Result<()> {
    if realtime.event_ids != postprocessed.event_ids {
        return Err(Error::InvalidParameter("quadrature sets pair different events".into()));
    }
    let mut w = csv_writer(path)?;
    writeln!(w, "event_id,realtime,postprocessed")?;
    for ((id, rt), pp) in
        realtime.event_ids.iter().zip(&realtime.values).zip(&postprocessed.values)
    {
        writeln!(w, "{id},{rt},{pp}")?;
    }
    Ok(())
}

pub fn read_csv_quadratures(path: &Path) -> Result<(QuadratureSet, QuadratureSet)> {
    let file = BufReader::new(File::open(path)?);
    let mut lines = file.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?
        .map_err(Error::Io)?;
    if header.trim() != "event_id,realtime,postprocessed" {
        return Err(Error::Format(format!(
            "unexpected quadrature header in {}: {header:?}",
            path.display()
        )));
    }
    let mut event_ids = Vec::new();
    let mut rt = Vec::new();
    let mut pp = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse_err =
            |what: &str| Error::Format(format!("line {}: bad {what} in {}", lineno + 2, path.display()));
        let id: u64 = parts
            .next()
            .ok_or_else(|| parse_err("event_id"))?
            .trim()
            .parse()
            .map_err(|_| parse_err("event_id"))?;
        let a: f64 = parts
            .next()
            .ok_or_else(|| parse_err("realtime value"))?
            .trim()
            .parse()
            .map_err(|_| parse_err("realtime value"))?;
        let b: f64 = parts
            .next()
            .ok_or_else(|| parse_err("postprocessed value"))?
            .trim()
            .parse()
            .map_err(|_| parse_err("postprocessed value"))?;
        event_ids.push(id);
        rt.push(a);
        pp.push(b);
    }
    if event_ids.is_empty() {
        return Err(Error::Format(format!("{} has no data rows", path.display())));
    }
    Ok((
        QuadratureSet {
            channel: Channel::Realtime,
            event_ids: event_ids.clone(),
            values: rt,
            fingerprint: 0,
        },
        QuadratureSet {
            channel: Channel::Postprocessed,
            event_ids,
            values: pp,
            fingerprint: 0,
        },
    ))
}
