//! Quadrature extraction and statistical verification of trace ensembles:
//! postprocessed vs real-time channels, principal-component mode estimation,
//! variance profiles, correlation, and histogram exports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{realtime_quadrature, DiscretizedFilter};
use crate::mode::SampledMode;
use crate::simulator::TraceEnsemble;

/// Events per block in deterministic parallel reductions.
const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Causal filter output latched at the herald.
    Realtime,
    /// Weighted integration of the raw trace after the fact.
    Postprocessed,
}

/// Per-event quadrature outcomes for one measurement channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSet {
    pub channel: Channel,
    pub event_ids: Vec<u64>,
    pub values: Vec<f64>,
    pub fingerprint: u64,
}

impl QuadratureSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.mean();
        self.values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    }
}

/// `Σ_k f̃_k x_k`: the mode quadrature of one recorded trace.
pub fn postprocess_quadrature(samples: &[f64], mode: &SampledMode) -> Result<f64> {
    if samples.len() != mode.grid.n_samples {
        return Err(Error::GridMismatch(format!(
            "trace of {} samples against a mode sampled on {}",
            samples.len(),
            mode.grid.n_samples
        )));
    }
    Ok(mode.values.iter().zip(samples).map(|(f, x)| f * x).sum())
}

/// Postprocessed quadratures for every event of an ensemble.
pub fn postprocessed_quadratures(
    ensemble: &TraceEnsemble,
    mode: &SampledMode,
) -> Result<QuadratureSet> {
    if *ensemble.grid() != mode.grid {
        return Err(Error::GridMismatch("ensemble and mode grids differ".into()));
    }
    let values = ensemble
        .traces()
        .par_iter()
        .map(|t| postprocess_quadrature(&t.samples, mode))
        .collect::<Result<Vec<f64>>>()?;
    Ok(QuadratureSet {
        channel: Channel::Postprocessed,
        event_ids: ensemble.traces().iter().map(|t| t.event_id).collect(),
        values,
        fingerprint: ensemble.fingerprint(),
    })
}

fn check_filter_grid(ensemble: &TraceEnsemble, filter: &DiscretizedFilter) -> Result<()> {
    let dt = ensemble.grid().dt;
    if ((filter.dt() - dt) / dt).abs() > 1e-12 {
        return Err(Error::GridMismatch(format!(
            "filter discretized at dt = {} on a grid with dt = {}",
            filter.dt(),
            dt
        )));
    }
    Ok(())
}

/// Filter every trace causally and latch the output at the herald index.
pub fn realtime_quadratures(
    ensemble: &TraceEnsemble,
    filter: &DiscretizedFilter,
) -> Result<QuadratureSet> {
    check_filter_grid(ensemble, filter)?;
    let herald = ensemble.grid().herald_index;
    let values = ensemble
        .traces()
        .par_iter()
        .map(|t| realtime_quadrature(&filter.filter_trace(&t.samples), herald))
        .collect::<Result<Vec<f64>>>()?;
    Ok(QuadratureSet {
        channel: Channel::Realtime,
        event_ids: ensemble.traces().iter().map(|t| t.event_id).collect(),
        values,
        fingerprint: ensemble.fingerprint(),
    })
}

/// Leading principal component of the trace autocorrelation matrix.
#[derive(Debug, Clone)]
pub struct PcaEstimate {
    /// Estimated temporal mode, unit discrete norm, sign-aligned.
    pub mode: SampledMode,
    pub iterations: usize,
    /// Final L2 change of the iterated vector.
    pub delta: f64,
    pub converged: bool,
    /// Set when there are fewer events than samples per trace.
    pub underdetermined: bool,
}

/// Estimate the temporal mode as the leading eigenvector of
/// `C = (1/N) Σ_i x_i x_iᵀ` by power iteration on the raw traces.
///
/// The iteration starts from `reference` when given (falling back to a unit
/// vector at the herald) and the sign is fixed so the inner product with the
/// reference is positive, else so the largest-magnitude entry is positive.
pub fn pca_mode_estimate(
    ensemble: &TraceEnsemble,
    reference: Option<&SampledMode>,
    tol: f64,
    max_iters: usize,
) -> Result<PcaEstimate> {
    let n_events = ensemble.n_events();
    if n_events < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 traces, got {n_events}"
        )));
    }
    if let Some(r) = reference {
        if r.grid != *ensemble.grid() {
            return Err(Error::GridMismatch("reference mode grid differs from ensemble".into()));
        }
    }
    let n = ensemble.grid().n_samples;
    let mut v: Vec<f64> = match reference {
        Some(r) => r.values.clone(),
        None => {
            let mut e = vec![0.0; n];
            e[ensemble.grid().herald_index] = 1.0;
            e
        }
    };

    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iters {
        // w = Σ_i (x_i·v) x_i, accumulated blockwise in a fixed order
        let partials: Vec<Vec<f64>> = ensemble
            .traces()
            .par_chunks(BLOCK)
            .map(|chunk| {
                let mut acc = vec![0.0f64; n];
                for t in chunk {
                    let s: f64 = t.samples.iter().zip(&v).map(|(x, vi)| x * vi).sum();
                    for (a, x) in acc.iter_mut().zip(&t.samples) {
                        *a += s * x;
                    }
                }
                acc
            })
            .collect();
        let mut w = vec![0.0f64; n];
        for p in partials {
            for (acc, x) in w.iter_mut().zip(p) {
                *acc += x;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InsufficientData("ensemble is identically zero".into()));
        }
        for x in &mut w {
            *x /= norm;
        }
        delta = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        v = w;
        iterations += 1;
        if delta < tol {
            converged = true;
            break;
        }
    }

    let flip = match reference {
        Some(r) => v.iter().zip(&r.values).map(|(a, b)| a * b).sum::<f64>() < 0.0,
        None => {
            let (k, _) = v.iter().enumerate().fold((0, 0.0f64), |best, (k, &x)| {
                if x.abs() > best.1 {
                    (k, x.abs())
                } else {
                    best
                }
            });
            v[k] < 0.0
        }
    };
    if flip {
        for x in &mut v {
            *x = -*x;
        }
    }

    Ok(PcaEstimate {
        mode: SampledMode {
            grid: *ensemble.grid(),
            values: v,
            truncated_mass: 0.0,
            truncation_warning: false,
        },
        iterations,
        delta,
        converged,
        underdetermined: n_events < n,
    })
}

/// Per-sample ensemble variance of the filtered traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceProfile {
    pub values: Vec<f64>,
    /// First sample index free of the filter start-up transient.
    pub warmup_samples: usize,
}

pub fn variance_profile(
    ensemble: &TraceEnsemble,
    filter: &DiscretizedFilter,
) -> Result<VarianceProfile> {
    check_filter_grid(ensemble, filter)?;
    let n_events = ensemble.n_events();
    if n_events < 2 {
        return Err(Error::InsufficientData("variance needs at least 2 traces".into()));
    }
    let n = ensemble.grid().n_samples;
    let partials: Vec<(Vec<f64>, Vec<f64>)> = ensemble
        .traces()
        .par_chunks(BLOCK)
        .map(|chunk| {
            let mut sum = vec![0.0f64; n];
            let mut sum_sq = vec![0.0f64; n];
            for t in chunk {
                let filtered = filter.filter_trace(&t.samples);
                for ((s, q), y) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(filtered) {
                    *s += y;
                    *q += y * y;
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = vec![0.0f64; n];
    let mut sum_sq = vec![0.0f64; n];
    for (s, q) in partials {
        for k in 0..n {
            sum[k] += s[k];
            sum_sq[k] += q[k];
        }
    }
    let nf = n_events as f64;
    let values = (0..n)
        .map(|k| ((sum_sq[k] - sum[k] * sum[k] / nf) / (nf - 1.0)).max(0.0))
        .collect();
    Ok(VarianceProfile { values, warmup_samples: filter.warmup_samples().min(n) })
}

/// Pearson correlation coefficient between two paired quadrature sets.
pub fn pearson_correlation(a: &QuadratureSet, b: &QuadratureSet) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "unpaired quadrature sets: {} vs {} events",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData("correlation needs at least 2 events".into()));
    }
    if a.event_ids != b.event_ids {
        return Err(Error::InvalidParameter("quadrature sets pair different events".into()));
    }
    let n = a.len() as f64;
    let ma = a.mean();
    let mb = b.mean();
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::InvalidParameter("zero-variance channel in correlation".into()));
    }
    let _ = n;
    Ok(cov / (va * vb).sqrt())
}

/// Uniform binning over `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub n_bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec { lo: -5.0, hi: 5.0, n_bins: 81 }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.hi > self.lo) || self.n_bins == 0 {
            return Err(Error::InvalidParameter(format!(
                "invalid histogram spec [{}, {}) with {} bins",
                self.lo, self.hi, self.n_bins
            )));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.n_bins as f64
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.bin_width()
    }

    fn bin_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        Some((((x - self.lo) / self.bin_width()) as usize).min(self.n_bins - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub spec: HistogramSpec,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

pub fn histogram(values: &[f64], spec: &HistogramSpec) -> Result<Histogram> {
    spec.validate()?;
    if values.is_empty() {
        return Err(Error::InsufficientData("histogram of an empty value set".into()));
    }
    let mut counts = vec![0u64; spec.n_bins];
    let mut underflow = 0;
    let mut overflow = 0;
    for &x in values {
        match spec.bin_of(x) {
            Some(k) => counts[k] += 1,
            None if x < spec.lo => underflow += 1,
            None => overflow += 1,
        }
    }
    Ok(Histogram { spec: *spec, counts, underflow, overflow })
}

/// 2D histogram of paired values; `counts[i][j]` bins `a` along i, `b` along j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointHistogram {
    pub spec: HistogramSpec,
    pub counts: Vec<Vec<u64>>,
    pub outside: u64,
}

pub fn joint_histogram(a: &[f64], b: &[f64], spec: &HistogramSpec) -> Result<JointHistogram> {
    spec.validate()?;
    if a.len() != b.len() {
        return Err(Error::InvalidParameter("joint histogram needs paired values".into()));
    }
    if a.is_empty() {
        return Err(Error::InsufficientData("joint histogram of an empty value set".into()));
    }
    let mut counts = vec![vec![0u64; spec.n_bins]; spec.n_bins];
    let mut outside = 0;
    for (&x, &y) in a.iter().zip(b) {
        match (spec.bin_of(x), spec.bin_of(y)) {
            (Some(i), Some(j)) => counts[i][j] += 1,
            _ => outside += 1,
        }
    }
    Ok(JointHistogram { spec: *spec, counts, outside })
}

/// Histogram of the filtered signal at every sample time: the data behind a
/// density heat map of the distribution evolving through the herald.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeResolvedHistogram {
    pub spec: HistogramSpec,
    /// `counts[k]` is the histogram over events of filtered sample k.
    pub counts: Vec<Vec<u64>>,
}

pub fn time_resolved_histogram(
    ensemble: &TraceEnsemble,
    filter: &DiscretizedFilter,
    spec: &HistogramSpec,
) -> Result<TimeResolvedHistogram> {
    spec.validate()?;
    check_filter_grid(ensemble, filter)?;
    if ensemble.n_events() == 0 {
        return Err(Error::InsufficientData("empty ensemble".into()));
    }
    let n = ensemble.grid().n_samples;
    let partials: Vec<Vec<Vec<u64>>> = ensemble
        .traces()
        .par_chunks(BLOCK)
        .map(|chunk| {
            let mut counts = vec![vec![0u64; spec.n_bins]; n];
            for t in chunk {
                for (k, y) in filter.filter_trace(&t.samples).into_iter().enumerate() {
                    if let Some(b) = spec.bin_of(y) {
                        counts[k][b] += 1;
                    }
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![vec![0u64; spec.n_bins]; n];
    for p in partials {
        for (row, prow) in counts.iter_mut().zip(p) {
            for (c, v) in row.iter_mut().zip(prow) {
                *c += v;
            }
        }
    }
    Ok(TimeResolvedHistogram { spec: *spec, counts })
}
