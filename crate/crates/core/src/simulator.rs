//! Synthetic homodyne trace ensembles with heralded wavepackets.
//!
//! Traces are bin-mode quadrature samples: independent vacuum noise of
//! variance 1/2 per bin, with the component along the heralded temporal mode
//! replaced by a draw from the configured Fock-diagonal source. A long-stream
//! generator embeds wavepackets at Poisson-distributed herald times into a
//! continuous vacuum record.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{DiscretizedFilter, PoleCascade};
use crate::grid::TimeGrid;
use crate::mode::{ModeKind, SampledMode, TemporalMode};
use crate::tomography::fock_wavefunction;
use crate::util::{config_fingerprint, substream_rng, RngDomain};

fn default_bandwidth_to_rate() -> f64 {
    4.0 * std::f64::consts::PI
}

/// Temporal-mode selection: either explicit decay rates or cavity half-widths
/// converted by the `bandwidth_to_rate` factor (γ = factor × HWHM).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub kind: ModeKind,
    #[serde(default)]
    pub hwhm_hz: Option<Vec<f64>>,
    #[serde(default)]
    pub rates_per_s: Option<Vec<f64>>,
    #[serde(default = "default_bandwidth_to_rate")]
    pub bandwidth_to_rate: f64,
}

impl ModeSpec {
    pub fn rates(&self) -> Result<Vec<f64>> {
        let rates = match (&self.hwhm_hz, &self.rates_per_s) {
            (Some(h), None) => h.iter().map(|v| v * self.bandwidth_to_rate).collect(),
            (None, Some(r)) => r.clone(),
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "mode spec sets both hwhm_hz and rates_per_s; pick one".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("mode spec needs hwhm_hz or rates_per_s".into()))
            }
        };
        if rates.is_empty() {
            return Err(Error::Config("mode spec has an empty rate list".into()));
        }
        Ok(rates)
    }

    pub fn build(&self, t0: f64) -> Result<TemporalMode> {
        let rates = self.rates()?;
        match self.kind {
            ModeKind::Rising => {
                if rates.len() != 1 {
                    return Err(Error::Config("rising mode takes exactly one rate".into()));
                }
                TemporalMode::rising(rates[0], t0)
            }
            ModeKind::DoubleExponential => {
                if rates.len() != 1 {
                    return Err(Error::Config(
                        "double-exponential mode takes exactly one rate".into(),
                    ));
                }
                TemporalMode::double_exponential(rates[0], t0)
            }
            ModeKind::MultiRising => TemporalMode::multi_rising(&rates, t0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// Cascade matched to every rate of the mode.
    Matched,
    /// Single pole at the first mode rate.
    FirstOrder,
    /// Explicit stage rates.
    Custom,
}

/// Real-time filter selection plus optional per-stage rate perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: FilterKind,
    #[serde(default)]
    pub rates_per_s: Option<Vec<f64>>,
    /// Fractional rate offsets per stage, modeling analog component tolerance.
    #[serde(default)]
    pub perturbation: Option<Vec<f64>>,
}

impl FilterSpec {
    pub fn matched() -> Self {
        FilterSpec { kind: FilterKind::Matched, rates_per_s: None, perturbation: None }
    }

    pub fn build(&self, mode: &TemporalMode) -> Result<PoleCascade> {
        let cascade = match self.kind {
            FilterKind::Matched => PoleCascade::matched_to(mode)?,
            FilterKind::FirstOrder => {
                let rates = mode.rates();
                PoleCascade::from_rates(&rates[..1])?
            }
            FilterKind::Custom => {
                let rates = self.rates_per_s.as_ref().ok_or_else(|| {
                    Error::Config("custom filter needs rates_per_s".into())
                })?;
                PoleCascade::from_rates(rates)?
            }
        };
        match &self.perturbation {
            Some(eps) => cascade.with_perturbed_rates(eps),
            None => Ok(cascade),
        }
    }
}

/// Full simulation configuration; the fingerprint of this struct travels with
/// every ensemble and report derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mode: ModeSpec,
    pub grid: TimeGrid,
    /// End-to-end heralding efficiency η: the single-photon weight of the
    /// default {vacuum, single} source.
    pub efficiency: f64,
    /// Optional explicit Fock-diagonal source weights (overrides efficiency).
    #[serde(default)]
    pub source_diagonal: Option<Vec<f64>>,
    pub n_events: usize,
    /// Herald rate in events per second (stream mode).
    pub herald_rate: f64,
    pub seed: u64,
    pub filter: FilterSpec,
}

impl SimConfig {
    /// Asymmetric-cavity defaults: three rising rates from 11/19/36 MHz
    /// half-widths, 500 ns windows at 2.5 GHz, η = 0.785, 18,491 events,
    /// 1,800 heralds per second.
    pub fn paper_default() -> Self {
        SimConfig {
            mode: ModeSpec {
                kind: ModeKind::MultiRising,
                hwhm_hz: Some(vec![11e6, 19e6, 36e6]),
                rates_per_s: None,
                bandwidth_to_rate: default_bandwidth_to_rate(),
            },
            grid: TimeGrid::default_window(),
            efficiency: 0.785,
            source_diagonal: None,
            n_events: 18_491,
            herald_rate: 1800.0,
            seed: 7,
            filter: FilterSpec::matched(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Config(format!(
                "efficiency must lie in [0, 1], got {}",
                self.efficiency
            )));
        }
        if self.herald_rate < 0.0 || !self.herald_rate.is_finite() {
            return Err(Error::Config(format!("herald_rate must be ≥ 0, got {}", self.herald_rate)));
        }
        let weights = self.source_weights()?;
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Config("source weights must be nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("source weights sum to {sum}, expected 1")));
        }
        self.mode.rates()?;
        Ok(())
    }

    /// Source weights: the configured diagonal, or `{1−η, η}`.
    pub fn source_weights(&self) -> Result<Vec<f64>> {
        match &self.source_diagonal {
            Some(w) => {
                if w.is_empty() {
                    return Err(Error::Config("source_diagonal is empty".into()));
                }
                Ok(w.clone())
            }
            None => Ok(vec![1.0 - self.efficiency, self.efficiency]),
        }
    }

    /// The temporal mode placed with t0 at the grid herald time.
    pub fn build_mode(&self) -> Result<TemporalMode> {
        self.mode.build(self.grid.herald_time())
    }

    pub fn build_filter(&self, mode: &TemporalMode) -> Result<PoleCascade> {
        self.filter.build(mode)
    }

    pub fn fingerprint(&self) -> u64 {
        config_fingerprint(self)
    }
}

/// Hidden per-event ground truth, for oracle tests only; analysis never reads it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventTruth {
    /// Fock outcome drawn from the source diagonal, when known.
    pub fock_n: Option<usize>,
    /// Quadrature value carried by the mode component.
    pub mode_quadrature: f64,
}

/// One recorded window around a heralding event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeraldedTrace {
    pub event_id: u64,
    pub herald_index: usize,
    pub samples: Vec<f64>,
    pub truth: Option<EventTruth>,
}

/// Homodyne traces sharing one grid, tagged with the config fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEnsemble {
    grid: TimeGrid,
    traces: Vec<HeraldedTrace>,
    fingerprint: u64,
}

impl TraceEnsemble {
    pub fn from_traces(grid: TimeGrid, traces: Vec<HeraldedTrace>, fingerprint: u64) -> Result<Self> {
        for t in &traces {
            if t.samples.len() != grid.n_samples {
                return Err(Error::GridMismatch(format!(
                    "event {} has {} samples on a grid of {}",
                    t.event_id,
                    t.samples.len(),
                    grid.n_samples
                )));
            }
            if t.herald_index != grid.herald_index {
                return Err(Error::GridMismatch(format!(
                    "event {} heralds at {} but the grid heralds at {}",
                    t.event_id, t.herald_index, grid.herald_index
                )));
            }
        }
        Ok(TraceEnsemble { grid, traces, fingerprint })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn traces(&self) -> &[HeraldedTrace] {
        &self.traces
    }

    pub fn n_events(&self) -> usize {
        self.traces.len()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Draws quadratures from a Fock-diagonal mixture `P(x) = Σ_n ρ_nn |ψ_n(x)|²`
/// by rejection against Gaussian envelopes.
#[derive(Debug, Clone)]
pub struct SourceSampler {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    /// Rejection bound per Fock state (unused for n = 0).
    bounds: Vec<f64>,
}

impl SourceSampler {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("source needs at least one weight".into()));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidParameter("source weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "source weights sum to {total}, expected 1"
            )));
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        let bounds = (0..weights.len())
            .map(|n| if weights[n] > 0.0 && n > 0 { rejection_bound(n) } else { 0.0 })
            .collect();
        Ok(SourceSampler { weights: weights.to_vec(), cumulative, bounds })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Draw a Fock outcome from the diagonal weights.
    pub fn draw_fock(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        self.cumulative.iter().position(|&c| u < c).unwrap_or(self.weights.len() - 1)
    }

    /// Draw a quadrature given the Fock outcome `n`.
    pub fn draw_quadrature_given(&self, n: usize, rng: &mut impl Rng) -> f64 {
        if n == 0 {
            return Normal::new(0.0, 0.5f64.sqrt()).unwrap().sample(rng);
        }
        let sigma = ((n + 1) as f64).sqrt();
        let envelope = Normal::new(0.0, sigma).unwrap();
        let bound = self.bounds[n];
        loop {
            let x: f64 = envelope.sample(rng);
            let target = fock_wavefunction(n, x).powi(2);
            let q = gaussian_pdf(x, sigma);
            let u: f64 = rng.gen();
            if u * bound * q < target {
                return x;
            }
        }
    }

    /// Draw from the full mixture.
    pub fn draw(&self, rng: &mut impl Rng) -> (usize, f64) {
        let n = self.draw_fock(rng);
        (n, self.draw_quadrature_given(n, rng))
    }
}

/// One quadrature draw from a Fock-diagonal source.
pub fn sample_source_quadrature(weights: &[f64], rng: &mut impl Rng) -> Result<f64> {
    Ok(SourceSampler::new(weights)?.draw(rng).1)
}

fn gaussian_pdf(x: f64, sigma: f64) -> f64 {
    (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Upper bound on `ψ_n(x)² / N(0, n+1)(x)` from a dense scan with headroom.
fn rejection_bound(n: usize) -> f64 {
    let sigma = ((n + 1) as f64).sqrt();
    let limit = (2.0 * n as f64 + 1.0).sqrt() + 6.0;
    let points = 2000 + 400 * n;
    let mut max_ratio = 0.0f64;
    for k in 0..=points {
        let x = limit * k as f64 / points as f64;
        let ratio = fock_wavefunction(n, x).powi(2) / gaussian_pdf(x, sigma);
        max_ratio = max_ratio.max(ratio);
    }
    max_ratio * 1.05
}

/// Replace the mode component of a noise record with `X_f`:
/// `x_k = v_k + f̃_k (X_f − Σ f̃ v)`. Every mode orthogonal to f̃ is untouched.
pub fn embed_mode_quadrature(mode: &SampledMode, mode_quadrature: f64, mut noise: Vec<f64>) -> Vec<f64> {
    let proj: f64 = mode.values.iter().zip(&noise).map(|(f, v)| f * v).sum();
    let shift = mode_quadrature - proj;
    for (x, f) in noise.iter_mut().zip(&mode.values) {
        *x += f * shift;
    }
    noise
}

/// Embed a mode quadrature into fresh i.i.d. `N(0, 1/2)` vacuum noise, so the
/// component along the mode equals `X_f` exactly while every orthogonal mode
/// stays vacuum.
pub fn synthesize_trace(
    mode: &SampledMode,
    mode_quadrature: f64,
    event_id: u64,
    rng: &mut impl Rng,
) -> HeraldedTrace {
    let noise = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let v: Vec<f64> = (0..mode.grid.n_samples).map(|_| noise.sample(rng)).collect();
    HeraldedTrace {
        event_id,
        herald_index: mode.grid.herald_index,
        samples: embed_mode_quadrature(mode, mode_quadrature, v),
        truth: Some(EventTruth { fock_n: None, mode_quadrature }),
    }
}

/// Generate `n_events` independent heralded traces; bit-identical for a fixed
/// seed regardless of thread scheduling (per-event RNG substreams).
pub fn simulate_ensemble(config: &SimConfig) -> Result<TraceEnsemble> {
    config.validate()?;
    let mode = config.build_mode()?;
    let sampled = mode.sample(&config.grid)?;
    let sampler = SourceSampler::new(&config.source_weights()?)?;
    let seed = config.seed;
    let traces: Vec<HeraldedTrace> = (0..config.n_events as u64)
        .into_par_iter()
        .map(|event_id| {
            let mut rng = substream_rng(seed, RngDomain::Event, event_id);
            let (fock_n, x_f) = sampler.draw(&mut rng);
            let mut trace = synthesize_trace(&sampled, x_f, event_id, &mut rng);
            trace.truth = Some(EventTruth { fock_n: Some(fock_n), mode_quadrature: x_f });
            trace
        })
        .collect();
    TraceEnsemble::from_traces(config.grid, traces, config.fingerprint())
}

/// Continuous-stream generator: vacuum noise at the grid rate with one
/// wavepacket ending at each Poisson herald time.
///
/// Samples are emitted in chronological order once no later herald can modify
/// them, so a consumer may filter them strictly causally.
pub struct StreamSimulator {
    mode_values: Vec<f64>,
    support: usize,
    total: u64,
    heralds: Vec<u64>,
    sampler: SourceSampler,
    seed: u64,
    noise: rand_chacha::ChaCha8Rng,
    normal: Normal<f64>,
    buffer: VecDeque<f64>,
    emit_pos: u64,
    gen_pos: u64,
    next_herald: usize,
    overlap_warning: bool,
    chunk: usize,
}

impl StreamSimulator {
    pub fn new(config: &SimConfig, duration_s: f64) -> Result<Self> {
        config.validate()?;
        if !(duration_s > 0.0) || !duration_s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stream duration must be positive, got {duration_s}"
            )));
        }
        let mode = config.build_mode()?;
        if !mode.is_causal_rising() {
            return Err(Error::UnsupportedMode(
                "stream embedding requires a rising-kind mode".into(),
            ));
        }
        let sampled = mode.sample(&config.grid)?;
        // nonzero support of the causal mode: bins 0..=herald_index
        let support = config.grid.herald_index + 1;
        let mode_values = sampled.values[..support].to_vec();
        let total = (duration_s / config.grid.dt).round() as u64;

        let mut heralds = Vec::new();
        if config.herald_rate > 0.0 {
            let gap = Exp::new(config.herald_rate)
                .map_err(|_| Error::Config("invalid herald rate".into()))?;
            let mut rng = substream_rng(config.seed, RngDomain::HeraldTimes, 0);
            let mut t = 0.0f64;
            loop {
                t += gap.sample(&mut rng);
                if t >= duration_s {
                    break;
                }
                let h = (t / config.grid.dt).round() as u64;
                // keep only heralds whose full wavepacket fits in the stream
                if h >= support as u64 - 1 && h < total {
                    heralds.push(h);
                }
            }
        }
        let overlap_probability = config.herald_rate * 10.0 / mode.min_rate();
        Ok(StreamSimulator {
            mode_values,
            support,
            total,
            heralds,
            sampler: SourceSampler::new(&config.source_weights()?)?,
            seed: config.seed,
            noise: substream_rng(config.seed, RngDomain::StreamNoise, 0),
            normal: Normal::new(0.0, 0.5f64.sqrt()).unwrap(),
            buffer: VecDeque::new(),
            emit_pos: 0,
            gen_pos: 0,
            next_herald: 0,
            overlap_warning: overlap_probability > 0.01,
            chunk: 1 << 20,
        })
    }

    /// Sample indices of the embedded heralds, ascending.
    pub fn herald_indices(&self) -> &[u64] {
        &self.heralds
    }

    pub fn total_samples(&self) -> u64 {
        self.total
    }

    /// True when the herald rate is high enough for wavepackets to overlap
    /// with non-negligible probability.
    pub fn overlap_warning(&self) -> bool {
        self.overlap_warning
    }

    /// Fill `out` with the next block of samples. Returns false once the
    /// stream is exhausted.
    pub fn next_chunk(&mut self, out: &mut Vec<f64>) -> bool {
        out.clear();
        if self.emit_pos >= self.total {
            return false;
        }
        let gen_target = self.total.min(self.emit_pos + (self.chunk + self.support) as u64);
        while self.gen_pos < gen_target {
            self.buffer.push_back(self.normal.sample(&mut self.noise));
            self.gen_pos += 1;
        }
        // patch every herald whose wavepacket is now fully generated
        while self.next_herald < self.heralds.len() && self.heralds[self.next_herald] < self.gen_pos
        {
            let h = self.heralds[self.next_herald];
            let start = h + 1 - self.support as u64;
            debug_assert!(start >= self.emit_pos);
            let base = (start - self.emit_pos) as usize;
            let mut rng =
                substream_rng(self.seed, RngDomain::Event, self.next_herald as u64);
            let (_n, x_f) = self.sampler.draw(&mut rng);
            let mut proj = 0.0;
            for (j, f) in self.mode_values.iter().enumerate() {
                proj += f * self.buffer[base + j];
            }
            let shift = x_f - proj;
            for (j, f) in self.mode_values.iter().enumerate() {
                self.buffer[base + j] += f * shift;
            }
            self.next_herald += 1;
        }
        // emit samples no future herald can touch
        let emit_limit = if self.gen_pos == self.total {
            self.total
        } else {
            self.gen_pos.saturating_sub(self.support as u64)
        };
        while self.emit_pos < emit_limit {
            out.push(self.buffer.pop_front().expect("buffer tracks emit window"));
            self.emit_pos += 1;
        }
        true
    }
}

/// Run the stream through a causal filter and latch the output at each herald.
pub fn latch_stream_quadratures(
    stream: &mut StreamSimulator,
    filter: &DiscretizedFilter,
) -> Vec<f64> {
    let heralds = stream.herald_indices().to_vec();
    let mut latched = Vec::with_capacity(heralds.len());
    let mut state = filter.new_state();
    let mut next = 0usize;
    let mut pos = 0u64;
    let mut buf = Vec::new();
    while stream.next_chunk(&mut buf) {
        for &x in &buf {
            let y = filter.step(&mut state, x);
            while next < heralds.len() && heralds[next] == pos {
                latched.push(y);
                next += 1;
            }
            pos += 1;
        }
    }
    latched
}
