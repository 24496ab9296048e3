//! Causal low-pass filtration matched to a rising temporal mode.
//!
//! The continuous filter is a cascade of one-pole stages whose impulse
//! response is the time reversal of the target mode, so reading the filter
//! output at the herald time yields the mode quadrature with no latency.
//! Discretization maps each pole exactly (`a_n = e^{−γ_n·dt/2}`) and realizes
//! the cascade in partial-fraction (parallel) form, which reproduces the
//! continuous impulse response exactly on the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mode::{cyclic_coefficients, SampledMode, TemporalMode};

/// Cascade of first-order low-pass stages with unit-L2-norm impulse response
/// `h(τ) = gain · Σ c_n e^{−γ_n τ / 2}` for τ ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleCascade {
    /// Per-stage decay rates γ_n/2 in 1/s.
    stage_rates: Vec<f64>,
    /// Overall gain normalizing `∫ h² dτ = 1`.
    overall_gain: f64,
}

impl PoleCascade {
    /// Cascade with poles at −γ_n/2 for the given mode rates γ_n.
    pub fn from_rates(gammas: &[f64]) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidParameter("cascade needs at least one rate".into()));
        }
        for &g in gammas {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "stage rate must be positive, got {g}"
                )));
            }
        }
        let coeffs = cyclic_coefficients(gammas)?;
        let stage_rates: Vec<f64> = gammas.iter().map(|g| g / 2.0).collect();
        let mut raw = 0.0;
        for (i, &ci) in coeffs.iter().enumerate() {
            for (j, &cj) in coeffs.iter().enumerate() {
                raw += ci * cj / (stage_rates[i] + stage_rates[j]);
            }
        }
        if !(raw > 0.0) || !raw.is_finite() {
            return Err(Error::DegeneratePoles(format!(
                "ill-conditioned impulse response for rates {gammas:?}"
            )));
        }
        Ok(PoleCascade { stage_rates, overall_gain: 1.0 / raw.sqrt() })
    }

    /// Filter whose impulse response is the time reversal of `mode`.
    pub fn matched_to(mode: &TemporalMode) -> Result<Self> {
        if !mode.is_causal_rising() {
            return Err(Error::UnsupportedMode(format!(
                "matched filtration requires a rising-kind mode, got {:?}",
                mode.kind()
            )));
        }
        Self::from_rates(&mode.rates())
    }

    pub fn stage_rates(&self) -> &[f64] {
        &self.stage_rates
    }

    pub fn overall_gain(&self) -> f64 {
        self.overall_gain
    }

    /// Mode rates γ_n = 2 × stage rates.
    pub fn mode_rates(&self) -> Vec<f64> {
        self.stage_rates.iter().map(|s| 2.0 * s).collect()
    }

    /// The rising mode ending at `t0` whose time reversal is this impulse response.
    pub fn matched_mode(&self, t0: f64) -> TemporalMode {
        let gammas = self.mode_rates();
        // constructible by the cascade invariants
        TemporalMode::multi_rising(&gammas, t0).expect("cascade rates form a valid mode")
    }

    /// Continuous impulse response at lag `tau`.
    pub fn impulse_value(&self, tau: f64) -> f64 {
        if tau < 0.0 {
            return 0.0;
        }
        let coeffs = cyclic_coefficients(&self.mode_rates()).expect("validated at construction");
        let sum: f64 = coeffs
            .iter()
            .zip(&self.stage_rates)
            .map(|(c, s)| c * (-s * tau).exp())
            .sum();
        self.overall_gain * sum
    }

    /// Impulse response sampled at `τ_k = k·dt`, unit discrete norm.
    pub fn impulse_response(&self, grid: &TimeGrid) -> SampledMode {
        let sqrt_dt = grid.dt.sqrt();
        let values: Vec<f64> =
            (0..grid.n_samples).map(|k| self.impulse_value(grid.time(k)) * sqrt_dt).collect();
        SampledMode::from_values(*grid, values).expect("impulse response is nonzero")
    }

    /// Cascade with each stage rate scaled by `1 + fractions[n]`, modeling
    /// component tolerances of an analog filter.
    pub fn with_perturbed_rates(&self, fractions: &[f64]) -> Result<Self> {
        if fractions.len() != self.stage_rates.len() {
            return Err(Error::InvalidParameter(format!(
                "{} perturbations for {} stages",
                fractions.len(),
                self.stage_rates.len()
            )));
        }
        let gammas: Vec<f64> = self
            .mode_rates()
            .iter()
            .zip(fractions)
            .map(|(g, eps)| g * (1.0 + eps))
            .collect();
        Self::from_rates(&gammas)
    }

    /// Exact-pole discrete realization for sample interval `dt`.
    ///
    /// The gain is calibrated numerically so that independent N(0, 1/2) input
    /// samples produce steady-state output variance 1/2.
    pub fn discretize(&self, dt: f64) -> Result<DiscretizedFilter> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let s_max = self.stage_rates.iter().cloned().fold(0.0f64, f64::max);
        if s_max * dt >= 0.5 {
            return Err(Error::UndersampledFilter(format!(
                "dt·γ_max/2 = {:.3} ≥ 0.5; the grid does not resolve the fastest pole",
                s_max * dt
            )));
        }
        let decay: Vec<f64> = self.stage_rates.iter().map(|s| (-s * dt).exp()).collect();
        let coeffs = cyclic_coefficients(&self.mode_rates())?;
        let scale = coeffs.iter().cloned().fold(0.0f64, |m, c| m.max(c.abs()));
        let weights: Vec<f64> = coeffs.iter().map(|c| c / scale).collect();

        // Sum the squared impulse response over ~35 decay constants of the
        // slowest stage; the remaining tail is below e^-70.
        let s_min = self.stage_rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let steps = (35.0 / (s_min * dt)).ceil() as usize;
        let mut stages = vec![0.0f64; decay.len()];
        let mut sum_sq = 0.0;
        for k in 0..=steps {
            let x = if k == 0 { 1.0 } else { 0.0 };
            let mut y = 0.0;
            for (z, (&a, &w)) in stages.iter_mut().zip(decay.iter().zip(&weights)) {
                *z = a * *z + x;
                y += w * *z;
            }
            sum_sq += y * y;
        }
        Ok(DiscretizedFilter { decay, weights, input_gain: 1.0 / sum_sq.sqrt(), dt })
    }
}

/// Streaming realization of a [`PoleCascade`] on a fixed sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedFilter {
    /// Per-stage decay multipliers `a_n = e^{−γ_n·dt/2}`.
    decay: Vec<f64>,
    /// Partial-fraction combination weights, one per stage.
    weights: Vec<f64>,
    /// Input gain calibrated to the vacuum-variance target.
    input_gain: f64,
    /// Sample interval in seconds.
    dt: f64,
}

impl DiscretizedFilter {
    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    pub fn input_gain(&self) -> f64 {
        self.input_gain
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_stages(&self) -> usize {
        self.decay.len()
    }

    /// Samples needed before the output statistics are free of the start-up
    /// transient: ten decay constants of the slowest stage.
    pub fn warmup_samples(&self) -> usize {
        let a_max = self.decay.iter().cloned().fold(0.0f64, f64::max);
        (10.0 / -a_max.ln()).ceil() as usize
    }

    pub fn new_state(&self) -> FilterState {
        FilterState { stages: vec![0.0; self.decay.len()], samples_consumed: 0 }
    }

    /// Advance one sample. The output depends only on inputs seen so far.
    #[inline]
    pub fn step(&self, state: &mut FilterState, x: f64) -> f64 {
        debug_assert_eq!(state.stages.len(), self.decay.len());
        let mut y = 0.0;
        for (z, (&a, &w)) in state.stages.iter_mut().zip(self.decay.iter().zip(&self.weights)) {
            *z = a * *z + x;
            y += w * *z;
        }
        state.samples_consumed += 1;
        self.input_gain * y
    }

    /// Batch application of [`step`](Self::step) from a zero initial state.
    pub fn filter_trace(&self, trace: &[f64]) -> Vec<f64> {
        let mut state = self.new_state();
        trace.iter().map(|&x| self.step(&mut state, x)).collect()
    }
}

/// Per-stage accumulators of a running filter; one trace per state.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    stages: Vec<f64>,
    samples_consumed: u64,
}

impl FilterState {
    pub fn samples_consumed(&self) -> u64 {
        self.samples_consumed
    }
}

/// The filtered sample at the herald index: the real-time mode quadrature.
pub fn realtime_quadrature(filtered_trace: &[f64], herald_index: usize) -> Result<f64> {
    filtered_trace.get(herald_index).copied().ok_or_else(|| {
        Error::IndexOutOfRange(format!(
            "herald index {herald_index} in a trace of {} samples",
            filtered_trace.len()
        ))
    })
}
