//! Maximum-likelihood reconstruction of the Fock-diagonal density matrix
//! from phase-randomized quadratures, Wigner sections, and bootstrap errors.
//!
//! Quadrature convention: vacuum variance 1/2, so the ground-state
//! wavefunction is `ψ_0(x) = π^{−1/4} e^{−x²/2}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{substream_rng, RngDomain};

/// Chunk size for deterministic parallel reductions over samples.
const REDUCE_CHUNK: usize = 4096;

/// Harmonic-oscillator eigenfunction `ψ_n(x)` by stable recurrence.
pub fn fock_wavefunction(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    for k in 0..n {
        let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * cur
            - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Number basis truncated at `cutoff` (states 0..=cutoff).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockBasis {
    cutoff: usize,
}

impl FockBasis {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::InvalidParameter("basis cutoff must be at least 1".into()));
        }
        Ok(FockBasis { cutoff })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn n_states(&self) -> usize {
        self.cutoff + 1
    }

    pub fn wavefunction(&self, n: usize, x: f64) -> Result<f64> {
        if n > self.cutoff {
            return Err(Error::IndexOutOfRange(format!(
                "state {n} above basis cutoff {}",
                self.cutoff
            )));
        }
        Ok(fock_wavefunction(n, x))
    }

    /// All `ψ_n(x)²` for n = 0..=cutoff in one recurrence pass.
    pub fn probabilities(&self, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_states());
        let mut prev = 0.0;
        let mut cur = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
        out.push(cur * cur);
        for k in 0..self.cutoff {
            let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * cur
                - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
            out.push(cur * cur);
        }
        out
    }
}

/// Fock-diagonal density matrix: nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityDiagonal {
    weights: Vec<f64>,
}

impl DensityDiagonal {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("density matrix needs at least one weight".into()));
        }
        for (n, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("weight ρ_{n}{n} = {w} is invalid")));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("weights sum to {sum}, expected 1")));
        }
        // renormalize residual float error away so the trace-1 invariant is tight
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(DensityDiagonal { weights })
    }

    pub fn uniform(basis: &FockBasis) -> Self {
        let n = basis.n_states();
        DensityDiagonal { weights: vec![1.0 / n as f64; n] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, n: usize) -> f64 {
        self.weights.get(n).copied().unwrap_or(0.0)
    }

    pub fn cutoff(&self) -> usize {
        self.weights.len() - 1
    }

    /// Quadrature density `P(x) = Σ_n ρ_nn |ψ_n(x)|²`.
    pub fn quadrature_density(&self, x: f64) -> f64 {
        let basis = FockBasis { cutoff: self.cutoff() };
        basis.probabilities(x).iter().zip(&self.weights).map(|(p, w)| p * w).sum()
    }

    /// Mean photon number.
    pub fn mean_photon_number(&self) -> f64 {
        self.weights.iter().enumerate().map(|(n, w)| n as f64 * w).sum()
    }
}

/// Outcome of the expectation-maximization reconstruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MleResult {
    pub rho: DensityDiagonal,
    pub iterations: usize,
    pub converged: bool,
    /// Last change of the mean log-likelihood.
    pub final_delta: f64,
    /// Mean log-likelihood before each update.
    pub log_likelihood: Vec<f64>,
    pub n_samples: usize,
    /// Set when fewer than 100 samples were supplied.
    pub low_sample_warning: bool,
}

/// Expectation-maximization fixed point of the phase-randomized likelihood:
/// `ρ_nn ← ρ_nn · (1/N) Σ_i ψ_n(x_i)² / P(x_i)` with trace renormalization.
pub fn mle_diagonal(
    samples: &[f64],
    basis: &FockBasis,
    max_iters: usize,
    tol: f64,
) -> Result<MleResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no quadrature samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Format("non-finite quadrature sample".into()));
    }
    let n_states = basis.n_states();
    let prob: Vec<Vec<f64>> = samples.iter().map(|&x| basis.probabilities(x)).collect();

    let n = samples.len() as f64;
    let mut rho = DensityDiagonal::uniform(basis);
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut final_delta = f64::NAN;
    let mut iterations = 0;

    for iter in 0..max_iters {
        // E-step with a deterministic chunked reduction
        let partials: Vec<(f64, Vec<f64>)> = prob
            .par_chunks(REDUCE_CHUNK)
            .map(|chunk| {
                let mut ll = 0.0;
                let mut ratios = vec![0.0f64; n_states];
                for row in chunk {
                    let p: f64 =
                        row.iter().zip(rho.weights()).map(|(q, w)| q * w).sum::<f64>().max(1e-300);
                    ll += p.ln();
                    for (r, q) in ratios.iter_mut().zip(row) {
                        *r += q / p;
                    }
                }
                (ll, ratios)
            })
            .collect();
        let mut ll = 0.0;
        let mut ratios = vec![0.0f64; n_states];
        for (l, r) in partials {
            ll += l;
            for (acc, v) in ratios.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let ll = ll / n;

        if let Some(&prev) = history.last() {
            final_delta = ll - prev;
            // EM guarantees monotone likelihood; leave room for float rounding only
            assert!(
                final_delta >= -1e-12 * (1.0 + prev.abs()),
                "EM log-likelihood decreased: {prev} -> {ll}"
            );
            if final_delta.abs() < tol {
                history.push(ll);
                converged = true;
                iterations = iter;
                break;
            }
        }
        history.push(ll);
        iterations = iter + 1;

        let updated: Vec<f64> =
            rho.weights().iter().zip(&ratios).map(|(w, r)| w * r / n).collect();
        let sum: f64 = updated.iter().sum();
        // multiplicative update keeps weights nonnegative; renormalize the trace
        rho = DensityDiagonal::new(updated.into_iter().map(|w| w / sum).collect())?;
    }

    Ok(MleResult {
        rho,
        iterations,
        converged,
        final_delta,
        log_likelihood: history,
        n_samples: samples.len(),
        low_sample_warning: samples.len() < 100,
    })
}

/// Laguerre polynomials `L_0..L_max` at `z` by recurrence.
fn laguerre_all(z: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    out.push(1.0 - z);
    for n in 1..n_max {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 - z) * out[n] - nf * out[n - 1]) / (nf + 1.0);
        out.push(next);
    }
    out
}

/// Wigner function at phase-space radius `r` (section through the origin):
/// `W(r) = (1/π) Σ_n ρ_nn (−1)ⁿ e^{−r²} L_n(2r²)`.
pub fn wigner_radial(rho: &DensityDiagonal, r: f64) -> f64 {
    let z = 2.0 * r * r;
    let lag = laguerre_all(z, rho.cutoff());
    let sum: f64 = rho
        .weights()
        .iter()
        .enumerate()
        .map(|(n, &w)| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            w * sign * lag[n]
        })
        .sum();
    sum * (-r * r).exp() / std::f64::consts::PI
}

/// Wigner section along a line through the origin, one value per radius.
pub fn wigner_section(rho: &DensityDiagonal, radii: &[f64]) -> Vec<f64> {
    radii.iter().map(|&r| wigner_radial(rho, r)).collect()
}

/// Closed-form origin value `W(0,0) = (1/π) Σ_n (−1)ⁿ ρ_nn`.
pub fn wigner_origin(rho: &DensityDiagonal) -> f64 {
    let sum: f64 = rho
        .weights()
        .iter()
        .enumerate()
        .map(|(n, &w)| if n % 2 == 0 { w } else { -w })
        .sum();
    sum / std::f64::consts::PI
}

/// Element-wise mean and standard deviation of an estimator over bootstrap
/// replicas (resampling events with replacement).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub replicates: usize,
}

pub fn bootstrap<F>(
    samples: &[f64],
    estimator: F,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapSummary>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples to resample".into()));
    }
    if replicates < 2 {
        return Err(Error::InvalidParameter("bootstrap needs at least 2 replicates".into()));
    }
    let estimates: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream_rng(seed, RngDomain::Bootstrap, r as u64);
            let resampled: Vec<f64> = (0..samples.len())
                .map(|_| samples[rand::Rng::gen_range(&mut rng, 0..samples.len())])
                .collect();
            estimator(&resampled)
        })
        .collect();
    let width = estimates[0].len();
    if estimates.iter().any(|e| e.len() != width) {
        return Err(Error::Format("estimator returned inconsistent lengths".into()));
    }
    let mut mean = vec![0.0f64; width];
    for e in &estimates {
        for (m, v) in mean.iter_mut().zip(e) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= replicates as f64;
    }
    let mut var = vec![0.0f64; width];
    for e in &estimates {
        for ((v, m), x) in var.iter_mut().zip(&mean).zip(e) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var.into_iter().map(|v| (v / (replicates as f64 - 1.0)).sqrt()).collect();
    Ok(BootstrapSummary { mean, std, replicates })
}
