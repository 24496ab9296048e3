//! Causal temporal-mode functions of the heralded wavepacket.
//!
//! All modes are built from exponential terms around a herald time t0 and are
//! normalized to unit L2 norm. Inner products between any two modes are
//! evaluated in closed form by integrating the piecewise-exponential product
//! segment by segment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Minimum relative pole separation before coefficients are declared degenerate.
const DEGENERACY_TOL: f64 = 1e-6;

/// Lead time required before t0, in units of 1/min(rate), to keep the
/// truncated mass of a sampled mode below e^-20.
const TRUNCATION_LEAD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    /// Exponentially rising, vanishing after t0.
    Rising,
    /// Two-sided exponential decay around t0.
    DoubleExponential,
    /// Linear combination of rising exponentials with distinct rates.
    MultiRising,
}

/// One exponential term: `coeff · exp(rate · (t − t0) / 2)` on the causal side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTerm {
    /// Decay rate γ in 1/s.
    pub rate: f64,
    /// Dimensionless combination coefficient (before overall normalization).
    pub coeff: f64,
}

/// Analytic temporal mode with unit L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModeRecord", try_from = "ModeRecord")]
pub struct TemporalMode {
    kind: ModeKind,
    terms: Vec<ModeTerm>,
    t0: f64,
    norm_constant: f64,
}

/// Serialized form of a mode: `{kind, gammas, coefficients, t0, norm}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRecord {
    pub kind: ModeKind,
    pub gammas: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub t0: f64,
    pub norm: f64,
}

impl From<TemporalMode> for ModeRecord {
    fn from(mode: TemporalMode) -> Self {
        ModeRecord {
            kind: mode.kind,
            gammas: mode.terms.iter().map(|t| t.rate).collect(),
            coefficients: mode.terms.iter().map(|t| t.coeff).collect(),
            t0: mode.t0,
            norm: mode.norm_constant,
        }
    }
}

impl TryFrom<ModeRecord> for TemporalMode {
    type Error = Error;

    // The rates and kind are authoritative; coefficients and norm are
    // rederived so a hand-edited record cannot break the invariants.
    fn try_from(rec: ModeRecord) -> Result<Self> {
        match rec.kind {
            ModeKind::Rising => {
                if rec.gammas.len() != 1 {
                    return Err(Error::InvalidParameter(
                        "rising mode record needs exactly one rate".into(),
                    ));
                }
                TemporalMode::rising(rec.gammas[0], rec.t0)
            }
            ModeKind::DoubleExponential => {
                if rec.gammas.len() != 1 {
                    return Err(Error::InvalidParameter(
                        "double-exponential mode record needs exactly one rate".into(),
                    ));
                }
                TemporalMode::double_exponential(rec.gammas[0], rec.t0)
            }
            ModeKind::MultiRising => TemporalMode::multi_rising(&rec.gammas, rec.t0),
        }
    }
}

impl TemporalMode {
    /// Rising mode `√γ · exp(γ(t−t0)/2)` for t ≤ t0, zero afterwards.
    pub fn rising(gamma: f64, t0: f64) -> Result<Self> {
        check_rate(gamma)?;
        Ok(TemporalMode {
            kind: ModeKind::Rising,
            terms: vec![ModeTerm { rate: gamma, coeff: 1.0 }],
            t0,
            norm_constant: gamma.sqrt(),
        })
    }

    /// Two-sided mode `√(γ/2) · exp(−γ|t−t0|/2)`.
    pub fn double_exponential(gamma: f64, t0: f64) -> Result<Self> {
        check_rate(gamma)?;
        Ok(TemporalMode {
            kind: ModeKind::DoubleExponential,
            terms: vec![ModeTerm { rate: gamma, coeff: 1.0 }],
            t0,
            norm_constant: (gamma / 2.0).sqrt(),
        })
    }

    /// Normalized combination of rising exponentials with the cyclic
    /// coefficients `c_n = 1 / Π_{m≠n} (γ_m − γ_n)`.
    pub fn multi_rising(gammas: &[f64], t0: f64) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidParameter("need at least one rate".into()));
        }
        for &g in gammas {
            check_rate(g)?;
        }
        let coeffs = cyclic_coefficients(gammas)?;
        // raw L2 norm of Σ c_n e^{γ_n u / 2} over u ≤ 0
        let mut raw = 0.0;
        for (i, &ci) in coeffs.iter().enumerate() {
            for (j, &cj) in coeffs.iter().enumerate() {
                raw += ci * cj / ((gammas[i] + gammas[j]) / 2.0);
            }
        }
        if !(raw > 0.0) || !raw.is_finite() {
            return Err(Error::DegeneratePoles(format!(
                "ill-conditioned coefficients for rates {gammas:?}"
            )));
        }
        let terms = gammas
            .iter()
            .zip(&coeffs)
            .map(|(&rate, &coeff)| ModeTerm { rate, coeff })
            .collect();
        Ok(TemporalMode {
            kind: ModeKind::MultiRising,
            terms,
            t0,
            norm_constant: 1.0 / raw.sqrt(),
        })
    }

    pub fn kind(&self) -> ModeKind {
        self.kind
    }

    pub fn terms(&self) -> &[ModeTerm] {
        &self.terms
    }

    pub fn rates(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.rate).collect()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    pub fn min_rate(&self) -> f64 {
        self.terms.iter().map(|t| t.rate).fold(f64::INFINITY, f64::min)
    }

    /// True for modes that vanish for t > t0.
    pub fn is_causal_rising(&self) -> bool {
        matches!(self.kind, ModeKind::Rising | ModeKind::MultiRising)
    }

    /// Mode amplitude at time `t`.
    pub fn value(&self, t: f64) -> f64 {
        let u = t - self.t0;
        match self.kind {
            ModeKind::Rising | ModeKind::MultiRising => {
                if u > 0.0 {
                    0.0
                } else {
                    let sum: f64 =
                        self.terms.iter().map(|c| c.coeff * (c.rate * u / 2.0).exp()).sum();
                    self.norm_constant * sum
                }
            }
            ModeKind::DoubleExponential => {
                self.norm_constant * (-self.terms[0].rate * u.abs() / 2.0).exp()
            }
        }
    }

    /// Exact continuous inner product `∫ f(t) g(t) dt`.
    pub fn inner_product(&self, other: &TemporalMode) -> f64 {
        let (a, b) = if self.t0 <= other.t0 { (self, other) } else { (other, self) };
        let delta = b.t0 - a.t0;
        let sa = a.sides();
        let sb = b.sides();
        let mut total = 0.0;
        // (−∞, a.t0]: both on their causal side
        for &(a1, r1) in &sa.left {
            for &(a2, r2) in &sb.left {
                total += a1 * a2 * (-r2 * delta).exp() / (r1 + r2);
            }
        }
        // [a.t0, b.t0]: a decays forwards, b still rising
        for &(a1, r1) in &sa.right {
            for &(a2, r2) in &sb.left {
                total += a1 * a2 * cross_segment(delta, r1, r2);
            }
        }
        // [b.t0, ∞): both decaying
        for &(a1, r1) in &sa.right {
            for &(a2, r2) in &sb.right {
                total += a1 * a2 * (-r1 * delta).exp() / (r1 + r2);
            }
        }
        total
    }

    /// Squared overlap `|⟨f, g⟩|²` between unit-norm modes.
    pub fn mode_match(&self, other: &TemporalMode) -> f64 {
        let ip = self.inner_product(other);
        ip * ip
    }

    /// Bin-mode samples `f(t_k)·√dt`, renormalized over the finite window.
    ///
    /// The mass of the mode lying outside the window is recorded in the
    /// metadata, with a warning flag when the window leaves fewer than ten
    /// decay constants of lead time around t0.
    pub fn sample(&self, grid: &TimeGrid) -> Result<SampledMode> {
        let sqrt_dt = grid.dt.sqrt();
        let mut values: Vec<f64> =
            (0..grid.n_samples).map(|k| self.value(grid.time(k)) * sqrt_dt).collect();
        let raw: f64 = values.iter().map(|v| v * v).sum();
        if !(raw > 0.0) {
            return Err(Error::InvalidParameter(
                "mode support does not intersect the grid window".into(),
            ));
        }
        let t_lo = grid.time(0);
        let t_hi = grid.time(grid.n_samples - 1);
        let truncated_mass = self.mass_left_of(t_lo) + (1.0 - self.mass_left_of(t_hi)).max(0.0);
        let required = TRUNCATION_LEAD / self.min_rate();
        let mut truncation_warning = self.t0 - t_lo < required;
        if self.kind == ModeKind::DoubleExponential {
            truncation_warning |= t_hi - self.t0 < required;
        }
        let scale = 1.0 / raw.sqrt();
        for v in &mut values {
            *v *= scale;
        }
        Ok(SampledMode { grid: *grid, values, truncated_mass, truncation_warning })
    }

    /// Cumulative squared mass `∫_{−∞}^{x} f(t)² dt` in closed form.
    fn mass_left_of(&self, x: f64) -> f64 {
        let s = self.sides();
        if x <= self.t0 {
            let d = self.t0 - x;
            pair_sum(&s.left, |ri, rj| (-(ri + rj) * d).exp() / (ri + rj))
        } else {
            let d = x - self.t0;
            let left_total = pair_sum(&s.left, |ri, rj| 1.0 / (ri + rj));
            let right_tail = pair_sum(&s.right, |ri, rj| (-(ri + rj) * d).exp() / (ri + rj));
            let right_total = pair_sum(&s.right, |ri, rj| 1.0 / (ri + rj));
            left_total + (right_total - right_tail)
        }
    }

    // Piecewise form: value = Σ amp·e^{−r·|t−t0|} on each side, all r > 0.
    fn sides(&self) -> Sides {
        match self.kind {
            ModeKind::Rising | ModeKind::MultiRising => Sides {
                left: self
                    .terms
                    .iter()
                    .map(|c| (self.norm_constant * c.coeff, c.rate / 2.0))
                    .collect(),
                right: Vec::new(),
            },
            ModeKind::DoubleExponential => {
                let amp = self.norm_constant;
                let r = self.terms[0].rate / 2.0;
                Sides { left: vec![(amp, r)], right: vec![(amp, r)] }
            }
        }
    }
}

struct Sides {
    left: Vec<(f64, f64)>,
    right: Vec<(f64, f64)>,
}

fn pair_sum(terms: &[(f64, f64)], weight: impl Fn(f64, f64) -> f64) -> f64 {
    let mut total = 0.0;
    for &(ai, ri) in terms {
        for &(aj, rj) in terms {
            total += ai * aj * weight(ri, rj);
        }
    }
    total
}

/// `∫_0^Δ e^{−r1·u} e^{−r2·(Δ−u)} du`, stable for any r1, r2 ≥ 0.
fn cross_segment(delta: f64, r1: f64, r2: f64) -> f64 {
    let x = (r2 - r1) * delta;
    if x.abs() < 1e-5 {
        // (1 − e^{−x})/x ≈ 1 − x/2 + x²/6 − x³/24
        let series = 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0;
        delta * (-r1 * delta).exp() * series
    } else {
        ((-r1 * delta).exp() - (-r2 * delta).exp()) / (r2 - r1)
    }
}

fn check_rate(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("rate must be positive, got {gamma}")));
    }
    Ok(())
}

/// `c_n = 1 / Π_{m≠n}(γ_m − γ_n)`; the single-rate case gives the empty product 1.
pub fn cyclic_coefficients(gammas: &[f64]) -> Result<Vec<f64>> {
    for i in 0..gammas.len() {
        for j in (i + 1)..gammas.len() {
            let sep = (gammas[i] - gammas[j]).abs();
            if sep < DEGENERACY_TOL * gammas[i].max(gammas[j]) {
                return Err(Error::DegeneratePoles(format!(
                    "rates {} and {} are closer than relative {DEGENERACY_TOL}",
                    gammas[i], gammas[j]
                )));
            }
        }
    }
    Ok((0..gammas.len())
        .map(|n| {
            let prod: f64 = (0..gammas.len())
                .filter(|&m| m != n)
                .map(|m| gammas[m] - gammas[n])
                .product();
            1.0 / prod
        })
        .collect())
}

/// Mode sampled on a grid with unit discrete norm `Σ f̃_k² = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledMode {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    /// Squared mass of the analytic mode outside the window, pre-renormalization.
    pub truncated_mass: f64,
    /// Set when the window leaves fewer than ten decay constants around t0.
    pub truncation_warning: bool,
}

impl SampledMode {
    /// Build directly from per-bin values, renormalizing to unit discrete norm.
    pub fn from_values(grid: TimeGrid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_samples {
            return Err(Error::GridMismatch(format!(
                "{} values on a grid of {} samples",
                values.len(),
                grid.n_samples
            )));
        }
        let raw: f64 = values.iter().map(|v| v * v).sum();
        if !(raw > 0.0) || !raw.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize all-zero samples".into()));
        }
        let scale = 1.0 / raw.sqrt();
        for v in &mut values {
            *v *= scale;
        }
        Ok(SampledMode { grid, values, truncated_mass: 0.0, truncation_warning: false })
    }

    /// Discrete inner product `Σ f̃_k g̃_k`; both modes must share the grid.
    pub fn inner_product(&self, other: &SampledMode) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("sampled modes live on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    /// Squared overlap of two sampled modes.
    pub fn mode_match(&self, other: &SampledMode) -> Result<f64> {
        let ip = self.inner_product(other)?;
        Ok(ip * ip)
    }
}
