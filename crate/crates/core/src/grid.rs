//! Common time grid for traces and sampled modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling grid shared by all traces of an ensemble.
///
/// The herald index marks the sample at which the heralding signal arrives;
/// times are measured from the start of the recorded window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    /// Seconds per sample.
    pub dt: f64,
    /// Number of samples in the window.
    pub n_samples: usize,
    /// Sample index of the herald time t0.
    pub herald_index: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_samples: usize, herald_index: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid dt must be positive and finite, got {dt}"
            )));
        }
        if n_samples == 0 {
            return Err(Error::InvalidParameter("grid needs at least one sample".into()));
        }
        if herald_index >= n_samples {
            return Err(Error::InvalidParameter(format!(
                "herald index {herald_index} outside grid of {n_samples} samples"
            )));
        }
        Ok(TimeGrid { dt, n_samples, herald_index })
    }

    /// 500 ns window sampled at 2.5 GHz (1250 samples of 0.4 ns), herald at the center.
    pub fn default_window() -> Self {
        TimeGrid { dt: 0.4e-9, n_samples: 1250, herald_index: 625 }
    }

    /// Total window duration in seconds.
    pub fn duration(&self) -> f64 {
        self.n_samples as f64 * self.dt
    }

    /// Absolute time of sample `k`; the window starts at t = 0.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Absolute herald time t0 = herald_index · dt.
    pub fn herald_time(&self) -> f64 {
        self.herald_index as f64 * self.dt
    }

    /// Time of sample `k` relative to the herald time t0.
    pub fn time_from_herald(&self, k: usize) -> f64 {
        (k as f64 - self.herald_index as f64) * self.dt
    }

    /// Window length available before the herald, in seconds.
    pub fn lead_time(&self) -> f64 {
        self.herald_index as f64 * self.dt
    }
}
