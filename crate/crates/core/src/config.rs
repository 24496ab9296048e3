//! Structured run configuration: one TOML file drives simulation, filtering,
//! analysis, and tomography. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::HistogramSpec;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::simulator::{FilterSpec, ModeSpec, SimConfig};
use crate::tomography::FockBasis;
use crate::util::config_fingerprint;

/// `[simulation]` section: everything SimConfig needs except the seed and
/// filter, which have their own places in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub mode: ModeSpec,
    pub grid: TimeGrid,
    pub efficiency: f64,
    #[serde(default)]
    pub source_diagonal: Option<Vec<f64>>,
    pub n_events: usize,
    pub herald_rate: f64,
}

/// `[analysis]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub histogram: HistogramSpec,
    pub pca_tolerance: f64,
    pub pca_max_iters: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            histogram: HistogramSpec::default(),
            pca_tolerance: 1e-10,
            pca_max_iters: 10_000,
        }
    }
}

/// `[tomography]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySection {
    pub cutoff: usize,
    pub max_iters: usize,
    pub tolerance: f64,
    pub bootstrap_replicates: usize,
}

impl Default for TomographySection {
    fn default() -> Self {
        TomographySection { cutoff: 8, max_iters: 2000, tolerance: 1e-10, bootstrap_replicates: 100 }
    }
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub simulation: SimSection,
    pub filter: FilterSpec,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub tomography: TomographySection,
}

impl RunConfig {
    /// The preset reproducing the reference experiment end to end.
    pub fn paper_preset() -> Self {
        let sim = SimConfig::paper_default();
        RunConfig {
            seed: sim.seed,
            out_dir: None,
            simulation: SimSection {
                mode: sim.mode,
                grid: sim.grid,
                efficiency: sim.efficiency,
                source_diagonal: sim.source_diagonal,
                n_events: sim.n_events,
                herald_rate: sim.herald_rate,
            },
            filter: sim.filter,
            analysis: AnalysisSection::default(),
            tomography: TomographySection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Assemble the simulator configuration (seed and filter folded in).
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            mode: self.simulation.mode.clone(),
            grid: self.simulation.grid,
            efficiency: self.simulation.efficiency,
            source_diagonal: self.simulation.source_diagonal.clone(),
            n_events: self.simulation.n_events,
            herald_rate: self.simulation.herald_rate,
            seed: self.seed,
            filter: self.filter.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_config().validate()?;
        self.analysis.histogram.validate()?;
        if !(self.analysis.pca_tolerance > 0.0) {
            return Err(Error::Config("analysis.pca_tolerance must be positive".into()));
        }
        if self.analysis.pca_max_iters == 0 {
            return Err(Error::Config("analysis.pca_max_iters must be positive".into()));
        }
        FockBasis::new(self.tomography.cutoff)
            .map_err(|_| Error::Config("tomography.cutoff must be at least 1".into()))?;
        if self.tomography.max_iters == 0 {
            return Err(Error::Config("tomography.max_iters must be positive".into()));
        }
        if !(self.tomography.tolerance > 0.0) {
            return Err(Error::Config("tomography.tolerance must be positive".into()));
        }
        if self.tomography.bootstrap_replicates < 2 {
            return Err(Error::Config("tomography.bootstrap_replicates must be at least 2".into()));
        }
        Ok(())
    }

    /// Fingerprint of the full run configuration (reported numbers carry it).
    pub fn fingerprint(&self) -> u64 {
        config_fingerprint(self)
    }

    /// Fingerprint of the data-generating part only (travels with QHT files).
    pub fn data_fingerprint(&self) -> u64 {
        self.sim_config().fingerprint()
    }
}
