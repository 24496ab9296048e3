//! Desk-scale simulation and verification of real-time quadrature measurement
//! of heralded single-photon wavepackets.
//!
//! The crate generates synthetic continuous-wave homodyne traces containing
//! heralded single photons in exponentially rising temporal modes, extracts
//! quadratures both by post-hoc weighted integration and by strictly causal
//! low-pass filtration matched to the mode, and verifies the two channels
//! against each other: principal-component mode estimation, variance
//! profiles, correlation, maximum-likelihood tomography of the Fock-diagonal
//! density matrix, and Wigner-function negativity with bootstrap errors.

pub mod analysis;
pub mod config;
pub mod error;
pub mod filter;
pub mod grid;
pub mod mode;
pub mod pipeline;
pub mod qht;
pub mod report;
pub mod simulator;
pub mod tomography;
pub mod util;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use filter::{DiscretizedFilter, FilterState, PoleCascade};
pub use grid::TimeGrid;
pub use mode::{ModeKind, SampledMode, TemporalMode};
pub use simulator::{HeraldedTrace, SimConfig, StreamSimulator, TraceEnsemble};
pub use tomography::{DensityDiagonal, FockBasis, MleResult};
