//! End-to-end command implementations: simulate to file, analyze an ensemble
//! file, tomography on quadrature files, and the full reproduction pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    histogram, joint_histogram, pca_mode_estimate, pearson_correlation,
    postprocessed_quadratures, realtime_quadratures, time_resolved_histogram, variance_profile,
    Channel, QuadratureSet,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::filter::DiscretizedFilter;
use crate::mode::{SampledMode, TemporalMode};
use crate::qht;
use crate::report::{
    self, hex_fingerprint, ChannelReport, Summary,
};
use crate::simulator::{
    latch_stream_quadratures, simulate_ensemble, FilterSpec, StreamSimulator, TraceEnsemble,
};
use crate::tomography::{bootstrap, mle_diagonal, wigner_origin, FockBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeKind {
    Pca,
    Quads,
    Profile,
    Corr,
}

impl AnalyzeKind {
    pub fn name(&self) -> &'static str {
        match self {
            AnalyzeKind::Pca => "pca",
            AnalyzeKind::Quads => "quads",
            AnalyzeKind::Profile => "profile",
            AnalyzeKind::Corr => "corr",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaReport {
    pub config_fingerprint: String,
    pub data_fingerprint: String,
    pub n_events: usize,
    pub mode_match_vs_theory: f64,
    pub iterations: usize,
    pub converged: bool,
    pub underdetermined: bool,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadsReport {
    pub config_fingerprint: String,
    pub data_fingerprint: String,
    pub n_events: usize,
    pub variance_realtime: f64,
    pub variance_postprocessed: f64,
    pub correlation: f64,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileReport {
    pub config_fingerprint: String,
    pub data_fingerprint: String,
    pub n_events: usize,
    pub herald_index: usize,
    pub peak_index: usize,
    pub variance_at_herald: f64,
    pub tail_variance: f64,
    pub warmup_samples: usize,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrReport {
    pub config_fingerprint: String,
    pub data_fingerprint: String,
    pub n_events: usize,
    pub correlation_matched: f64,
    pub correlation_perturbed: f64,
    pub filter_perturbation: Vec<f64>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum AnalyzeReport {
    Pca(PcaReport),
    Quads(QuadsReport),
    Profile(ProfileReport),
    Corr(CorrReport),
}

impl AnalyzeReport {
    pub fn to_json(&self) -> String {
        let json = match self {
            AnalyzeReport::Pca(r) => serde_json::to_string_pretty(r),
            AnalyzeReport::Quads(r) => serde_json::to_string_pretty(r),
            AnalyzeReport::Profile(r) => serde_json::to_string_pretty(r),
            AnalyzeReport::Corr(r) => serde_json::to_string_pretty(r),
        };
        json.expect("report serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamReport {
    pub config_fingerprint: String,
    pub duration_s: f64,
    pub total_samples: u64,
    pub n_heralds: usize,
    pub latched_variance: f64,
    pub overlap_warning: bool,
    pub outputs: Vec<PathBuf>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Simulate the configured ensemble and write it as a QHT1 file, with the
/// hidden per-event truth in a JSON sidecar unless suppressed.
pub fn run_simulate(config: &RunConfig, out_file: &Path, write_truth: bool) -> Result<Vec<PathBuf>> {
    config.validate()?;
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    let ensemble = simulate_ensemble(&config.sim_config())?;
    qht::write_ensemble(out_file, &ensemble)?;
    let mut outputs = vec![out_file.to_path_buf()];
    if write_truth {
        qht::write_truth_sidecar(out_file, &ensemble)?;
        outputs.push(qht::truth_sidecar_path(out_file));
    }
    Ok(outputs)
}

struct Prepared {
    ensemble: TraceEnsemble,
    mode: TemporalMode,
    sampled: SampledMode,
    filter: DiscretizedFilter,
}

fn prepare(ensemble_path: &Path, config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let ensemble = qht::read_ensemble(ensemble_path)?;
    let sim = config.sim_config();
    if *ensemble.grid() != sim.grid {
        return Err(Error::GridMismatch(format!(
            "ensemble grid {:?} does not match the configured grid {:?}",
            ensemble.grid(),
            sim.grid
        )));
    }
    let mode = sim.build_mode()?;
    let sampled = mode.sample(ensemble.grid())?;
    let filter = sim.build_filter(&mode)?.discretize(ensemble.grid().dt)?;
    Ok(Prepared { ensemble, mode, sampled, filter })
}

/// Per-stage fractional offsets used for the tolerance-modeling correlation
/// when the config does not specify its own: ±5 % alternating.
pub fn default_perturbation(n_stages: usize) -> Vec<f64> {
    (0..n_stages).map(|k| if k % 2 == 0 { 0.05 } else { -0.05 }).collect()
}

fn correlation_pair(
    ensemble: &TraceEnsemble,
    mode: &TemporalMode,
    sampled: &SampledMode,
    config: &RunConfig,
) -> Result<(f64, f64, Vec<f64>, QuadratureSet)> {
    let exact_spec = FilterSpec { perturbation: None, ..config.filter.clone() };
    let exact = exact_spec.build(mode)?;
    let perturbation = config
        .filter
        .perturbation
        .clone()
        .unwrap_or_else(|| default_perturbation(exact.stage_rates().len()));
    let perturbed = exact.with_perturbed_rates(&perturbation)?;

    let pp = postprocessed_quadratures(ensemble, sampled)?;
    let rt_exact = realtime_quadratures(ensemble, &exact.discretize(ensemble.grid().dt)?)?;
    let rt_pert = realtime_quadratures(ensemble, &perturbed.discretize(ensemble.grid().dt)?)?;
    let r_matched = pearson_correlation(&rt_exact, &pp)?;
    let r_perturbed = pearson_correlation(&rt_pert, &pp)?;
    Ok((r_matched, r_perturbed, perturbation, pp))
}

/// Analyze an ensemble file: PCA mode, quadratures, variance profile, or
/// channel correlation, writing the corresponding tables into `out_dir`.
pub fn run_analyze(
    ensemble_path: &Path,
    config: &RunConfig,
    kind: AnalyzeKind,
    out_dir: &Path,
) -> Result<AnalyzeReport> {
    ensure_dir(out_dir)?;
    let p = prepare(ensemble_path, config)?;
    let config_fp = hex_fingerprint(config.fingerprint());
    let data_fp = hex_fingerprint(p.ensemble.fingerprint());
    let n_events = p.ensemble.n_events();

    match kind {
        AnalyzeKind::Pca => {
            let est = pca_mode_estimate(
                &p.ensemble,
                Some(&p.sampled),
                config.analysis.pca_tolerance,
                config.analysis.pca_max_iters,
            )?;
            let path = out_dir.join("mode_estimate.csv");
            report::write_csv_mode_estimate(&path, &est.mode, &p.sampled)?;
            let rep = PcaReport {
                config_fingerprint: config_fp,
                data_fingerprint: data_fp,
                n_events,
                mode_match_vs_theory: est.mode.mode_match(&p.sampled)?,
                iterations: est.iterations,
                converged: est.converged,
                underdetermined: est.underdetermined,
                outputs: vec![path],
            };
            let json = out_dir.join("analyze_pca.json");
            std::fs::write(&json, serde_json::to_string_pretty(&rep).unwrap())?;
            Ok(AnalyzeReport::Pca(rep))
        }
        AnalyzeKind::Quads => {
            let rt = realtime_quadratures(&p.ensemble, &p.filter)?;
            let pp = postprocessed_quadratures(&p.ensemble, &p.sampled)?;
            let spec = config.analysis.histogram;
            let quads_path = out_dir.join("quadratures.csv");
            report::write_csv_quadratures(&quads_path, &rt, &pp)?;
            let hist_rt = out_dir.join("histogram_realtime.csv");
            report::write_csv_histogram(&hist_rt, &histogram(&rt.values, &spec)?)?;
            let hist_pp = out_dir.join("histogram_postprocessed.csv");
            report::write_csv_histogram(&hist_pp, &histogram(&pp.values, &spec)?)?;
            let joint = out_dir.join("joint_histogram.csv");
            report::write_csv_joint_histogram(
                &joint,
                &joint_histogram(&rt.values, &pp.values, &spec)?,
            )?;
            let rep = QuadsReport {
                config_fingerprint: config_fp,
                data_fingerprint: data_fp,
                n_events,
                variance_realtime: rt.variance(),
                variance_postprocessed: pp.variance(),
                correlation: pearson_correlation(&rt, &pp)?,
                outputs: vec![quads_path, hist_rt, hist_pp, joint],
            };
            let json = out_dir.join("analyze_quads.json");
            std::fs::write(&json, serde_json::to_string_pretty(&rep).unwrap())?;
            Ok(AnalyzeReport::Quads(rep))
        }
        AnalyzeKind::Profile => {
            let profile = variance_profile(&p.ensemble, &p.filter)?;
            let trh = time_resolved_histogram(&p.ensemble, &p.filter, &config.analysis.histogram)?;
            let profile_path = out_dir.join("variance_profile.csv");
            report::write_csv_variance_profile(&profile_path, p.ensemble.grid(), &profile)?;
            let trh_path = out_dir.join("time_resolved_histogram.csv");
            report::write_csv_time_resolved(&trh_path, p.ensemble.grid(), &trh)?;
            let herald = p.ensemble.grid().herald_index;
            let (peak_index, _) = profile
                .values
                .iter()
                .enumerate()
                .skip(profile.warmup_samples)
                .fold((0, f64::MIN), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
            let rep = ProfileReport {
                config_fingerprint: config_fp,
                data_fingerprint: data_fp,
                n_events,
                herald_index: herald,
                peak_index,
                variance_at_herald: profile.values[herald],
                tail_variance: *profile.values.last().unwrap(),
                warmup_samples: profile.warmup_samples,
                outputs: vec![profile_path, trh_path],
            };
            let json = out_dir.join("analyze_profile.json");
            std::fs::write(&json, serde_json::to_string_pretty(&rep).unwrap())?;
            Ok(AnalyzeReport::Profile(rep))
        }
        AnalyzeKind::Corr => {
            let (r_matched, r_perturbed, perturbation, _) =
                correlation_pair(&p.ensemble, &p.mode, &p.sampled, config)?;
            let rep = CorrReport {
                config_fingerprint: config_fp,
                data_fingerprint: data_fp,
                n_events,
                correlation_matched: r_matched,
                correlation_perturbed: r_perturbed,
                filter_perturbation: perturbation,
                outputs: vec![],
            };
            let json = out_dir.join("analyze_corr.json");
            std::fs::write(&json, serde_json::to_string_pretty(&rep).unwrap())?;
            Ok(AnalyzeReport::Corr(rep))
        }
    }
}

/// Maximum-likelihood tomography with bootstrap errors for one quadrature set.
pub fn channel_tomography(
    quadratures: &QuadratureSet,
    config: &RunConfig,
    bootstrap_seed: u64,
) -> Result<ChannelReport> {
    let basis = FockBasis::new(config.tomography.cutoff)?;
    let max_iters = config.tomography.max_iters;
    let tol = config.tomography.tolerance;
    let mle = mle_diagonal(&quadratures.values, &basis, max_iters, tol)?;

    let estimator = |xs: &[f64]| -> Vec<f64> {
        match mle_diagonal(xs, &basis, max_iters, tol) {
            Ok(result) => {
                let mut v = result.rho.weights().to_vec();
                v.push(wigner_origin(&result.rho));
                v
            }
            Err(_) => vec![f64::NAN; basis.n_states() + 1],
        }
    };
    let boot = bootstrap(
        &quadratures.values,
        estimator,
        config.tomography.bootstrap_replicates,
        bootstrap_seed,
    )?;
    let n_states = basis.n_states();
    Ok(ChannelReport {
        channel: quadratures.channel,
        n_events: quadratures.len(),
        variance: quadratures.variance(),
        rho: mle.rho.weights().to_vec(),
        rho_err: boot.std[..n_states].to_vec(),
        single_photon_fraction: mle.rho.weight(1),
        single_photon_fraction_err: boot.std[1],
        wigner_origin: wigner_origin(&mle.rho),
        wigner_origin_err: boot.std[n_states],
        mle_iterations: mle.iterations,
        mle_converged: mle.converged,
        mle_final_delta: mle.final_delta,
        bootstrap_replicates: boot.replicates,
    })
}

/// Tomography command: reconstruct one channel of a quadrature CSV.
pub fn run_tomo(
    quadratures_path: &Path,
    config: &RunConfig,
    channel: Channel,
    out_dir: &Path,
) -> Result<ChannelReport> {
    config.validate()?;
    ensure_dir(out_dir)?;
    let (rt, pp) = report::read_csv_quadratures(quadratures_path)?;
    let quads = match channel {
        Channel::Realtime => rt,
        Channel::Postprocessed => pp,
    };
    let rep = channel_tomography(&quads, config, config.seed ^ 0xB007)?;
    let tag = match channel {
        Channel::Realtime => "realtime",
        Channel::Postprocessed => "postprocessed",
    };
    let rho = crate::tomography::DensityDiagonal::new(rep.rho.clone())?;
    report::write_csv_density(&out_dir.join(format!("density_{tag}.csv")), &rho, &rep.rho_err)?;
    report::write_csv_wigner_section(&out_dir.join(format!("wigner_{tag}.csv")), &rho)?;
    std::fs::write(
        out_dir.join(format!("tomography_{tag}.json")),
        serde_json::to_string_pretty(&rep).unwrap(),
    )?;
    Ok(rep)
}

/// Full pipeline: simulate, filter, extract both quadrature channels, PCA,
/// variance profile, histograms, correlations, tomography with bootstrap
/// errors, and a consolidated summary.
pub fn run_reproduce(config: &RunConfig, out_dir: &Path) -> Result<Summary> {
    config.validate()?;
    ensure_dir(out_dir)?;
    let sim = config.sim_config();
    let ensemble = simulate_ensemble(&sim)?;
    let mode = sim.build_mode()?;
    let sampled = mode.sample(&sim.grid)?;
    let filter = sim.build_filter(&mode)?.discretize(sim.grid.dt)?;

    // temporal-mode estimate
    let est = pca_mode_estimate(
        &ensemble,
        Some(&sampled),
        config.analysis.pca_tolerance,
        config.analysis.pca_max_iters,
    )?;
    report::write_csv_mode_estimate(&out_dir.join("mode_estimate.csv"), &est.mode, &sampled)?;

    // quadrature channels and their distributions
    let rt = realtime_quadratures(&ensemble, &filter)?;
    let (r_matched, r_perturbed, perturbation, pp) =
        correlation_pair(&ensemble, &mode, &sampled, config)?;
    let spec = config.analysis.histogram;
    report::write_csv_quadratures(&out_dir.join("quadratures.csv"), &rt, &pp)?;
    report::write_csv_histogram(
        &out_dir.join("histogram_realtime.csv"),
        &histogram(&rt.values, &spec)?,
    )?;
    report::write_csv_histogram(
        &out_dir.join("histogram_postprocessed.csv"),
        &histogram(&pp.values, &spec)?,
    )?;
    report::write_csv_joint_histogram(
        &out_dir.join("joint_histogram.csv"),
        &joint_histogram(&rt.values, &pp.values, &spec)?,
    )?;

    // time-resolved statistics
    let profile = variance_profile(&ensemble, &filter)?;
    report::write_csv_variance_profile(&out_dir.join("variance_profile.csv"), &sim.grid, &profile)?;
    let trh = time_resolved_histogram(&ensemble, &filter, &spec)?;
    report::write_csv_time_resolved(&out_dir.join("time_resolved_histogram.csv"), &sim.grid, &trh)?;
    let (peak_index, _) = profile
        .values
        .iter()
        .enumerate()
        .skip(profile.warmup_samples)
        .fold((0, f64::MIN), |best, (k, &v)| if v > best.1 { (k, v) } else { best });

    // tomography on both channels
    let mut channels = Vec::new();
    for quads in [&rt, &pp] {
        let tag = match quads.channel {
            Channel::Realtime => "realtime",
            Channel::Postprocessed => "postprocessed",
        };
        let rep = channel_tomography(quads, config, config.seed ^ 0xB007 ^ quads.channel as u64)?;
        let rho = crate::tomography::DensityDiagonal::new(rep.rho.clone())?;
        report::write_csv_density(&out_dir.join(format!("density_{tag}.csv")), &rho, &rep.rho_err)?;
        report::write_csv_wigner_section(&out_dir.join(format!("wigner_{tag}.csv")), &rho)?;
        channels.push(rep);
    }

    let summary = Summary {
        config_fingerprint: hex_fingerprint(config.fingerprint()),
        data_fingerprint: hex_fingerprint(ensemble.fingerprint()),
        seed: config.seed,
        n_events: ensemble.n_events(),
        mode_match_pca_vs_theory: est.mode.mode_match(&sampled)?,
        pca_iterations: est.iterations,
        pca_converged: est.converged,
        mode_truncated_mass: sampled.truncated_mass,
        variance_realtime: rt.variance(),
        variance_postprocessed: pp.variance(),
        correlation_matched: r_matched,
        correlation_perturbed: r_perturbed,
        filter_perturbation: perturbation,
        variance_profile_peak_index: peak_index,
        herald_index: sim.grid.herald_index,
        tomography_cutoff: config.tomography.cutoff,
        channels,
    };
    report::write_summary(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Stream demo: generate a continuous record with Poisson heralds, filter it
/// causally, latch at the heralds, and report the latched statistics.
pub fn run_stream(config: &RunConfig, duration_s: f64, out_dir: &Path) -> Result<StreamReport> {
    config.validate()?;
    ensure_dir(out_dir)?;
    let sim = config.sim_config();
    let mode = sim.build_mode()?;
    let filter = sim.build_filter(&mode)?.discretize(sim.grid.dt)?;
    let mut stream = StreamSimulator::new(&sim, duration_s)?;
    let heralds = stream.herald_indices().to_vec();
    let overlap_warning = stream.overlap_warning();
    let total = stream.total_samples();
    let latched = latch_stream_quadratures(&mut stream, &filter);
    if latched.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} heralds in {duration_s} s of stream",
            latched.len()
        )));
    }
    let mean = latched.iter().sum::<f64>() / latched.len() as f64;
    let var = latched.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
        / (latched.len() as f64 - 1.0);

    let path = out_dir.join("latched_quadratures.csv");
    {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "herald_sample,value")?;
        for (h, v) in heralds.iter().zip(&latched) {
            writeln!(w, "{h},{v}")?;
        }
    }
    let rep = StreamReport {
        config_fingerprint: hex_fingerprint(config.fingerprint()),
        duration_s,
        total_samples: total,
        n_heralds: latched.len(),
        latched_variance: var,
        overlap_warning,
        outputs: vec![path],
    };
    std::fs::write(
        out_dir.join("stream_report.json"),
        serde_json::to_string_pretty(&rep).unwrap(),
    )?;
    Ok(rep)
}
