//! Command-line front end: simulate ensembles, analyze them, run tomography,
//! or reproduce the full verification chain from one config file.
//!
//! Exit codes: 0 success, 1 validation/config error, 2 runtime or data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rtquad_core::analysis::Channel;
use rtquad_core::config::RunConfig;
use rtquad_core::pipeline::{
    run_analyze, run_reproduce, run_simulate, run_stream, run_tomo, AnalyzeKind, AnalyzeReport,
};
use rtquad_core::simulator::{FilterKind, FilterSpec};

const OUT_DIR_ENV: &str = "RTQUAD_OUT";

#[derive(Parser)]
#[command(name = "rtquad", version, about = "Heralded single-photon wavepacket quadrature toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Built-in defaults of the reference experiment.
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    Matched,
    FirstOrder,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Realtime,
    Postprocessed,
}

impl From<ChannelArg> for Channel {
    fn from(c: ChannelArg) -> Channel {
        match c {
            ChannelArg::Realtime => Channel::Realtime,
            ChannelArg::Postprocessed => Channel::Postprocessed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyzeArg {
    Pca,
    Quads,
    Profile,
    Corr,
}

impl From<AnalyzeArg> for AnalyzeKind {
    fn from(a: AnalyzeArg) -> AnalyzeKind {
        match a {
            AnalyzeArg::Pca => AnalyzeKind::Pca,
            AnalyzeArg::Quads => AnalyzeKind::Quads,
            AnalyzeArg::Profile => AnalyzeKind::Profile,
            AnalyzeArg::Corr => AnalyzeKind::Corr,
        }
    }
}

/// Config selection and overrides shared by all data-producing commands.
#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration preset.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Override the RNG seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Real-time filter family override.
    #[arg(long, value_enum)]
    filter: Option<FilterArg>,
    /// Stage rates (1/s) for `--filter custom`, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "RATE")]
    filter_rates: Option<Vec<f64>>,
    /// Fractional per-stage rate perturbation, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "EPS", allow_hyphen_values = true)]
    filter_perturbation: Option<Vec<f64>>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, rtquad_core::Error> {
        let mut config = match (&self.config, self.preset) {
            (Some(path), None) => RunConfig::load(path)?,
            (None, _) => RunConfig::paper_preset(),
            (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(kind) = self.filter {
            config.filter = FilterSpec {
                kind: match kind {
                    FilterArg::Matched => FilterKind::Matched,
                    FilterArg::FirstOrder => FilterKind::FirstOrder,
                    FilterArg::Custom => FilterKind::Custom,
                },
                rates_per_s: None,
                perturbation: config.filter.perturbation.clone(),
            };
        }
        if let Some(rates) = &self.filter_rates {
            config.filter.rates_per_s = Some(rates.clone());
        }
        if let Some(eps) = &self.filter_perturbation {
            config.filter.perturbation = Some(eps.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

/// Output directory: flag, then RTQUAD_OUT, then config, then ./rtquad-out.
fn resolve_out_dir(flag: &Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("rtquad-out"))
}

#[derive(Subcommand)]
enum Command {
    /// Generate a heralded-trace ensemble and write it as a QHT1 file.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output ensemble file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Skip the hidden-truth JSON sidecar.
        #[arg(long)]
        no_truth: bool,
    },
    /// Analyze an ensemble file: PCA mode, quadratures, profile, correlation.
    Analyze {
        #[arg(value_enum)]
        kind: AnalyzeArg,
        /// Input QHT1 ensemble.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for tables and reports.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Maximum-likelihood tomography of a quadrature CSV.
    Tomo {
        /// Input quadrature CSV (event_id,realtime,postprocessed).
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Fock-basis cutoff override.
        #[arg(long)]
        cutoff: Option<usize>,
        /// Bootstrap replicate count override.
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Which channel of the file to reconstruct.
        #[arg(long, value_enum, default_value = "realtime")]
        channel: ChannelArg,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Full pipeline: simulate, filter, PCA, histograms, correlation,
    /// tomography with bootstrap errors, consolidated summary.
    Reproduce {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Continuous-stream demo: Poisson heralds, causal filtering, latching.
    Stream {
        #[command(flatten)]
        config: ConfigArgs,
        /// Stream duration in seconds.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Print the built-in paper preset as TOML.
    Preset,
}

fn run(cli: Cli) -> Result<(), rtquad_core::Error> {
    match cli.command {
        Command::Simulate { config, out, no_truth } => {
            let config = config.load()?;
            let outputs = run_simulate(&config, &out, !no_truth)?;
            println!(
                "wrote {} events ({} samples each) with data fingerprint {:016x}",
                config.simulation.n_events,
                config.simulation.grid.n_samples,
                config.data_fingerprint()
            );
            for p in outputs {
                println!("  {}", p.display());
            }
            Ok(())
        }
        Command::Analyze { kind, input, config, out } => {
            let config = config.load()?;
            let out_dir = resolve_out_dir(&out, &config);
            let report = run_analyze(&input, &config, kind.into(), &out_dir)?;
            println!("{}", report.to_json());
            match &report {
                AnalyzeReport::Pca(r) => {
                    println!("mode match vs theory: {:.5}", r.mode_match_vs_theory)
                }
                AnalyzeReport::Quads(r) => println!(
                    "variance realtime {:.4}, postprocessed {:.4}, correlation {:.5}",
                    r.variance_realtime, r.variance_postprocessed, r.correlation
                ),
                AnalyzeReport::Profile(r) => println!(
                    "variance peaks at sample {} (herald {})",
                    r.peak_index, r.herald_index
                ),
                AnalyzeReport::Corr(r) => println!(
                    "correlation matched {:.5}, perturbed {:.5}",
                    r.correlation_matched, r.correlation_perturbed
                ),
            }
            Ok(())
        }
        Command::Tomo { input, config, cutoff, bootstrap, channel, out } => {
            let mut config = config.load()?;
            if let Some(c) = cutoff {
                config.tomography.cutoff = c;
            }
            if let Some(b) = bootstrap {
                config.tomography.bootstrap_replicates = b;
            }
            config.validate()?;
            let out_dir = resolve_out_dir(&out, &config);
            let report = run_tomo(&input, &config, channel.into(), &out_dir)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            println!(
                "single-photon fraction {:.4} ± {:.4}, W(0,0) = {:.4} ± {:.4}",
                report.single_photon_fraction,
                report.single_photon_fraction_err,
                report.wigner_origin,
                report.wigner_origin_err
            );
            Ok(())
        }
        Command::Reproduce { config, out } => {
            let config = config.load()?;
            let out_dir = resolve_out_dir(&out, &config);
            let summary = run_reproduce(&config, &out_dir)?;
            println!("reports in {}", out_dir.display());
            println!("PCA mode match vs theory: {:.5}", summary.mode_match_pca_vs_theory);
            println!(
                "correlation matched {:.6}, perturbed {:.6}",
                summary.correlation_matched, summary.correlation_perturbed
            );
            for ch in &summary.channels {
                println!(
                    "{:?}: rho11 {:.4} ± {:.4}, W(0,0) {:.4} ± {:.4}",
                    ch.channel,
                    ch.single_photon_fraction,
                    ch.single_photon_fraction_err,
                    ch.wigner_origin,
                    ch.wigner_origin_err
                );
            }
            Ok(())
        }
        Command::Stream { config, duration, out } => {
            let config = config.load()?;
            let out_dir = resolve_out_dir(&out, &config);
            let report = run_stream(&config, duration, &out_dir)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Preset => {
            print!("{}", RunConfig::paper_preset().to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
