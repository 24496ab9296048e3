//! Acceptance suite: every criterion of the verification chain runs as one
//! test printing a single PASS/FAIL line (visible with `-- --nocapture`).
//!
//! Criterion 3 (principal-component mode fidelity > 0.99 on the default
//! white-noise ensemble) is a known-red check: with N = 18,491 traces of
//! n = 1250 independent noise bins the sample leading eigenvector cannot
//! exceed a match of ≈ (1 − c/ℓ²)/(1 + c/ℓ) ≈ 0.932, c = n/N, ℓ = 2η. The
//! test asserts the stated target anyway and reports the measured value.

use std::sync::OnceLock;
use std::time::Instant;

use rtquad_core::analysis::{
    pca_mode_estimate, pearson_correlation, postprocessed_quadratures, realtime_quadratures,
    variance_profile, QuadratureSet,
};
use rtquad_core::filter::PoleCascade;
use rtquad_core::mode::{SampledMode, TemporalMode};
use rtquad_core::simulator::{
    latch_stream_quadratures, simulate_ensemble, SimConfig, StreamSimulator, TraceEnsemble,
};
use rtquad_core::tomography::{
    bootstrap, mle_diagonal, wigner_origin, wigner_radial, DensityDiagonal, FockBasis,
};
use rtquad_core::DiscretizedFilter;

const PI4: f64 = 4.0 * std::f64::consts::PI;

struct Fixture {
    config: SimConfig,
    ensemble: TraceEnsemble,
    sampled: SampledMode,
    filter: DiscretizedFilter,
    realtime: QuadratureSet,
    simulate_seconds: f64,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

/// Default ensemble shared by the criteria that analyze it.
fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let config = SimConfig::paper_default();
        let t = Instant::now();
        let ensemble = simulate_ensemble(&config).unwrap();
        let simulate_seconds = t.elapsed().as_secs_f64();
        let mode = config.build_mode().unwrap();
        let sampled = mode.sample(&config.grid).unwrap();
        let filter = config.build_filter(&mode).unwrap().discretize(config.grid.dt).unwrap();
        let realtime = realtime_quadratures(&ensemble, &filter).unwrap();
        Fixture { config, ensemble, sampled, filter, realtime, simulate_seconds }
    })
}

fn verdict(criterion: &str, failures: &[String], detail: &str) {
    if failures.is_empty() {
        println!("criterion {criterion} PASS: {detail}");
    } else {
        println!("criterion {criterion} FAIL: {detail} | {}", failures.join("; "));
    }
    assert!(failures.is_empty(), "criterion {criterion}: {}", failures.join("; "));
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Continuous m-pole response by iterated pairwise convolution, independent
/// of the cyclic-coefficient route: (coeff, rate) terms of Σ c·e^{−rτ}.
fn convolve_poles(stage_rates: &[f64]) -> Vec<(f64, f64)> {
    let mut terms = vec![(1.0f64, stage_rates[0])];
    for &b in &stage_rates[1..] {
        let mut next: Vec<(f64, f64)> = Vec::new();
        for &(c, a) in &terms {
            for (coeff, rate) in [(c / (b - a), a), (-c / (b - a), b)] {
                match next.iter_mut().find(|t| (t.1 - rate).abs() < 1e-9 * rate) {
                    Some(t) => t.0 += coeff,
                    None => next.push((coeff, rate)),
                }
            }
        }
        terms = next;
    }
    terms
}

#[test]
fn criterion_1_mode_and_filter_identities() {
    let start = Instant::now();
    let mut failures = Vec::new();

    // unit norms in closed form
    let paper = [PI4 * 11e6, PI4 * 19e6, PI4 * 36e6];
    let modes = vec![
        TemporalMode::rising(PI4 * 11e6, 0.0).unwrap(),
        TemporalMode::rising(3.3e5, -2e-7).unwrap(),
        TemporalMode::double_exponential(PI4 * 19e6, 1e-7).unwrap(),
        TemporalMode::multi_rising(&paper, 2.5e-7).unwrap(),
        TemporalMode::multi_rising(&[1.0, 2.0, 3.0], 0.0).unwrap(),
    ];
    for (i, mode) in modes.iter().enumerate() {
        let err = (mode.inner_product(mode) - 1.0).abs();
        if err >= 1e-9 {
            failures.push(format!("mode {i} norm error {err:.2e}"));
        }
    }

    // cascade impulse response vs iterated-convolution oracle
    for rates in [vec![1.0, 2.0, 3.0], paper.to_vec()] {
        let cascade = PoleCascade::from_rates(&rates).unwrap();
        let stage_rates: Vec<f64> = rates.iter().map(|g| g / 2.0).collect();
        let oracle = convolve_poles(&stage_rates);
        let oracle_at =
            |tau: f64| oracle.iter().map(|&(c, r)| c * (-r * tau).exp()).sum::<f64>();
        let tau_max = 20.0 / stage_rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let tau_ref = tau_max / 10.0;
        let scale = cascade.impulse_value(tau_ref) / oracle_at(tau_ref);
        let peak = (0..=2000)
            .map(|k| cascade.impulse_value(tau_max * k as f64 / 2000.0).abs())
            .fold(0.0f64, f64::max);
        let max_rel = (0..=2000)
            .map(|k| {
                let tau = tau_max * k as f64 / 2000.0;
                (cascade.impulse_value(tau) - scale * oracle_at(tau)).abs() / peak
            })
            .fold(0.0f64, f64::max);
        if max_rel >= 1e-9 {
            failures.push(format!("cascade {rates:?} vs convolution oracle: {max_rel:.2e}"));
        }
    }

    // shift-overlap law over a γ × Δ grid
    let mut max_err = 0.0f64;
    for gamma in [3.3e5, 1e7, PI4 * 11e6, 2e9] {
        for delta_scaled in [-2.5, -1.0, -0.1, 0.0, 0.2, 0.9, 3.0] {
            let delta = delta_scaled / gamma;
            let f = TemporalMode::rising(gamma, 0.0).unwrap();
            let g = TemporalMode::rising(gamma, delta).unwrap();
            max_err = max_err.max((f.mode_match(&g) - (-gamma * delta.abs()).exp()).abs());
        }
    }
    if max_err >= 1e-6 {
        failures.push(format!("shift-overlap law error {max_err:.2e}"));
    }

    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 1.0 {
        failures.push(format!("runtime {elapsed:.2} s ≥ 1 s"));
    }
    verdict(
        "1 (mode/filter identities)",
        &failures,
        &format!("norms, partial fractions, overlap law; {elapsed:.3} s"),
    );
}

#[test]
fn criterion_2_vacuum_calibration() {
    let start = Instant::now();
    let mut failures = Vec::new();

    let mut config = SimConfig::paper_default();
    config.efficiency = 0.0;
    config.n_events = 10_000;
    let ensemble = simulate_ensemble(&config).unwrap();
    let mode = config.build_mode().unwrap();
    let filter = config.build_filter(&mode).unwrap().discretize(config.grid.dt).unwrap();

    let profile = variance_profile(&ensemble, &filter).unwrap();
    let mut worst: (usize, f64) = (0, 0.0);
    for (k, &v) in profile.values.iter().enumerate().skip(profile.warmup_samples) {
        let dev = (v - 0.5).abs();
        if dev > worst.1 {
            worst = (k, dev);
        }
    }
    if worst.1 >= 0.015 {
        failures.push(format!(
            "filtered vacuum variance off by {:.4} at sample {} (band ±0.015)",
            worst.1, worst.0
        ));
    }

    let quads = realtime_quadratures(&ensemble, &filter).unwrap();
    let basis = FockBasis::new(8).unwrap();
    let mle = mle_diagonal(&quads.values, &basis, 2000, 1e-10).unwrap();
    if mle.rho.weight(0) <= 0.98 {
        failures.push(format!("vacuum rho00 = {:.4} ≤ 0.98", mle.rho.weight(0)));
    }

    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 30.0 {
        failures.push(format!("runtime {elapsed:.1} s ≥ 30 s"));
    }
    verdict(
        "2 (vacuum calibration)",
        &failures,
        &format!(
            "worst variance deviation {:.4} at sample {}, rho00 {:.4}; {elapsed:.1} s",
            worst.1,
            worst.0,
            mle.rho.weight(0)
        ),
    );
}

#[test]
fn criterion_3_pca_mode_reproduction() {
    let fix = fixture();
    let start = Instant::now();
    let est = pca_mode_estimate(&fix.ensemble, Some(&fix.sampled), 1e-10, 10_000).unwrap();
    let mode_match = est.mode.mode_match(&fix.sampled).unwrap();
    let elapsed = fix.simulate_seconds + start.elapsed().as_secs_f64();

    let mut failures = Vec::new();
    if elapsed >= 120.0 {
        failures.push(format!("runtime {elapsed:.1} s ≥ 120 s"));
    }
    if !(mode_match > 0.99) {
        failures.push(format!(
            "mode match {mode_match:.5} ≤ 0.99 (sampling-noise ceiling ≈ 0.932 for \
             18,491 white-noise traces of 1250 bins; see test doc comment)"
        ));
    }
    verdict(
        "3 (PCA mode fidelity)",
        &failures,
        &format!(
            "match {mode_match:.5}, {} iterations, converged {}; {elapsed:.1} s",
            est.iterations, est.converged
        ),
    );
}

#[test]
fn criterion_4_variance_profile() {
    let fix = fixture();
    let mut failures = Vec::new();

    // symmetry and maximum on the default (three-rate) ensemble
    let profile = variance_profile(&fix.ensemble, &fix.filter).unwrap();
    let herald = fix.config.grid.herald_index;
    let n = fix.config.grid.n_samples;
    let n_events = fix.ensemble.n_events() as f64;
    let (argmax, _) = profile
        .values
        .iter()
        .enumerate()
        .skip(profile.warmup_samples)
        .fold((0, f64::MIN), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
    if argmax != herald {
        failures.push(format!("variance peaks at {argmax}, not at herald {herald}"));
    }
    let mut worst_sigma = 0.0f64;
    for j in 1..=(herald - profile.warmup_samples) {
        let (lo, hi) = (herald - j, herald + j);
        if hi >= n {
            break;
        }
        let (a, b) = (profile.values[lo], profile.values[hi]);
        // conservative band: estimates are positively correlated across ±j
        let sigma = (2.0 / (n_events - 1.0)).sqrt() * (a * a + b * b).sqrt();
        let dev = (a - b).abs() / sigma;
        worst_sigma = worst_sigma.max(dev);
        if dev >= 3.0 {
            failures.push(format!("asymmetry at ±{j} bins: {dev:.2}σ"));
            break;
        }
    }

    // single-rate control run against the closed-form profile
    let mut control = SimConfig::paper_default();
    control.mode.kind = rtquad_core::ModeKind::Rising;
    control.mode.hwhm_hz = Some(vec![11e6]);
    let gamma = PI4 * 11e6;
    let ensemble = simulate_ensemble(&control).unwrap();
    let mode = control.build_mode().unwrap();
    let filter = control.build_filter(&mode).unwrap().discretize(control.grid.dt).unwrap();
    let control_profile = variance_profile(&ensemble, &filter).unwrap();
    let z_score = |k: usize| {
        let tau = (k as f64 - herald as f64).abs() * control.grid.dt;
        let analytic = 0.5 + control.efficiency * (-gamma * tau).exp();
        let sigma = analytic * (2.0 / (n_events - 1.0)).sqrt();
        (control_profile.values[k] - analytic) / sigma
    };
    // The filtered signal decorrelates over ~1/(γ·dt) ≈ 36 bins, so adjacent
    // per-sample variance estimates are far from independent: the expected
    // max |z| over all ~900 samples is itself ≈ 3σ. Test pointwise 3σ at
    // effectively independent lags (herald ± multiples of five correlation
    // lengths) and keep a 5σ guard everywhere for genuine systematics.
    let step = (10.0 / (gamma * control.grid.dt)).ceil() as usize;
    let mut worst_control = 0.0f64;
    let mut k = control_profile.warmup_samples + (herald - control_profile.warmup_samples) % step;
    while k < n {
        let dev = z_score(k).abs();
        worst_control = worst_control.max(dev);
        if dev >= 3.0 {
            failures.push(format!("control profile off by {dev:.2}σ at sample {k}"));
        }
        k += step;
    }
    let worst_anywhere = (control_profile.warmup_samples..n)
        .map(|k| z_score(k).abs())
        .fold(0.0f64, f64::max);
    if worst_anywhere >= 5.0 {
        failures.push(format!("control profile has a {worst_anywhere:.2}σ outlier"));
    }

    verdict(
        "4 (variance profile)",
        &failures,
        &format!(
            "peak at herald {herald}, worst asymmetry {worst_sigma:.2}σ, worst control \
             deviation {worst_control:.2}σ at independent lags ({worst_anywhere:.2}σ anywhere)"
        ),
    );
}

#[test]
fn criterion_5_channel_correlation() {
    let fix = fixture();
    let mut failures = Vec::new();

    let pp = postprocessed_quadratures(&fix.ensemble, &fix.sampled).unwrap();
    let r_exact = pearson_correlation(&fix.realtime, &pp).unwrap();
    if !(r_exact > 0.999) {
        failures.push(format!("exact matched filter r = {r_exact:.6} ≤ 0.999"));
    }

    let cascade = PoleCascade::matched_to(&fix.config.build_mode().unwrap()).unwrap();
    let perturbed = cascade
        .with_perturbed_rates(&[0.05, -0.05, 0.05])
        .unwrap()
        .discretize(fix.config.grid.dt)
        .unwrap();
    let rt_pert = realtime_quadratures(&fix.ensemble, &perturbed).unwrap();
    let r_pert = pearson_correlation(&rt_pert, &pp).unwrap();
    if !(r_pert > 0.99) {
        failures.push(format!("±5%-perturbed filter r = {r_pert:.6} ≤ 0.99"));
    }

    verdict(
        "5 (real-time vs postprocessed correlation)",
        &failures,
        &format!("r exact {r_exact:.6}, r perturbed {r_pert:.6}"),
    );
}

#[test]
fn criterion_6_tomography_reproduction() {
    let fix = fixture();
    let mut failures = Vec::new();

    let basis = FockBasis::new(8).unwrap();
    let mle = mle_diagonal(&fix.realtime.values, &basis, 2000, 1e-10).unwrap();
    let rho11 = mle.rho.weight(1);
    if (rho11 - 0.785).abs() >= 0.02 {
        failures.push(format!("rho11 = {rho11:.4} outside 0.785 ± 0.02"));
    }
    let w0 = wigner_origin(&mle.rho);
    if (w0 - (-0.181)).abs() >= 0.01 {
        failures.push(format!("W(0,0) = {w0:.4} outside −0.181 ± 0.01"));
    }

    let estimator = |xs: &[f64]| {
        let r = mle_diagonal(xs, &basis, 2000, 1e-10).unwrap();
        vec![r.rho.weight(1)]
    };
    let boot = bootstrap(&fix.realtime.values, estimator, 100, fix.config.seed).unwrap();
    let std11 = boot.std[0];
    if !(0.002..=0.015).contains(&std11) {
        failures.push(format!("bootstrap std of rho11 = {std11:.4} outside [0.002, 0.015]"));
    }

    verdict(
        "6 (tomography)",
        &failures,
        &format!("rho11 {rho11:.4} ± {std11:.4}, W(0,0) {w0:.4}, {} EM iterations", mle.iterations),
    );
}

#[test]
fn criterion_7_property_pack() {
    // The full property suites run standalone in the `properties` test
    // target; this is a compact pass over each of them.
    let mut failures = Vec::new();

    // causality differencing
    let filter = PoleCascade::from_rates(&[PI4 * 11e6, PI4 * 19e6, PI4 * 36e6])
        .unwrap()
        .discretize(0.4e-9)
        .unwrap();
    let x: Vec<f64> = (0..256).map(|k| (k as f64 * 0.31).sin()).collect();
    let mut x2 = x.clone();
    for v in &mut x2[129..] {
        *v -= 2.0;
    }
    let (y1, y2) = (filter.filter_trace(&x), filter.filter_trace(&x2));
    if (0..=128).any(|k| y1[k].to_bits() != y2[k].to_bits()) {
        failures.push("causality differencing".into());
    }

    // linearity
    let combo: Vec<f64> = x.iter().zip(&x2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
    let fc = filter.filter_trace(&combo);
    let lin_ok = (0..x.len()).all(|k| {
        let expect = 2.0 * y1[k] - 0.5 * y2[k];
        (fc[k] - expect).abs() < 1e-12 * expect.abs().max(1.0)
    });
    if !lin_ok {
        failures.push("linearity".into());
    }

    // EM monotonicity and density invariants (asserted per-step internally)
    let basis = FockBasis::new(4).unwrap();
    let samples: Vec<f64> = (0..500).map(|k| ((k * 37 % 101) as f64 / 101.0 - 0.5) * 4.0).collect();
    let mle = mle_diagonal(&samples, &basis, 200, 1e-9).unwrap();
    if mle.log_likelihood.windows(2).any(|w| w[1] < w[0] - 1e-12 * (1.0 + w[0].abs())) {
        failures.push("EM monotonicity".into());
    }

    // Wigner normalization for a mixed state
    let rho = DensityDiagonal::new(vec![0.3, 0.4, 0.2, 0.1]).unwrap();
    let mut integral = 0.0;
    let (steps, r_max) = (40_000, 12.0);
    for k in 0..steps {
        let r = (k as f64 + 0.5) * r_max / steps as f64;
        integral += wigner_radial(&rho, r) * r * (r_max / steps as f64);
    }
    integral *= 2.0 * std::f64::consts::PI;
    if (integral - 1.0).abs() >= 1e-6 {
        failures.push(format!("Wigner normalization {integral:.8}"));
    }

    // seed determinism
    let mut config = SimConfig::paper_default();
    config.n_events = 32;
    if simulate_ensemble(&config).unwrap() != simulate_ensemble(&config).unwrap() {
        failures.push("seed determinism".into());
    }

    // file round-trip
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.qht");
    let ensemble = simulate_ensemble(&config).unwrap();
    rtquad_core::qht::write_ensemble(&path, &ensemble).unwrap();
    let back = rtquad_core::qht::read_ensemble(&path).unwrap();
    let bits_equal = ensemble
        .traces()
        .iter()
        .zip(back.traces())
        .all(|(a, b)| a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits()));
    if !bits_equal {
        failures.push("file round-trip".into());
    }

    verdict(
        "7 (property pack)",
        &failures,
        "causality, linearity, EM invariants, Wigner norm, determinism, round-trip",
    );
}

#[test]
fn criterion_8_stream_demo() {
    let fix = fixture();
    let start = Instant::now();
    let mut failures = Vec::new();

    let mut stream = StreamSimulator::new(&fix.config, 1.0).unwrap();
    if stream.overlap_warning() {
        failures.push("unexpected overlap warning at 1800 heralds/s".into());
    }
    let latched = latch_stream_quadratures(&mut stream, &fix.filter);
    let n_heralds = latched.len();
    let ratio = sample_variance(&latched) / fix.realtime.variance();
    if !(0.9..=1.1).contains(&ratio) {
        failures.push(format!("latched/per-event variance ratio {ratio:.4} outside [0.9, 1.1]"));
    }

    // strict causality on the stream path
    let mut short = StreamSimulator::new(&fix.config, 100e-6).unwrap();
    let mut samples = Vec::new();
    let mut buf = Vec::new();
    while short.next_chunk(&mut buf) {
        samples.extend_from_slice(&buf);
    }
    let split = samples.len() / 2;
    let mut modified = samples.clone();
    for v in &mut modified[split + 1..] {
        *v = -*v + 0.25;
    }
    let y1 = fix.filter.filter_trace(&samples);
    let y2 = fix.filter.filter_trace(&modified);
    if (0..=split).any(|k| y1[k].to_bits() != y2[k].to_bits()) {
        failures.push("stream-path causality differencing".into());
    }

    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "8 (stream demo)",
        &failures,
        &format!("{n_heralds} heralds in 1 s, variance ratio {ratio:.4}; {elapsed:.1} s"),
    );
}
