//! Standalone property suites: strict causality, linearity, temporal-mode
//! laws, estimator invariants, seed determinism, and file round-trips.

use proptest::prelude::*;

use rtquad_core::analysis::realtime_quadratures;
use rtquad_core::filter::PoleCascade;
use rtquad_core::mode::TemporalMode;
use rtquad_core::qht;
use rtquad_core::simulator::{
    simulate_ensemble, SimConfig, SourceSampler, StreamSimulator,
};
use rtquad_core::tomography::{
    mle_diagonal, wigner_radial, DensityDiagonal, FockBasis,
};
use rtquad_core::util::{substream_rng, RngDomain};
use rtquad_core::TimeGrid;

const PI4: f64 = 4.0 * std::f64::consts::PI;

fn paper_filter() -> rtquad_core::DiscretizedFilter {
    PoleCascade::from_rates(&[PI4 * 11e6, PI4 * 19e6, PI4 * 36e6])
        .unwrap()
        .discretize(0.4e-9)
        .unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 * f(a + k as f64 * h) } else { 2.0 * f(a + k as f64 * h) };
    }
    acc * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Inputs agreeing up to index k produce outputs agreeing up to k, bit for bit.
    #[test]
    fn filter_is_strictly_causal(
        trace in prop::collection::vec(-3.0f64..3.0, 40..200),
        split_frac in 0.05f64..0.95,
        delta in prop::collection::vec(-5.0f64..5.0, 1..40),
    ) {
        let filter = paper_filter();
        let split = ((trace.len() - 2) as f64 * split_frac) as usize;
        let mut modified = trace.clone();
        for (slot, d) in modified[split + 1..].iter_mut().zip(&delta) {
            *slot += d;
        }
        let y1 = filter.filter_trace(&trace);
        let y2 = filter.filter_trace(&modified);
        for k in 0..=split {
            prop_assert_eq!(y1[k].to_bits(), y2[k].to_bits());
        }
    }

    /// Filtering is linear within float rounding.
    #[test]
    fn filter_is_linear(
        x in prop::collection::vec(-2.0f64..2.0, 64..128),
        y_seed in 0u64..1000,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let filter = paper_filter();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(k, _)| (((k as u64 + y_seed) * 2654435761 % 1000) as f64) / 250.0 - 2.0)
            .collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let fx = filter.filter_trace(&x);
        let fy = filter.filter_trace(&y);
        let fc = filter.filter_trace(&combo);
        for k in 0..x.len() {
            let expect = a * fx[k] + b * fy[k];
            let scale = expect.abs().max(1.0);
            prop_assert!((fc[k] - expect).abs() < 1e-12 * scale);
        }
    }

    /// mode_match(rising(γ, t0), rising(γ, t0 + Δ)) = e^{−γ|Δ|}, symmetric in Δ.
    #[test]
    fn shift_overlap_law(
        log_gamma in 12.0f64..21.0,
        delta_scaled in -3.0f64..3.0,
    ) {
        let gamma = log_gamma.exp();
        let delta = delta_scaled / gamma;
        let f = TemporalMode::rising(gamma, 0.0).unwrap();
        let g = TemporalMode::rising(gamma, delta).unwrap();
        let expect = (-gamma * delta.abs()).exp();
        prop_assert!((f.mode_match(&g) - expect).abs() < 1e-6);
        let g_mirror = TemporalMode::rising(gamma, -delta).unwrap();
        prop_assert!((f.mode_match(&g) - f.mode_match(&g_mirror)).abs() < 1e-9);
    }

    /// Every constructed mode carries unit L2 norm.
    #[test]
    fn modes_are_normalized(
        log_gamma in 12.0f64..21.0,
        ratio2 in 1.1f64..5.0,
        ratio3 in 5.5f64..20.0,
    ) {
        let g1 = log_gamma.exp();
        for mode in [
            TemporalMode::rising(g1, 0.0).unwrap(),
            TemporalMode::double_exponential(g1, 0.0).unwrap(),
            TemporalMode::multi_rising(&[g1, g1 * ratio2, g1 * ratio3], 0.0).unwrap(),
        ] {
            prop_assert!((mode.inner_product(&mode) - 1.0).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// EM keeps the likelihood non-decreasing and the density valid at every step.
    #[test]
    fn em_monotone_and_invariant(
        raw in prop::collection::vec(0.05f64..1.0, 2..5),
        seed in 0u64..1_000,
    ) {
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let sampler = SourceSampler::new(&weights).unwrap();
        let mut rng = substream_rng(seed, RngDomain::Event, 0);
        let samples: Vec<f64> = (0..400).map(|_| sampler.draw(&mut rng).1).collect();
        let basis = FockBasis::new(weights.len()).unwrap();
        // mle_diagonal asserts monotonicity and revalidates the density
        // internally at every iteration; a panic fails this property.
        let result = mle_diagonal(&samples, &basis, 300, 1e-9).unwrap();
        for w in result.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs()));
        }
        let sum: f64 = result.rho.weights().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(result.rho.weights().iter().all(|&w| w >= 0.0));
    }

    /// 2π ∫ W(r) r dr = 1 for any valid diagonal density.
    #[test]
    fn wigner_is_normalized(raw in prop::collection::vec(0.0f64..1.0, 1..9)) {
        prop_assume!(raw.iter().sum::<f64>() > 1e-3);
        let total: f64 = raw.iter().sum();
        let rho = DensityDiagonal::new(raw.iter().map(|w| w / total).collect()).unwrap();
        let integral =
            simpson(|r| wigner_radial(&rho, r) * r, 0.0, 12.0, 20_000) * 2.0 * std::f64::consts::PI;
        prop_assert!((integral - 1.0).abs() < 1e-6, "integral {}", integral);
    }

    /// QHT1 write-then-read reproduces every sample bit-exactly.
    #[test]
    fn ensemble_file_round_trip(
        n_events in 1usize..6,
        n_samples in 16usize..64,
        herald_frac in 0.1f64..0.9,
        seed in 0u64..1_000,
    ) {
        let herald = ((n_samples - 1) as f64 * herald_frac) as usize;
        let grid = TimeGrid::new(0.4e-9, n_samples, herald).unwrap();
        let mut config = SimConfig::paper_default();
        config.grid = grid;
        config.mode.kind = rtquad_core::ModeKind::Rising;
        config.mode.hwhm_hz = Some(vec![110e6]);
        config.n_events = n_events;
        config.seed = seed;
        let ensemble = simulate_ensemble(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.qht");
        qht::write_ensemble(&path, &ensemble).unwrap();
        let back = qht::read_ensemble(&path).unwrap();
        prop_assert_eq!(back.grid(), ensemble.grid());
        for (a, b) in ensemble.traces().iter().zip(back.traces()) {
            for (x, y) in a.samples.iter().zip(&b.samples) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

/// Identical seeds give bit-identical ensembles and derived quadratures.
#[test]
fn seed_determinism_is_bit_exact() {
    let mut config = SimConfig::paper_default();
    config.n_events = 64;
    let a = simulate_ensemble(&config).unwrap();
    let b = simulate_ensemble(&config).unwrap();
    assert_eq!(a, b);

    let filter = paper_filter();
    let qa = realtime_quadratures(&a, &filter).unwrap();
    let qb = realtime_quadratures(&b, &filter).unwrap();
    for (x, y) in qa.values.iter().zip(&qb.values) {
        assert_eq!(x.to_bits(), y.to_bits());
    }

    config.seed += 1;
    let c = simulate_ensemble(&config).unwrap();
    assert_ne!(a.traces()[0].samples, c.traces()[0].samples);
}

/// The stream generator is reproducible sample for sample.
#[test]
fn stream_determinism_is_bit_exact() {
    let mut config = SimConfig::paper_default();
    config.herald_rate = 50_000.0;
    let collect = |cfg: &SimConfig| {
        let mut stream = StreamSimulator::new(cfg, 20e-6).unwrap();
        let mut all = Vec::new();
        let mut buf = Vec::new();
        while stream.next_chunk(&mut buf) {
            all.extend_from_slice(&buf);
        }
        (stream.herald_indices().to_vec(), all)
    };
    let (h1, s1) = collect(&config);
    let (h2, s2) = collect(&config);
    assert_eq!(h1, h2);
    for (x, y) in s1.iter().zip(&s2) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
