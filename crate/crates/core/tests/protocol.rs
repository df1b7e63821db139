use std::f64::consts::FRAC_PI_2;

use squid_qkd::analytic::{ensemble_noise, time_avg_noise};
use squid_qkd::device::EffectiveParams;
use squid_qkd::numerics::integrate_adaptive;
use squid_qkd::protocol::{
    run_protocol, sift, ChannelConfig, EngineConfig, MeasurementScheme, RoundSetup, SourceConfig,
};

fn centred(n: usize) -> SourceConfig {
    SourceConfig { modulation_variance: 1.0, phi_0: 0.0, v_0: 0.0, n_trials: n }
}

fn run(
    src: &SourceConfig,
    scheme: MeasurementScheme,
    device: &EffectiveParams,
    seed: u64,
) -> squid_qkd::protocol::SiftedData {
    let setup = RoundSetup {
        source: src,
        channel: &ChannelConfig::lossless(),
        scheme: &scheme,
        device,
        engine: &EngineConfig::default(),
    };
    let mut data = run_protocol(&setup, seed).unwrap();
    sift(&mut data)
}

fn squared_gaps(pairs: &squid_qkd::protocol::SiftedData) -> Vec<f64> {
    pairs.alice.iter().zip(&pairs.bob).map(|(a, b)| (b - a).powi(2)).collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

// 20 bins over one revival period; 45.31 is the 0.1% point of χ²(20)
fn binned_chi_square(ratio: f64, seed: u64) -> f64 {
    let device = EffectiveParams::from_rates_unchecked(ratio, 1.0, 1e6);
    let pairs = run(&centred(100_000), MeasurementScheme::ArbitraryTime, &device, seed);
    let gaps = squared_gaps(&pairs);
    let period = device.revival_period();
    let bins = 20;
    let mut grouped = vec![Vec::new(); bins];
    for (t, g) in pairs.t_meas.iter().zip(&gaps) {
        grouped[((t / period * bins as f64) as usize).min(bins - 1)].push(*g);
    }
    grouped
        .iter()
        .enumerate()
        .map(|(b, gs)| {
            let lo = period * b as f64 / bins as f64;
            let hi = lo + period / bins as f64;
            let expected = integrate_adaptive(|t| ensemble_noise(ratio, 1.0, t), lo, hi, 1e-10, 0.0, 500)
                .value
                / (hi - lo);
            let (mean, var) = mean_var(gs);
            (mean - expected).powi(2) / (var / gs.len() as f64)
        })
        .sum()
}

#[test]
fn binned_noise_follows_ensemble_curve_odd_ratio() {
    let chi2 = binned_chi_square(5.0, 21);
    assert!(chi2 < 45.31, "χ² = {chi2}");
}

#[test]
fn binned_noise_follows_ensemble_curve_even_ratio() {
    let chi2 = binned_chi_square(6.0, 22);
    assert!(chi2 < 45.31, "χ² = {chi2}");
}

#[test]
fn arbitrary_time_noise_is_time_average() {
    let device = EffectiveParams::from_rates(1e4, 100.0, 1e6).unwrap();
    let pairs = run(&centred(100_000), MeasurementScheme::ArbitraryTime, &device, 31);
    let (c_ab, _) = mean_var(&squared_gaps(&pairs));
    let expected = time_avg_noise(device.rotation_rate, device.kerr_rate);
    assert!((expected - 1.5).abs() < 2e-3);
    assert!((c_ab - 1.5).abs() < 0.02, "C_AB = {c_ab}");
}

#[test]
fn time_stamped_noise_is_vacuum() {
    let device = EffectiveParams::from_rates(1e4, 100.0, 1e6).unwrap();
    let src = SourceConfig { phi_0: 4.0, v_0: 4.0, ..centred(100_000) };
    let pairs = run(&src, MeasurementScheme::time_stamped(), &device, 32);
    let gaps: Vec<f64> =
        pairs.alice.iter().zip(&pairs.bob).map(|(a, b)| (b - a.abs()).powi(2)).collect();
    let (noise, _) = mean_var(&gaps);
    assert!((noise - 0.5).abs() < 0.01, "noise = {noise}");
}

#[test]
fn folded_cat_outcomes_match_coherent_marginal() {
    let device = EffectiveParams::from_rates(1e4, 100.0, 1e6).unwrap();
    let src = SourceConfig { phi_0: 4.0, v_0: 4.0, ..centred(100_000) };
    // an undisturbed coherent readout: label spread plus shot noise
    let (ref_mean, ref_var) = (4.0, (src.modulation_variance + 1.0) * 0.5);
    for (k, seed) in [(1.0, 41), (3.0, 42)] {
        let t = k * FRAC_PI_2 / device.kerr_rate;
        let folded: Vec<f64> = run(&src, MeasurementScheme::FixedTime { t }, &device, seed)
            .bob
            .iter()
            .map(|x| x.abs())
            .collect();
        let (mean, var) = mean_var(&folded);
        assert!((mean / ref_mean - 1.0).abs() < 0.01, "t = {k}π/2ν: mean {mean} vs {ref_mean}");
        assert!((var / ref_var - 1.0).abs() < 0.01, "t = {k}π/2ν: var {var} vs {ref_var}");
    }
}
