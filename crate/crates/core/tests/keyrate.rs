use proptest::prelude::*;

use squid_qkd::device::EffectiveParams;
use squid_qkd::fock::VACUUM_NOISE;
use squid_qkd::keyrate::{
    distill_key, intrinsic_noise, monobit_passes, secure_rate_background,
    secure_rate_background_snr, secure_rate_scheme1, ReconcileOptions,
};
use squid_qkd::protocol::{
    run_protocol, sift, ChannelConfig, EngineConfig, MeasurementScheme, RoundSetup, SourceConfig,
};

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) > 0.0 && f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn rates_change_sign_at_unit_chi() {
    for v in [1.5, 2.0, 10.0] {
        let chi = bisect(|c| secure_rate_background(v, c), 0.0, 5.0);
        assert!((chi - 1.0).abs() < 1e-9, "V = {v}: {chi}");
    }
    for v_a in [0.5, 1.0, 4.0] {
        let chi =
            bisect(|c| secure_rate_scheme1(v_a, c, VACUUM_NOISE, VACUUM_NOISE).unwrap(), 0.0, 5.0);
        assert!((chi - 1.0).abs() < 1e-9, "V_A = {v_a}: {chi}");
    }
}

#[test]
fn arbitrary_time_rate_turns_negative_early() {
    // with the time-averaged Bob noise the sign change moves below χ = 1
    let chi = bisect(|c| secure_rate_scheme1(1.0, c, 1.5, VACUUM_NOISE).unwrap(), 0.0, 5.0);
    assert!((chi - (2f64.sqrt() - 1.0)).abs() < 1e-9, "{chi}");
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn background_rate_routes_agree(v in 1.0f64..50.0, chi in 0.0f64..20.0) {
        let closed = secure_rate_background(v, chi);
        let snr = secure_rate_background_snr(v, chi);
        prop_assert!((closed - snr).abs() < 1e-12, "{closed} vs {snr}");
    }

    #[test]
    fn background_rate_decreases_in_chi(v in 1.01f64..50.0, chi in 0.0f64..10.0, step in 1e-3f64..1.0) {
        prop_assert!(secure_rate_background(v, chi + step) < secure_rate_background(v, chi));
    }

    #[test]
    fn scheme1_rate_decreases_in_chi(
        v_a in 0.05f64..20.0,
        chi in 0.0f64..10.0,
        step in 1e-3f64..1.0,
        c_ab in 0.5f64..3.0,
        c_ae in 0.5f64..3.0,
    ) {
        let at = |c| secure_rate_scheme1(v_a, c, c_ab, c_ae).unwrap();
        prop_assert!(at(chi + step) < at(chi));
    }
}

fn scheme2_pairs(eta: f64, n: usize, seed: u64) -> (squid_qkd::protocol::SiftedData, f64) {
    let device = EffectiveParams::from_rates(1e4, 100.0, 1e6).unwrap();
    let source = SourceConfig { modulation_variance: 1.0, phi_0: 4.0, v_0: 4.0, n_trials: n };
    let scheme = MeasurementScheme::time_stamped();
    let setup = RoundSetup {
        source: &source,
        channel: &ChannelConfig::with_eta(eta),
        scheme: &scheme,
        device: &device,
        engine: &EngineConfig::default(),
    };
    let mut data = run_protocol(&setup, seed).unwrap();
    (sift(&mut data), intrinsic_noise(&scheme, &device))
}

#[test]
fn scheme2_pipeline_yields_key_when_secure() {
    let (pairs, intrinsic) = scheme2_pairs(0.8, 100_000, 70);
    let out = distill_key(&pairs, intrinsic, &ReconcileOptions::default(), 71).unwrap();
    eprintln!("{}", out.report.to_json());
    assert!(out.report.secure);
    assert!(!out.key.is_empty());
    assert!(monobit_passes(&out.key));
    let chi = (1.0 - 0.8) / 0.8;
    assert!((out.report.noise.chi - chi).abs() < 0.03, "{}", out.report.noise.chi);
}

#[test]
fn scheme2_pipeline_refuses_lossy_channel() {
    let (pairs, intrinsic) = scheme2_pairs(0.4, 100_000, 72);
    let out = distill_key(&pairs, intrinsic, &ReconcileOptions::default(), 73).unwrap();
    assert!(!out.report.secure);
    assert!(out.key.is_empty());
}
