//! Statistical and reference checks of the channel model.

use mpcomm::channel::{
    beta, build_profile, capacity_lower_bound, correlated_shadowing, digamma, pathloss_db,
    sample_fading, ChannelProfile,
};
use mpcomm::oracle::{mc_expected_capacity, OracleBudget};
use mpcomm::scenario::{default_patrol_scenario, patrol_scenario, PatrolParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn digamma_against_reference_library() {
    let mut x = 1e-3;
    while x < 1e6 {
        let want = statrs::function::gamma::digamma(x);
        assert!(
            (digamma(x) - want).abs() <= 1e-10 * want.abs().max(1.0),
            "x = {x}"
        );
        x *= 1.37;
    }
}

#[test]
fn beta_strictly_increasing() {
    let mut prev = 0.0;
    for i in 1..2000 {
        let b = beta(i as f64 * 0.05).unwrap();
        assert!(b > prev && b < 1.0);
        prev = b;
    }
    assert!(beta(0.0).is_err() && beta(-1.0).is_err());
}

#[test]
fn fading_moments() {
    let p = ChannelProfile::from_parts(1, 2, 1, 0, 1.0, vec![1.0, 1.0], vec![4.0, 1.0]).unwrap();
    let draws: Vec<[f64; 2]> = (0..100_000)
        .map(|s| {
            let r = sample_fading(&p, s).realization;
            [r[0], r[1]]
        })
        .collect();
    for (j, want_var) in [(0, 0.25), (1, 1.0)] {
        let m = draws.iter().map(|d| d[j]).sum::<f64>() / draws.len() as f64;
        let v = draws.iter().map(|d| (d[j] - m).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!((m - 1.0).abs() < 0.02, "mean {m}");
        if j == 0 {
            assert!((v - want_var).abs() < 0.02, "variance {v}");
        }
    }
    assert_eq!(sample_fading(&p, 9), sample_fading(&p, 9));
}

#[test]
fn shadowing_correlation_at_corr_distance() {
    let pts = [[0.0, 0.0, 50.0], [5.0, 0.0, 50.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sigma = 8f64.sqrt();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for _ in 0..10_000 {
        let s = correlated_shadowing(&pts, sigma, 5.0, &mut rng);
        sxy += s[0] * s[1];
        sxx += s[0] * s[0];
        syy += s[1] * s[1];
    }
    let corr = sxy / (sxx * syy).sqrt();
    assert!((corr - (-1f64).exp()).abs() < 0.03, "corr {corr}");
    assert!((sxx / 10_000.0 - 8.0).abs() < 0.4);
}

#[test]
fn zero_shadowing_leaves_path_loss() {
    let mut s = patrol_scenario(&PatrolParams::desk(2, 1, 4, 2), 3);
    s.shadowing_sigma_db = 0.0;
    let p = build_profile(&s, 3).unwrap();
    for t in 0..4 {
        for n in 0..2 {
            let uav = s.uav_trajectory[t];
            let bs = s.bs_positions[n];
            let d =
                ((uav[0] - bs[0]).powi(2) + (uav[1] - bs[1]).powi(2) + (uav[2] - bs[2]).powi(2))
                    .sqrt();
            let g_db = -10.0 * p.gain(n, 0, t).log10();
            let los = pathloss_db(d, s.carrier_freq_ghz, true).unwrap();
            let nlos = pathloss_db(d, s.carrier_freq_ghz, false).unwrap();
            assert!((g_db - los).abs() < 1e-9 || (g_db - nlos).abs() < 1e-9);
        }
    }
}

#[test]
fn profiles_are_deterministic() {
    let s = default_patrol_scenario(4);
    let a = build_profile(&s, 4).unwrap();
    assert_eq!(a, build_profile(&s, 4).unwrap());
    assert_ne!(a, build_profile(&s, 5).unwrap());
    a.check_consistency().unwrap();
}

#[test]
fn bound_tracks_monte_carlo_at_kappa_four() {
    let snr = 100.0;
    let b = capacity_lower_bound(snr, 1.0, 4.0, 1.0).unwrap();
    let (m, se) = mc_expected_capacity(4.0, snr, 1_000_000, 11, &OracleBudget::default()).unwrap();
    assert!(m >= b - 3.0 * se && m - b < 0.1);
}

#[test]
fn rayleigh_capacity_golden() {
    // kappa = 1, 20 dB, seed 1; regenerate if the sampler changes.
    let (m, se) = mc_expected_capacity(1.0, 100.0, 1_000_000, 1, &OracleBudget::default()).unwrap();
    let text = include_str!("golden/mc_rayleigh_20db.txt");
    let want: f64 = text.trim().parse().unwrap();
    assert!((m - want).abs() < 1e-9, "got {m:.12}");
    assert!(se < 0.01);
}

proptest! {
    #[test]
    fn jensen_bound_holds_pointwise(kappa in 0.5f64..40.0, snr_db in -10.0f64..40.0) {
        let snr = 10f64.powf(snr_db / 10.0);
        let b = capacity_lower_bound(snr, 1.0, kappa, 1.0).unwrap();
        prop_assert!(b <= (1.0 + snr).log2() + 1e-12);
        prop_assert!(b >= 0.0);
    }
}
