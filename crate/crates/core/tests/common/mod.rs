//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use mpcomm::channel::ChannelProfile;
use mpcomm::inner::{solve_slot_cap, IntervalSpec, Tolerances};
use rand::Rng;

#[derive(Debug)]
pub struct IntervalInstance {
    pub profile: ChannelProfile,
    pub spec: IntervalSpec,
    pub phi_max: f64,
}

/// Random profile with gains spread over 20 dB and shapes in `[1, 30]`.
pub fn random_profile(rng: &mut impl Rng, n: usize, k: usize, t: usize) -> ChannelProfile {
    let len = n * k * t;
    let gain = (0..len)
        .map(|_| 10f64.powf(rng.gen_range(0.0..2.0)))
        .collect();
    let shape = (0..len).map(|_| rng.gen_range(1.0..=30.0)).collect();
    ChannelProfile::from_parts(n, k, t, 0, 1.0, gain, shape).unwrap()
}

/// Random single-interval problem (`N <= 3`, `K <= 4`, up to 3 slots). The
/// target is a random fraction of the all-caps rate, kept away from the
/// feasibility boundary.
pub fn random_interval(rng: &mut impl Rng) -> IntervalInstance {
    let n = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=4);
    let len = rng.gen_range(1..=3);
    let profile = random_profile(rng, n, k, len);
    let rb_cap = rng.gen_range(1..=k);
    let power_cap = rng.gen_range(0.5..5.0);
    let tol = Tolerances::default();
    let phi_max: f64 = (0..len)
        .map(|t| solve_slot_cap(&profile, t, rb_cap, power_cap, &tol).rate())
        .sum();
    let mut u = rng.gen_range(0.05..1.25);
    if (0.97..1.03).contains(&u) {
        u = 0.5;
    }
    let spec = IntervalSpec {
        start: 1,
        end: len + 1,
        rb_cap,
        rate_target: u * phi_max,
        power_cap,
    };
    IntervalInstance {
        profile,
        spec,
        phi_max,
    }
}

/// Relative difference with an absolute floor for near-zero references.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}
