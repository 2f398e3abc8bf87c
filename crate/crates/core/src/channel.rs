//! Air-to-ground channel prediction.
//!
//! Large-scale gain follows the 3GPP UMi LOS/NLOS path-loss pair with an
//! elevation-dependent LOS probability and spatially correlated log-normal
//! shadowing. Small-scale fading is Gamma with unit mean, so the expected
//! capacity admits the deterministic lower bound `log2(1 + beta * snr)`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::scenario::{KappaMode, Scenario};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

// RNG stream ids used while building a profile.
const STREAM_LOS: u64 = 1;
const STREAM_SHADOW: u64 = 2;
const STREAM_KAPPA: u64 = 3;

/// 3GPP UMi path loss in dB. `fc_ghz` in GHz, distance in metres.
pub fn pathloss_db(distance_m: f64, fc_ghz: f64, is_los: bool) -> Result<f64> {
    if !(distance_m > 0.0) || !(fc_ghz > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs positive distance and frequency, got d={distance_m}, fc={fc_ghz}"
        )));
    }
    let d = distance_m.log10();
    let f = fc_ghz.log10();
    Ok(if is_los {
        22.0 + 28.0 * d + 20.0 * f
    } else {
        22.7 + 36.7 * d + 26.0 * f
    })
}

/// LOS probability `1 / (1 + 6 exp(-0.15 (theta - 6)))` for elevation in degrees.
pub fn los_probability(elevation_deg: f64) -> f64 {
    1.0 / (1.0 + 6.0 * (-0.15 * (elevation_deg - 6.0)).exp())
}

/// Digamma function for positive arguments.
///
/// Shifts the argument above 10 with `psi(x) = psi(x + 1) - 1/x`, then uses the
/// asymptotic expansion with Bernoulli terms through `x^-14`.
pub fn digamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // B2k / (2k) for k = 1..7
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    acc + x.ln() - 0.5 * inv - series
}

/// Fading severity factor `exp(psi(kappa)) / kappa`, in (0, 1).
pub fn beta(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!(
            "Gamma shape must be positive, got {kappa}"
        )));
    }
    // exp(psi(k) - ln k) keeps precision for large k where psi(k) ~ ln k.
    Ok((digamma(kappa) - kappa.ln()).exp())
}

/// `exp(psi(1)) = exp(-gamma_E)`; handy for Rayleigh fading.
pub fn beta_rayleigh() -> f64 {
    (-EULER_GAMMA).exp()
}

/// Expected-capacity lower bound `log2(1 + beta * p * g / noise)`.
pub fn capacity_lower_bound(power: f64, gain: f64, kappa: f64, noise: f64) -> Result<f64> {
    if power <= 0.0 {
        return Ok(0.0);
    }
    Ok((beta(kappa)? * power * gain / noise).ln_1p() / std::f64::consts::LN_2)
}

/// Predicted large-scale channel along the trajectory.
///
/// Tensors are stored slot-major: entry `(n, k, t)` lives at `(t * N + n) * K + k`,
/// so one slot is a contiguous `N * K` block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub num_bs: usize,
    pub num_rb: usize,
    pub horizon: usize,
    pub seed: u64,
    pub noise: f64,
    pub gain: Vec<f64>,
    pub shape: Vec<f64>,
    pub iota: Vec<f64>,
}

impl ChannelProfile {
    #[inline]
    pub fn index(&self, n: usize, k: usize, t: usize) -> usize {
        (t * self.num_bs + n) * self.num_rb + k
    }

    pub fn gain(&self, n: usize, k: usize, t: usize) -> f64 {
        self.gain[self.index(n, k, t)]
    }

    pub fn shape(&self, n: usize, k: usize, t: usize) -> f64 {
        self.shape[self.index(n, k, t)]
    }

    pub fn iota(&self, n: usize, k: usize, t: usize) -> f64 {
        self.iota[self.index(n, k, t)]
    }

    /// Floors `iota` of slot `t` (0-based), laid out `n * K + k`.
    pub fn slot_iota(&self, t: usize) -> &[f64] {
        let b = self.num_bs * self.num_rb;
        &self.iota[t * b..(t + 1) * b]
    }

    /// Build a profile from explicit gains and shapes; `iota` is derived.
    pub fn from_parts(
        num_bs: usize,
        num_rb: usize,
        horizon: usize,
        seed: u64,
        noise: f64,
        gain: Vec<f64>,
        shape: Vec<f64>,
    ) -> Result<Self> {
        let len = num_bs * num_rb * horizon;
        if gain.len() != len || shape.len() != len {
            return Err(Error::Domain(format!(
                "tensor length mismatch, expected {len}"
            )));
        }
        let mut iota = Vec::with_capacity(len);
        for (g, s) in gain.iter().zip(&shape) {
            if !(*g > 0.0) || !(*s > 0.0) {
                return Err(Error::Domain("gains and shapes must be positive".into()));
            }
            iota.push(noise / (beta(*s)? * g));
        }
        Ok(Self {
            num_bs,
            num_rb,
            horizon,
            seed,
            noise,
            gain,
            shape,
            iota,
        })
    }

    /// Profile with given floors directly; gains are back-filled for unit `beta`.
    ///
    /// Used to pose small hand-made instances where only `iota` matters.
    pub fn from_iota(num_bs: usize, num_rb: usize, horizon: usize, iota: Vec<f64>) -> Self {
        assert_eq!(iota.len(), num_bs * num_rb * horizon);
        let noise = 1.0;
        let shape = vec![f64::INFINITY; iota.len()];
        let gain = iota.iter().map(|i| noise / i).collect();
        Self {
            num_bs,
            num_rb,
            horizon,
            seed: 0,
            noise,
            gain,
            shape,
            iota,
        }
    }

    const MAGIC: &'static [u8; 8] = b"MPCPROF1";

    /// Binary dump: magic, `N K T seed` as u64, noise, then gain, shape, iota
    /// (all little-endian f64).
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(Self::MAGIC)?;
        for v in [
            self.num_bs as u64,
            self.num_rb as u64,
            self.horizon as u64,
            self.seed,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.noise.to_le_bytes())?;
        for arr in [&self.gain, &self.shape, &self.iota] {
            for v in arr.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Parse {
                key: "profile".into(),
                message: "bad magic".into(),
            });
        }
        let mut b = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> std::io::Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let k = u64::from_le_bytes(next(&mut r)?) as usize;
        let t = u64::from_le_bytes(next(&mut r)?) as usize;
        let seed = u64::from_le_bytes(next(&mut r)?);
        let noise = f64::from_le_bytes(next(&mut r)?);
        let len = n
            .checked_mul(k)
            .and_then(|x| x.checked_mul(t))
            .filter(|&x| x < (1 << 32))
            .ok_or_else(|| Error::Parse {
                key: "profile".into(),
                message: "bad dimensions".into(),
            })?;
        let mut read_vec = |r: &mut dyn Read| -> std::io::Result<Vec<f64>> {
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                out.push(f64::from_le_bytes(next(r)?));
            }
            Ok(out)
        };
        let gain = read_vec(&mut r)?;
        let shape = read_vec(&mut r)?;
        let iota = read_vec(&mut r)?;
        let p = Self {
            num_bs: n,
            num_rb: k,
            horizon: t,
            seed,
            noise,
            gain,
            shape,
            iota,
        };
        p.check_consistency()?;
        Ok(p)
    }

    /// Checks positivity and that `iota` agrees with gain, shape and noise.
    pub fn check_consistency(&self) -> Result<()> {
        for i in 0..self.iota.len() {
            let (g, s, io) = (self.gain[i], self.shape[i], self.iota[i]);
            if !(g > 0.0 && s > 0.0 && io > 0.0 && io.is_finite()) {
                return Err(Error::Domain(format!("non-positive profile entry at {i}")));
            }
            let b = if s.is_infinite() { 1.0 } else { beta(s)? };
            let expect = self.noise / (b * g);
            if ((io - expect) / expect).abs() > 1e-12 {
                return Err(Error::Domain(format!("iota inconsistent at {i}")));
            }
        }
        Ok(())
    }
}

/// Small-scale fading draws, same layout as [`ChannelProfile`].
#[derive(Debug, Clone, PartialEq)]
pub struct FadingSample {
    pub realization: Vec<f64>,
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gamma(kappa, 1/kappa) draws for every entry of the profile.
pub fn sample_fading(profile: &ChannelProfile, seed: u64) -> FadingSample {
    let mut rng = stream_rng(seed, 0);
    sample_fading_with(profile, &mut rng)
}

pub(crate) fn sample_fading_with(profile: &ChannelProfile, rng: &mut impl Rng) -> FadingSample {
    let realization = profile
        .shape
        .iter()
        .map(|&k| {
            if k.is_infinite() {
                1.0
            } else {
                Gamma::new(k, 1.0 / k).expect("positive shape").sample(rng)
            }
        })
        .collect();
    FadingSample { realization }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Zero-mean Gaussian track along a path with covariance
/// `sigma^2 exp(-|s_i - s_j| / d_corr)` in arc length `s`.
///
/// An exponential kernel in one dimension is Markov, so an AR(1) recursion with
/// step correlation `exp(-ds / d_corr)` reproduces it exactly.
pub fn correlated_shadowing(
    positions: &[[f64; 3]],
    sigma_db: f64,
    corr_dist_m: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(positions.len());
    let mut prev = 0.0;
    for (t, p) in positions.iter().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        let v = if t == 0 {
            sigma_db * z
        } else {
            let rho = if corr_dist_m > 0.0 {
                (-distance(positions[t - 1], *p) / corr_dist_m).exp()
            } else {
                0.0
            };
            rho * prev + (1.0 - rho * rho).sqrt() * sigma_db * z
        };
        out.push(v);
        prev = v;
    }
    out
}

/// Elevation of `uav` seen from `bs`, in degrees.
pub fn elevation_deg(uav: [f64; 3], bs: [f64; 3]) -> f64 {
    let d = distance(uav, bs);
    ((uav[2] - bs[2]) / d).asin().to_degrees()
}

/// Predict `g`, `kappa` and `iota` for every (BS, RB, slot).
pub fn build_profile(scenario: &Scenario, seed: u64) -> Result<ChannelProfile> {
    let (n_bs, n_rb, horizon) = (scenario.num_bs, scenario.num_rb, scenario.horizon);
    let mut los_rng = stream_rng(seed, STREAM_LOS);
    let mut shadow_rng = stream_rng(seed, STREAM_SHADOW);
    let mut kappa_rng = stream_rng(seed, STREAM_KAPPA);

    // Large-scale gain per (n, t), shared by all RBs.
    let mut gain_nt = vec![0.0; n_bs * horizon];
    for (n, bs) in scenario.bs_positions.iter().enumerate() {
        let shadow = correlated_shadowing(
            &scenario.uav_trajectory,
            scenario.shadowing_sigma_db,
            scenario.shadowing_corr_dist_m,
            &mut shadow_rng,
        );
        for (t, uav) in scenario.uav_trajectory.iter().enumerate() {
            let d = distance(*uav, *bs);
            let los = los_rng.gen::<f64>() < los_probability(elevation_deg(*uav, *bs));
            let pl = pathloss_db(d, scenario.carrier_freq_ghz, los)?;
            gain_nt[n * horizon + t] = 10f64.powf(-(pl + shadow[t]) / 10.0);
        }
    }

    let [lo, hi] = scenario.kappa_range;
    let mut draw_kappa = || {
        if hi > lo {
            kappa_rng.gen_range(lo..=hi)
        } else {
            lo
        }
    };
    let len = n_bs * n_rb * horizon;
    let mut shape = vec![0.0; len];
    let idx = |n: usize, k: usize, t: usize| (t * n_bs + n) * n_rb + k;
    match scenario.kappa_mode {
        KappaMode::PerBlock => {
            for n in 0..n_bs {
                for k in 0..n_rb {
                    let kap = draw_kappa();
                    for t in 0..horizon {
                        shape[idx(n, k, t)] = kap;
                    }
                }
            }
        }
        KappaMode::PerSlot => {
            for n in 0..n_bs {
                for k in 0..n_rb {
                    for t in 0..horizon {
                        shape[idx(n, k, t)] = draw_kappa();
                    }
                }
            }
        }
    }
    let mut gain = vec![0.0; len];
    for t in 0..horizon {
        for n in 0..n_bs {
            for k in 0..n_rb {
                gain[idx(n, k, t)] = gain_nt[n * horizon + t];
            }
        }
    }
    ChannelProfile::from_parts(
        n_bs,
        n_rb,
        horizon,
        seed,
        scenario.noise_power_mw,
        gain,
        shape,
    )
}
