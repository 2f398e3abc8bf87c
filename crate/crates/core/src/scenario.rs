//! Scenario description: trajectory, deployment, radio parameters and thresholds.
//!
//! The canonical on-disk form is TOML with keys mirroring the [`Scenario`]
//! fields. Powers are stored in linear mW; the loader also accepts
//! `power_budget_dbm` and `noise_power_dbm` and converts them on the way in.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::stream_rng;
use crate::error::{Error, Result, Violation};

/// Smallest admissible Gamma shape.
pub const KAPPA_FLOOR: f64 = 1e-3;
/// Largest seed a scenario file can carry (TOML integers are signed 64-bit).
pub const MAX_SEED: u64 = i64::MAX as u64;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// How Gamma shapes vary over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KappaMode {
    /// One draw per (BS, RB), held for every slot.
    #[default]
    PerBlock,
    /// Fresh draw per (BS, RB, slot).
    PerSlot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Number of slots `T`.
    pub horizon: usize,
    /// Number of base stations `N`.
    pub num_bs: usize,
    /// Number of resource blocks `K`.
    pub num_rb: usize,
    /// Peak-AoI bound in slots.
    pub aoi_bound: usize,
    /// Payload per delivery, in summed bits/s/Hz over RBs and slots.
    pub payload_threshold: f64,
    /// Per-slot transmit power budget (mW).
    pub power_budget_mw: f64,
    /// Receiver noise power (mW).
    pub noise_power_mw: f64,
    /// Seconds per slot; only scales reported energy.
    pub slot_duration: f64,
    /// System bandwidth (Hz); only used when converting to bits.
    pub bandwidth_hz: f64,
    pub carrier_freq_ghz: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_corr_dist_m: f64,
    pub kappa_range: [f64; 2],
    pub kappa_mode: KappaMode,
    pub master_seed: u64,
    pub uav_trajectory: Vec<[f64; 3]>,
    pub bs_positions: Vec<[f64; 3]>,
}

/// Mirror of [`Scenario`] with every key optional, so missing keys can be named.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    horizon: Option<usize>,
    num_bs: Option<usize>,
    num_rb: Option<usize>,
    aoi_bound: Option<usize>,
    payload_threshold: Option<f64>,
    power_budget_mw: Option<f64>,
    power_budget_dbm: Option<f64>,
    noise_power_mw: Option<f64>,
    noise_power_dbm: Option<f64>,
    slot_duration: Option<f64>,
    bandwidth_hz: Option<f64>,
    carrier_freq_ghz: Option<f64>,
    shadowing_sigma_db: Option<f64>,
    shadowing_corr_dist_m: Option<f64>,
    kappa_range: Option<[f64; 2]>,
    kappa_mode: Option<KappaMode>,
    master_seed: Option<u64>,
    uav_trajectory: Option<Vec<[f64; 3]>>,
    bs_positions: Option<Vec<[f64; 3]>>,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::MissingKey(key.to_string()))
}

fn power_field(mw: Option<f64>, dbm: Option<f64>, key: &str) -> Result<f64> {
    match (mw, dbm) {
        (Some(_), Some(_)) => Err(Error::Parse {
            key: format!("{key}_mw"),
            message: format!("give either {key}_mw or {key}_dbm, not both"),
        }),
        (Some(v), None) => Ok(v),
        (None, Some(d)) => Ok(dbm_to_mw(d)),
        (None, None) => Err(Error::MissingKey(format!("{key}_mw"))),
    }
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let key = message
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| e.span().map(|s| text[s].to_string()).unwrap_or_default());
        Error::Parse { key, message }
    })?;
    let s = Scenario {
        horizon: required(raw.horizon, "horizon")?,
        num_bs: required(raw.num_bs, "num_bs")?,
        num_rb: required(raw.num_rb, "num_rb")?,
        aoi_bound: required(raw.aoi_bound, "aoi_bound")?,
        payload_threshold: required(raw.payload_threshold, "payload_threshold")?,
        power_budget_mw: power_field(raw.power_budget_mw, raw.power_budget_dbm, "power_budget")?,
        noise_power_mw: power_field(raw.noise_power_mw, raw.noise_power_dbm, "noise_power")?,
        slot_duration: raw.slot_duration.unwrap_or(1.0),
        bandwidth_hz: raw.bandwidth_hz.unwrap_or(10e6),
        carrier_freq_ghz: required(raw.carrier_freq_ghz, "carrier_freq_ghz")?,
        shadowing_sigma_db: raw.shadowing_sigma_db.unwrap_or(0.0),
        shadowing_corr_dist_m: raw.shadowing_corr_dist_m.unwrap_or(5.0),
        kappa_range: required(raw.kappa_range, "kappa_range")?,
        kappa_mode: raw.kappa_mode.unwrap_or_default(),
        master_seed: raw.master_seed.unwrap_or(0),
        uav_trajectory: required(raw.uav_trajectory, "uav_trajectory")?,
        bs_positions: required(raw.bs_positions, "bs_positions")?,
    };
    s.validate()?;
    Ok(s)
}

/// Canonical TOML form; [`load_scenario`] reproduces the value exactly.
pub fn save_scenario(s: &Scenario) -> String {
    toml::to_string(s).expect("scenario is always serializable")
}

impl Scenario {
    /// Report every violated invariant at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let mut bad = |field: &str, msg: String| {
            v.push(Violation {
                field: field.into(),
                message: msg,
            })
        };
        if self.horizon < 1 {
            bad("horizon", "must be at least 1".into());
        }
        if self.num_bs < 1 {
            bad("num_bs", "must be at least 1".into());
        }
        if self.num_rb < 1 {
            bad("num_rb", "must be at least 1".into());
        }
        if self.aoi_bound < 1 || self.aoi_bound > self.horizon.max(1) {
            bad(
                "aoi_bound",
                format!("must lie in [1, horizon], got {}", self.aoi_bound),
            );
        }
        if !(self.payload_threshold > 0.0) || !self.payload_threshold.is_finite() {
            bad(
                "payload_threshold",
                format!("must be positive, got {}", self.payload_threshold),
            );
        }
        if !(self.power_budget_mw > 0.0) || !self.power_budget_mw.is_finite() {
            bad(
                "power_budget_mw",
                format!("must be positive, got {}", self.power_budget_mw),
            );
        }
        if !(self.noise_power_mw > 0.0) || !self.noise_power_mw.is_finite() {
            bad(
                "noise_power_mw",
                format!("must be positive, got {}", self.noise_power_mw),
            );
        }
        if !(self.slot_duration > 0.0) {
            bad("slot_duration", "must be positive".into());
        }
        if !(self.bandwidth_hz > 0.0) {
            bad("bandwidth_hz", "must be positive".into());
        }
        if !(self.carrier_freq_ghz > 0.0) {
            bad("carrier_freq_ghz", "must be positive".into());
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            bad("shadowing_sigma_db", "must be non-negative".into());
        }
        if !(self.shadowing_corr_dist_m >= 0.0) {
            bad("shadowing_corr_dist_m", "must be non-negative".into());
        }
        let [lo, hi] = self.kappa_range;
        if !(lo >= KAPPA_FLOOR) || !(hi >= lo) || !hi.is_finite() {
            bad(
                "kappa_range",
                format!("need {KAPPA_FLOOR} <= low <= high, got [{lo}, {hi}]"),
            );
        }
        if self.uav_trajectory.len() != self.horizon {
            bad(
                "uav_trajectory",
                format!(
                    "length {} differs from horizon {}",
                    self.uav_trajectory.len(),
                    self.horizon
                ),
            );
        }
        if self.bs_positions.len() != self.num_bs {
            bad(
                "bs_positions",
                format!(
                    "length {} differs from num_bs {}",
                    self.bs_positions.len(),
                    self.num_bs
                ),
            );
        }
        let finite = |p: &[f64; 3]| p.iter().all(|c| c.is_finite());
        if self.uav_trajectory.iter().any(|p| p[2] < 0.0 || !finite(p)) {
            bad(
                "uav_trajectory",
                "altitudes must be non-negative and finite".into(),
            );
        }
        if self.bs_positions.iter().any(|p| p[2] < 0.0 || !finite(p)) {
            bad(
                "bs_positions",
                "altitudes must be non-negative and finite".into(),
            );
        }
        if self.master_seed > MAX_SEED {
            bad("master_seed", format!("must not exceed {MAX_SEED}"));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(save_scenario(self).as_bytes()))
    }
}

/// Geometry and load knobs for generated patrol scenarios.
#[derive(Debug, Clone)]
pub struct PatrolParams {
    pub horizon: usize,
    pub num_bs: usize,
    pub num_rb: usize,
    pub aoi_bound: usize,
    pub payload_threshold: f64,
    pub power_budget_dbm: f64,
    /// Side of the square monitoring area (m).
    pub area_m: f64,
    pub radius_m: f64,
    pub altitude_m: f64,
    pub speed_mps: f64,
    pub kappa_range: [f64; 2],
}

impl Default for PatrolParams {
    fn default() -> Self {
        Self {
            horizon: 63,
            num_bs: 5,
            num_rb: 10,
            aoi_bound: 5,
            payload_threshold: 20.0,
            power_budget_dbm: 20.0,
            area_m: 200.0,
            radius_m: 80.0,
            altitude_m: 50.0,
            speed_mps: 6.0,
            kappa_range: [1.0, 30.0],
        }
    }
}

impl PatrolParams {
    /// Small instance used by tests and quick experiments.
    pub fn desk(num_bs: usize, num_rb: usize, horizon: usize, aoi_bound: usize) -> Self {
        Self {
            horizon,
            num_bs,
            num_rb,
            aoi_bound,
            payload_threshold: 8.0,
            ..Self::default()
        }
    }
}

/// Circular patrol over a square area with ground base stations placed
/// uniformly at random; radio constants follow a 3 GHz UMi deployment.
pub fn patrol_scenario(params: &PatrolParams, seed: u64) -> Scenario {
    let mut rng = stream_rng(seed, 0);
    let c = params.area_m / 2.0;
    // Chord between consecutive points equals speed * slot duration.
    let step = 2.0 * (params.speed_mps / (2.0 * params.radius_m)).min(1.0).asin();
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let uav_trajectory = (0..params.horizon)
        .map(|t| {
            let a = phase + step * t as f64;
            [
                c + params.radius_m * a.cos(),
                c + params.radius_m * a.sin(),
                params.altitude_m,
            ]
        })
        .collect();
    let bs_positions = (0..params.num_bs)
        .map(|_| {
            [
                rng.gen_range(0.0..params.area_m),
                rng.gen_range(0.0..params.area_m),
                0.0,
            ]
        })
        .collect();
    Scenario {
        horizon: params.horizon,
        num_bs: params.num_bs,
        num_rb: params.num_rb,
        aoi_bound: params.aoi_bound,
        payload_threshold: params.payload_threshold,
        power_budget_mw: dbm_to_mw(params.power_budget_dbm),
        noise_power_mw: dbm_to_mw(-90.0),
        slot_duration: 1.0,
        bandwidth_hz: 10e6,
        carrier_freq_ghz: 3.0,
        shadowing_sigma_db: 8f64.sqrt(),
        shadowing_corr_dist_m: 5.0,
        kappa_range: params.kappa_range,
        kappa_mode: KappaMode::PerBlock,
        master_seed: seed,
        uav_trajectory,
        bs_positions,
    }
}

/// Default patrol: 50 m altitude circle at 6 m/s over a 200 m square.
pub fn default_patrol_scenario(seed: u64) -> Scenario {
    patrol_scenario(&PatrolParams::default(), seed)
}
