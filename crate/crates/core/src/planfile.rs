//! JSON plan files.
//!
//! A plan file carries a header binding it to a scenario (SHA-256 of the
//! canonical scenario text) and the full plan with sparse per-slot power
//! records. Floats are stored at full precision so re-validation after a
//! round trip sees exactly the numbers the solver produced.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelProfile;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::sim::PAYLOAD_RTOL;
use crate::timing::{Policy, SamplingPlan};

pub const PLAN_FORMAT: &str = "mpcomm-plan/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanHeader {
    pub format: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub epsilon_theta: usize,
    pub aoi_bound: usize,
    pub payload_threshold: f64,
    pub power_budget_mw: f64,
    pub rate_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub header: PlanHeader,
    pub plan: SamplingPlan,
}

impl PlanFile {
    pub fn new(scenario: &Scenario, seed: u64, rate_margin: f64, plan: SamplingPlan) -> Self {
        Self {
            header: PlanHeader {
                format: PLAN_FORMAT.into(),
                scenario_hash: scenario.hash(),
                seed,
                epsilon_theta: plan.spec.rb_cap,
                aoi_bound: scenario.aoi_bound,
                payload_threshold: scenario.payload_threshold,
                power_budget_mw: scenario.power_budget_mw,
                rate_margin,
            },
            plan,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes") + "\n"
    }

    /// Parse and re-validate against the scenario and profile it was built for.
    pub fn from_json(text: &str, scenario: &Scenario, profile: &ChannelProfile) -> Result<Self> {
        let pf: PlanFile =
            serde_json::from_str(text).map_err(|e| Error::PlanFile(e.to_string()))?;
        pf.validate(scenario, profile)?;
        Ok(pf)
    }

    pub fn validate(&self, scenario: &Scenario, profile: &ChannelProfile) -> Result<()> {
        let bad = |m: String| Err(Error::PlanFile(m));
        let h = &self.header;
        let p = &self.plan;
        if h.format != PLAN_FORMAT {
            return bad(format!("unknown format {:?}", h.format));
        }
        if h.scenario_hash != scenario.hash() {
            return bad("scenario hash mismatch".into());
        }
        if h.epsilon_theta != p.spec.rb_cap
            || h.aoi_bound != p.spec.aoi_bound
            || p.spec.horizon != scenario.horizon
        {
            return bad("header disagrees with plan parameters".into());
        }
        if profile.horizon != scenario.horizon
            || profile.num_bs != scenario.num_bs
            || profile.num_rb != scenario.num_rb
        {
            return bad("profile dimensions disagree with scenario".into());
        }
        check_instants(p)?;
        check_blocks(p, profile)?;
        let total: f64 = p.blocks.iter().filter_map(|b| b.outcome.energy()).sum();
        if (total - p.total_energy).abs() > 1e-9 * total.abs().max(1.0) {
            return bad(format!(
                "total energy {} != sum of intervals {}",
                p.total_energy, total
            ));
        }
        Ok(())
    }
}

fn check_instants(p: &SamplingPlan) -> Result<()> {
    let bad = |m: String| Err(Error::PlanFile(m));
    if p.instants.first() != Some(&1) {
        return bad("first instant must be slot 1".into());
    }
    for (a, b) in p.delivery_intervals() {
        if b <= a || b - a > p.spec.aoi_bound {
            return bad(format!(
                "interval [{a}, {b}) violates the gap bound {}",
                p.spec.aoi_bound
            ));
        }
    }
    if matches!(p.policy, Policy::AgeAware | Policy::Periodic) {
        let blocks: Vec<(usize, usize)> = p
            .blocks
            .iter()
            .map(|b| (b.spec.start, b.spec.end))
            .collect();
        if blocks != p.delivery_intervals() {
            return bad("blocks do not match delivery intervals".into());
        }
    }
    Ok(())
}

fn check_blocks(p: &SamplingPlan, profile: &ChannelProfile) -> Result<()> {
    let bad = |m: String| Err(Error::PlanFile(m));
    let mut covered = vec![false; p.spec.horizon];
    for b in &p.blocks {
        let spec = &b.spec;
        if spec.start < 1 || spec.end <= spec.start || spec.end > p.spec.horizon + 1 {
            return bad(format!("block [{}, {}) out of range", spec.start, spec.end));
        }
        for t in spec.slot_indices() {
            if std::mem::replace(&mut covered[t], true) {
                return bad(format!("slot {} covered twice", t + 1));
            }
        }
        let Some(sol) = b.outcome.solution() else {
            continue;
        };
        if sol.spec != *spec {
            return bad("block spec disagrees with its solution".into());
        }
        let mut rate = 0.0;
        let mut energy = 0.0;
        for a in &sol.slots {
            if !(spec.start..spec.end).contains(&a.slot) {
                return bad(format!("slot {} outside block", a.slot));
            }
            let t = a.slot - 1;
            let mut used = vec![false; profile.num_rb];
            let mut load = vec![0usize; profile.num_bs];
            for e in &a.entries {
                if e.bs >= profile.num_bs || e.rb >= profile.num_rb {
                    return bad(format!("entry ({}, {}) out of range", e.bs, e.rb));
                }
                if std::mem::replace(&mut used[e.rb], true) {
                    return bad(format!("RB {} assigned twice in slot {}", e.rb, a.slot));
                }
                load[e.bs] += 1;
                let iota = profile.iota(e.bs, e.rb, t);
                if !(e.power > 0.0) || ((e.power + iota) - a.level).abs() > 1e-9 * a.level {
                    return bad(format!(
                        "power of ({}, {}) in slot {} is not water-filled",
                        e.bs, e.rb, a.slot
                    ));
                }
                rate += (e.power / iota).ln_1p() / std::f64::consts::LN_2;
            }
            if load.iter().any(|&l| l > spec.rb_cap) {
                return bad(format!("slot {} exceeds the RB cap", a.slot));
            }
            let power = a.power();
            if power > spec.power_cap * (1.0 + 1e-9) {
                return bad(format!("slot {} exceeds the power budget", a.slot));
            }
            energy += power;
        }
        if (energy - sol.binary_energy).abs() > 1e-9 * energy.max(1.0) {
            return bad(format!(
                "binary energy mismatch in block [{}, {})",
                spec.start, spec.end
            ));
        }
        if !sol.binary_shortfall && rate < spec.rate_target * (1.0 - PAYLOAD_RTOL) {
            return bad(format!(
                "block [{}, {}) misses its rate target",
                spec.start, spec.end
            ));
        }
    }
    if let Some(t) = covered.iter().position(|c| !c) {
        return bad(format!("slot {} not covered by any block", t + 1));
    }
    Ok(())
}
