//! Monte Carlo evaluation of sampling plans and the three baseline policies.
//!
//! Age convention: `age[1] = 1`; a successful delivery at the last slot of an
//! interval resets the next slot's age to 1, otherwise age grows by one. The
//! peak age is therefore the longest stretch between successes, and a plan
//! whose intervals all succeed has peak age equal to its longest interval.
//!
//! Success is judged at each delivery interval's last slot against the
//! payload accumulated since the previous success, both for the expected
//! rates the planner targets and for rates under sampled fading.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{sample_fading_with, stream_rng, ChannelProfile};
use crate::error::Result;
use crate::inner::{Entry, IntervalSpec};
use crate::timing::{periodic_instants, Block, IntervalCache, PlanSpec, Policy, SamplingPlan};

/// Relative slack on the payload threshold for solver round-off.
pub const PAYLOAD_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoiTrace {
    /// Age at slots `1..=T+1`.
    pub age: Vec<u32>,
    /// Delivery success at slots `1..=T`.
    pub success: Vec<bool>,
    /// Payload accumulated since the last success, per slot.
    pub cum_payload: Vec<f64>,
    /// Payload at the end of each delivery interval.
    pub delivered: Vec<f64>,
    pub peak_age: u32,
}

/// Run the age recursion over delivery intervals given per-slot payloads.
pub fn aoi_trace(intervals: &[(usize, usize)], slot_payload: &[f64], threshold: f64) -> AoiTrace {
    let horizon = slot_payload.len();
    let mut success = vec![false; horizon];
    let mut cum_payload = vec![0.0; horizon];
    let mut delivered = Vec::with_capacity(intervals.len());
    let mut acc = 0.0;
    let mut ends = vec![false; horizon + 1];
    for &(_, end) in intervals {
        ends[end - 1] = true;
    }
    for t in 1..=horizon {
        acc += slot_payload[t - 1];
        cum_payload[t - 1] = acc;
        if ends[t] {
            delivered.push(acc);
            if acc >= threshold * (1.0 - PAYLOAD_RTOL) {
                success[t - 1] = true;
                acc = 0.0;
            }
        }
    }
    let mut age = Vec::with_capacity(horizon + 1);
    age.push(1u32);
    for t in 1..=horizon {
        let prev = age[t - 1];
        age.push(if success[t - 1] { 1 } else { prev + 1 });
    }
    let peak_age = *age.iter().max().unwrap();
    AoiTrace {
        age,
        success,
        cum_payload,
        delivered,
        peak_age,
    }
}

/// Active entries per slot (0-based) from every solved block of the plan.
fn slot_entries(plan: &SamplingPlan) -> Vec<Vec<Entry>> {
    let mut out = vec![Vec::new(); plan.spec.horizon];
    for b in &plan.blocks {
        if let Some(s) = b.outcome.solution() {
            for a in &s.slots {
                out[a.slot - 1].extend_from_slice(&a.entries);
            }
        }
    }
    out
}

/// Per-slot expected payload `sum log2(1 + p / iota)` of the binary plan.
pub fn expected_slot_payload(plan: &SamplingPlan, profile: &ChannelProfile) -> Vec<f64> {
    slot_entries(plan)
        .iter()
        .enumerate()
        .map(|(t, es)| {
            es.iter()
                .map(|e| (e.power / profile.iota(e.bs, e.rb, t)).ln_1p() / std::f64::consts::LN_2)
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub policy: Policy,
    pub replicas: usize,
    /// Peak age under expected-rate success.
    pub expected_peak_age: u32,
    pub expected_aoi_met: bool,
    /// Fraction of replicas whose realized peak age stays within the bound.
    pub success_rate: f64,
    /// Fraction of delivery intervals whose realized payload met the threshold.
    pub interval_success_rate: f64,
    pub mean_peak_age: f64,
    pub max_peak_age: u32,
    /// Relaxed-optimal plan energy (power x slots).
    pub energy: f64,
    pub binary_energy: f64,
    pub worst_rb_load: usize,
    #[serde(skip)]
    pub traces: Vec<AoiTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub payload_threshold: f64,
    pub aoi_bound: usize,
    pub keep_traces: bool,
}

/// Replicas draw fading from stream `replica + 1` of `seed`, so results do
/// not depend on execution order or thread count.
pub fn simulate(
    plan: &SamplingPlan,
    profile: &ChannelProfile,
    settings: &SimSettings,
    replicas: usize,
    seed: u64,
) -> SimReport {
    let intervals = plan.delivery_intervals();
    let entries = slot_entries(plan);
    let expected = aoi_trace(
        &intervals,
        &expected_slot_payload(plan, profile),
        settings.payload_threshold,
    );
    let (n_rb, n_bs) = (profile.num_rb, profile.num_bs);

    let traces: Vec<AoiTrace> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64 + 1);
            let xi = sample_fading_with(profile, &mut rng).realization;
            let payload: Vec<f64> = entries
                .iter()
                .enumerate()
                .map(|(t, es)| {
                    es.iter()
                        .map(|e| {
                            let idx = (t * n_bs + e.bs) * n_rb + e.rb;
                            let snr = e.power * profile.gain[idx] * xi[idx] / profile.noise;
                            snr.ln_1p() / std::f64::consts::LN_2
                        })
                        .sum()
                })
                .collect();
            aoi_trace(&intervals, &payload, settings.payload_threshold)
        })
        .collect();

    let bound = settings.aoi_bound as u32;
    let n = replicas.max(1) as f64;
    let ok = traces.iter().filter(|t| t.peak_age <= bound).count();
    let intervals_total = (traces.len() * intervals.len()).max(1) as f64;
    let intervals_ok: usize = traces
        .iter()
        .map(|t| {
            t.delivered
                .iter()
                .filter(|&&d| d >= settings.payload_threshold * (1.0 - PAYLOAD_RTOL))
                .count()
        })
        .sum();
    SimReport {
        policy: plan.policy,
        replicas,
        expected_peak_age: expected.peak_age,
        expected_aoi_met: expected.peak_age <= bound,
        success_rate: if replicas == 0 { 0.0 } else { ok as f64 / n },
        interval_success_rate: intervals_ok as f64 / intervals_total,
        mean_peak_age: traces.iter().map(|t| t.peak_age as f64).sum::<f64>() / n,
        max_peak_age: traces.iter().map(|t| t.peak_age).max().unwrap_or(0),
        energy: plan.total_energy,
        binary_energy: plan.binary_energy,
        worst_rb_load: plan.max_load(n_bs),
        traces: if settings.keep_traces {
            traces
        } else {
            Vec::new()
        },
    }
}

fn solve_blocks(cache: &IntervalCache, specs: Vec<IntervalSpec>) -> Result<Vec<Block>> {
    specs
        .into_par_iter()
        .map(|spec| {
            Ok(Block {
                spec,
                outcome: (*cache.solve(&spec)?).clone(),
            })
        })
        .collect()
}

/// Fixed instants every `tau` slots, one block per interval.
pub fn baseline_periodic(cache: &IntervalCache, spec: &PlanSpec) -> Result<SamplingPlan> {
    let instants = periodic_instants(spec.horizon, spec.aoi_bound);
    let mut ends = instants[1..].to_vec();
    ends.push(spec.horizon + 1);
    let specs = instants
        .iter()
        .zip(&ends)
        .map(|(&a, &b)| spec.interval(a, b, spec.rate_target))
        .collect();
    Ok(SamplingPlan::new(
        Policy::Periodic,
        *spec,
        instants,
        solve_blocks(cache, specs)?,
    ))
}

/// Every slot carries `target / tau` on its own.
pub fn baseline_instantaneous(cache: &IntervalCache, spec: &PlanSpec) -> Result<SamplingPlan> {
    let per_slot = spec.rate_target / spec.aoi_bound as f64;
    let specs = (1..=spec.horizon)
        .map(|t| spec.interval(t, t + 1, per_slot))
        .collect();
    let instants = periodic_instants(spec.horizon, spec.aoi_bound);
    Ok(SamplingPlan::new(
        Policy::Instantaneous,
        *spec,
        instants,
        solve_blocks(cache, specs)?,
    ))
}

/// One block over the whole horizon carrying `T * target / tau`.
pub fn baseline_average(cache: &IntervalCache, spec: &PlanSpec) -> Result<SamplingPlan> {
    let total = spec.horizon as f64 * spec.rate_target / spec.aoi_bound as f64;
    let specs = vec![spec.interval(1, spec.horizon + 1, total)];
    let instants = periodic_instants(spec.horizon, spec.aoi_bound);
    Ok(SamplingPlan::new(
        Policy::Average,
        *spec,
        instants,
        solve_blocks(cache, specs)?,
    ))
}

/// Plan for any policy, including the age-aware one.
pub fn plan_policy(cache: &IntervalCache, spec: &PlanSpec, policy: Policy) -> Result<SamplingPlan> {
    match policy {
        Policy::AgeAware => crate::timing::plan_age_aware(cache, spec),
        Policy::Periodic => baseline_periodic(cache, spec),
        Policy::Instantaneous => baseline_instantaneous(cache, spec),
        Policy::Average => baseline_average(cache, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_six_slot_trace() {
        // Intervals [1,3), [3,5), [5,7); the middle one falls short.
        let payload = [0.5, 0.6, 0.2, 0.3, 0.4, 0.5];
        let tr = aoi_trace(&[(1, 3), (3, 5), (5, 7)], &payload, 1.0);
        assert_eq!(tr.success, vec![false, true, false, false, false, true]);
        assert_eq!(tr.age, vec![1, 2, 1, 2, 3, 4, 1]);
        assert_eq!(tr.peak_age, 4);
        assert_eq!(tr.delivered.len(), 3);
        assert!((tr.delivered[2] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn zero_threshold_always_succeeds() {
        let tr = aoi_trace(&[(1, 3), (3, 4)], &[0.0; 3], 0.0);
        assert_eq!(tr.peak_age, 2);
    }

    #[test]
    fn zero_payload_ages_linearly() {
        let tr = aoi_trace(&[(1, 3), (3, 5)], &[0.0; 4], 1.0);
        assert_eq!(tr.age, vec![1, 2, 3, 4, 5]);
    }
}
