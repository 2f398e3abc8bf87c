//! Load-cap versus energy frontier by sweeping the integer RB cap, plus
//! selection rules that reuse the frontier without re-solving.
//!
//! `E*(eps)` is non-increasing in the cap because every interval's feasible
//! set grows. It may plateau before falling again, so plateau points are
//! skipped (they are dominated) and the sweep ends at the first cap that
//! reaches the unconstrained optimum `E*(K)`.

use serde::Serialize;

use crate::channel::ChannelProfile;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::timing::{plan_age_aware, IntervalCache, PlanSpec, SamplingPlan};

/// Relative tolerance for treating two frontier energies as equal.
pub const ENERGY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub epsilon_theta: usize,
    pub energy: f64,
    pub plan: SamplingPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoFrontier {
    pub points: Vec<FrontierPoint>,
    pub theta_lo: usize,
    pub theta_hi: usize,
    /// `E*(K)`, the energy ideal point.
    pub ideal_energy: f64,
}

impl ParetoFrontier {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(theta, energy)` pairs.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .map(|p| (p.epsilon_theta as f64, p.energy))
            .collect()
    }
}

fn plan_or_none(cache: &IntervalCache, spec: &PlanSpec) -> Result<Option<SamplingPlan>> {
    match plan_age_aware(cache, spec) {
        Ok(p) => Ok(Some(p)),
        Err(Error::NoFeasiblePlan(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn compute_frontier(scenario: &Scenario, profile: &ChannelProfile) -> Result<ParetoFrontier> {
    let cache = IntervalCache::new(profile);
    compute_frontier_cached(
        &cache,
        &PlanSpec::from_scenario(scenario, scenario.num_rb),
        scenario.num_rb,
    )
}

/// Sweep caps `1..=num_rb`; the `rb_cap` field of `base` is ignored.
pub fn compute_frontier_cached(
    cache: &IntervalCache,
    base: &PlanSpec,
    num_rb: usize,
) -> Result<ParetoFrontier> {
    let at = |eps: usize| plan_or_none(cache, &base.with_rb_cap(eps));
    let Some(full) = at(num_rb)? else {
        return Err(Error::NoFeasiblePlan(format!(
            "the AoI bound cannot be met even with epsilon_theta = K = {num_rb}"
        )));
    };
    let ideal = full.total_energy;
    let reached = |e: f64| e <= ideal * (1.0 + ENERGY_RTOL);

    let mut points: Vec<FrontierPoint> = Vec::new();
    let mut theta_lo = None;
    for eps in 1..=num_rb {
        let plan = if eps == num_rb {
            Some(full.clone())
        } else {
            at(eps)?
        };
        let Some(plan) = plan else {
            if theta_lo.is_some() {
                return Err(Error::Domain(format!(
                    "feasibility lost when raising epsilon_theta to {eps}"
                )));
            }
            continue;
        };
        theta_lo.get_or_insert(eps);
        let e = plan.total_energy;
        let improves = points
            .last()
            .map_or(true, |p| e < p.energy * (1.0 - ENERGY_RTOL));
        if improves || (reached(e) && points.last().map_or(true, |p| !reached(p.energy))) {
            points.push(FrontierPoint {
                epsilon_theta: eps,
                energy: e,
                plan,
            });
        }
        if reached(e) {
            break;
        }
    }
    let theta_lo = theta_lo.expect("cap K is feasible");
    let theta_hi = points.last().map(|p| p.epsilon_theta).unwrap_or(theta_lo);
    Ok(ParetoFrontier {
        points,
        theta_lo,
        theta_hi,
        ideal_energy: ideal,
    })
}

/// Strictly increasing on `n` evenly spaced samples of `[lo, hi]`.
fn increasing_on<F: Fn(f64) -> f64>(g: &F, lo: f64, hi: f64, n: usize) -> bool {
    let xs: Vec<f64> = if hi > lo {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    } else {
        vec![lo]
    };
    let ys: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    ys.iter().all(|y| y.is_finite()) && ys.windows(2).all(|w| w[1] > w[0])
}

const MONOTONE_SAMPLES: usize = 1025;

/// Apply strictly increasing maps to both objectives.
pub fn transform_frontier<G1, G2>(
    frontier: &ParetoFrontier,
    g1: G1,
    g2: G2,
) -> Result<Vec<(f64, f64)>>
where
    G1: Fn(f64) -> f64,
    G2: Fn(f64) -> f64,
{
    let pairs = frontier.pairs();
    let (t_lo, t_hi) = (frontier.theta_lo as f64, frontier.theta_hi as f64);
    let e_lo = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let e_hi = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !increasing_on(&g1, t_lo, t_hi, MONOTONE_SAMPLES) {
        return Err(Error::Domain(format!(
            "g1 is not strictly increasing on [{t_lo}, {t_hi}]"
        )));
    }
    if !increasing_on(&g2, e_lo, e_hi, MONOTONE_SAMPLES) {
        return Err(Error::Domain(format!(
            "g2 is not strictly increasing on [{e_lo}, {e_hi}]"
        )));
    }
    Ok(pairs.into_iter().map(|(t, e)| (g1(t), g2(e))).collect())
}

/// Minimizer of `utility(theta, energy)`; ties go to the smaller cap.
pub fn scalarize_select<U>(frontier: &ParetoFrontier, utility: U) -> Result<&FrontierPoint>
where
    U: Fn(f64, f64) -> f64,
{
    let mut best: Option<(&FrontierPoint, f64)> = None;
    for p in &frontier.points {
        let u = utility(p.epsilon_theta as f64, p.energy);
        if best.map_or(true, |(_, b)| u < b) {
            best = Some((p, u));
        }
    }
    best.map(|b| b.0)
        .ok_or_else(|| Error::Domain("empty frontier".into()))
}

/// Weighted `L_p` distance to the target point `(theta_t, energy_t)`.
pub fn weighted_lp(alpha: f64, p: f64, theta_t: f64, energy_t: f64) -> impl Fn(f64, f64) -> f64 {
    move |theta, energy| {
        (alpha * (theta - theta_t).abs().powf(p)
            + (1.0 - alpha) * (energy - energy_t).abs().powf(p))
        .powf(1.0 / p)
    }
}

/// Cheapest point whose transformed load stays within `budget`.
pub fn budget_select<G1>(frontier: &ParetoFrontier, g1: G1, budget: f64) -> Result<&FrontierPoint>
where
    G1: Fn(f64) -> f64,
{
    frontier
        .points
        .iter()
        .filter(|p| g1(p.epsilon_theta as f64) <= budget)
        .min_by(|a, b| a.energy.total_cmp(&b.energy))
        .ok_or(Error::BudgetInfeasible(budget))
}
