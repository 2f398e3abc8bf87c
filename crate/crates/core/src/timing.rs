//! Sampling-instant selection as a shortest path over interval energies.
//!
//! Nodes `1..=T+1` are candidate delivery epochs and the edge `i -> j`
//! (`1 <= j - i <= tau`) is the interval `[i, j)` weighted by its minimum
//! energy. Every path from `1` to `T + 1` is a sampling sequence that meets
//! the peak-AoI bound, and the cheapest one is found by a forward DP.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelProfile;
use crate::error::{Error, Result};
use crate::inner::{
    solve_interval_with_caps, solve_slot_cap, InnerOutcome, IntervalSpec, SlotCap, Tolerances,
};
use crate::scenario::Scenario;

/// Parameters shared by every interval of one plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanSpec {
    pub horizon: usize,
    pub aoi_bound: usize,
    pub rb_cap: usize,
    /// Payload each delivery interval must carry (after any margin).
    pub rate_target: f64,
    pub power_cap: f64,
}

impl PlanSpec {
    pub fn from_scenario(s: &Scenario, rb_cap: usize) -> Self {
        Self {
            horizon: s.horizon,
            aoi_bound: s.aoi_bound,
            rb_cap,
            rate_target: s.payload_threshold,
            power_cap: s.power_budget_mw,
        }
    }

    /// Scale the payload target by `margin` (>= 1 for realized-success headroom).
    pub fn with_margin(self, margin: f64) -> Self {
        Self {
            rate_target: self.rate_target * margin,
            ..self
        }
    }

    pub fn with_rb_cap(self, rb_cap: usize) -> Self {
        Self { rb_cap, ..self }
    }

    pub fn interval(&self, start: usize, end: usize, rate_target: f64) -> IntervalSpec {
        IntervalSpec {
            start,
            end,
            rb_cap: self.rb_cap,
            rate_target,
            power_cap: self.power_cap,
        }
    }
}

type EdgeKey = (usize, usize, usize, u64, u64);

/// Memo of slot caps and interval solves for one profile, safe to share
/// across threads. Duplicate concurrent misses recompute the same value.
pub struct IntervalCache<'a> {
    profile: &'a ChannelProfile,
    tol: Tolerances,
    caps: Mutex<HashMap<(usize, usize, u64), Arc<SlotCap>>>,
    outcomes: Mutex<HashMap<EdgeKey, Arc<InnerOutcome>>>,
}

impl<'a> IntervalCache<'a> {
    pub fn new(profile: &'a ChannelProfile) -> Self {
        Self {
            profile,
            tol: Tolerances::default(),
            caps: Mutex::new(HashMap::new()),
            outcomes: Mutex::new(HashMap::new()),
        }
    }

    pub fn profile(&self) -> &'a ChannelProfile {
        self.profile
    }

    /// Cap of slot `t` (0-based).
    pub fn slot_cap(&self, t: usize, rb_cap: usize, power_cap: f64) -> Arc<SlotCap> {
        let key = (t, rb_cap, power_cap.to_bits());
        if let Some(c) = self.caps.lock().unwrap().get(&key) {
            return c.clone();
        }
        let c = Arc::new(solve_slot_cap(
            self.profile,
            t,
            rb_cap,
            power_cap,
            &self.tol,
        ));
        self.caps.lock().unwrap().entry(key).or_insert(c).clone()
    }

    pub fn solve(&self, spec: &IntervalSpec) -> Result<Arc<InnerOutcome>> {
        let key = (
            spec.start,
            spec.end,
            spec.rb_cap,
            spec.rate_target.to_bits(),
            spec.power_cap.to_bits(),
        );
        if let Some(o) = self.outcomes.lock().unwrap().get(&key) {
            return Ok(o.clone());
        }
        let caps: Vec<Arc<SlotCap>> = spec
            .slot_indices()
            .map(|t| self.slot_cap(t, spec.rb_cap, spec.power_cap))
            .collect();
        let refs: Vec<&SlotCap> = caps.iter().map(|c| c.as_ref()).collect();
        let o = Arc::new(solve_interval_with_caps(
            spec,
            self.profile,
            &refs,
            &self.tol,
        )?);
        Ok(self
            .outcomes
            .lock()
            .unwrap()
            .entry(key)
            .or_insert(o)
            .clone())
    }

    /// Number of memoized interval solves.
    pub fn len(&self) -> usize {
        self.outcomes.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub outcome: Arc<InnerOutcome>,
}

impl Edge {
    /// `None` marks an infeasible interval.
    pub fn weight(&self) -> Option<f64> {
        self.outcome.energy()
    }
}

#[derive(Debug, Clone)]
pub struct TimingGraph {
    pub spec: PlanSpec,
    /// Sorted by `(to, from)`.
    pub edges: Vec<Edge>,
}

impl TimingGraph {
    pub fn num_nodes(&self) -> usize {
        self.spec.horizon + 1
    }

    /// Sum over gaps `c = 1..=tau` of `T + 1 - c`.
    pub fn expected_edge_count(horizon: usize, tau: usize) -> usize {
        (1..=tau.min(horizon)).map(|c| horizon + 1 - c).sum()
    }

    /// Graph with externally supplied weights; `None` marks infeasible edges.
    pub fn from_weights<F>(spec: PlanSpec, mut weight: F) -> Self
    where
        F: FnMut(usize, usize) -> Option<f64>,
    {
        let edges = edge_pairs(spec.horizon, spec.aoi_bound)
            .into_iter()
            .map(|(i, j)| {
                let outcome = match weight(i, j) {
                    Some(e) => synthetic_outcome(spec.interval(i, j, spec.rate_target), e),
                    None => InnerOutcome::Infeasible { phi_max: 0.0 },
                };
                Edge {
                    from: i,
                    to: j,
                    outcome: Arc::new(outcome),
                }
            })
            .collect();
        Self { spec, edges }
    }
}

fn synthetic_outcome(spec: IntervalSpec, energy: f64) -> InnerOutcome {
    use crate::inner::InnerSolution;
    InnerOutcome::Solved(InnerSolution {
        spec,
        energy,
        global_level: 0.0,
        slot_levels: vec![],
        mix: vec![],
        mixed_rate: spec.rate_target,
        slots: vec![],
        binary_energy: energy,
        expected_rate: spec.rate_target,
        binary_shortfall: false,
    })
}

fn edge_pairs(horizon: usize, tau: usize) -> Vec<(usize, usize)> {
    (2..=horizon + 1)
        .flat_map(|j| (j.saturating_sub(tau).max(1)..j).map(move |i| (i, j)))
        .collect()
}

/// Solve every admissible interval, in parallel.
pub fn build_graph(
    scenario: &Scenario,
    profile: &ChannelProfile,
    rb_cap: usize,
) -> Result<TimingGraph> {
    build_graph_cached(
        &IntervalCache::new(profile),
        &PlanSpec::from_scenario(scenario, rb_cap),
    )
}

pub fn build_graph_cached(cache: &IntervalCache, spec: &PlanSpec) -> Result<TimingGraph> {
    if spec.rb_cap == 0 {
        return Err(Error::invalid("epsilon_theta", "must be at least 1"));
    }
    let edges = edge_pairs(spec.horizon, spec.aoi_bound)
        .into_par_iter()
        .map(|(i, j)| {
            let outcome = cache.solve(&spec.interval(i, j, spec.rate_target))?;
            Ok(Edge {
                from: i,
                to: j,
                outcome,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TimingGraph { spec: *spec, edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    AgeAware,
    Periodic,
    Instantaneous,
    Average,
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "age-aware" => Ok(Policy::AgeAware),
            "periodic" => Ok(Policy::Periodic),
            "instantaneous" => Ok(Policy::Instantaneous),
            "average" => Ok(Policy::Average),
            _ => Err(Error::invalid("policy", format!("unknown policy {s:?}"))),
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Policy::AgeAware => "age-aware",
            Policy::Periodic => "periodic",
            Policy::Instantaneous => "instantaneous",
            Policy::Average => "average",
        })
    }
}

/// One resource-allocation block of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub spec: IntervalSpec,
    pub outcome: InnerOutcome,
}

/// Delivery instants plus the allocation that serves them.
///
/// `instants` start delivery intervals `[t_i, t_{i+1})` ending at `T + 1`.
/// For the age-aware and periodic policies blocks coincide with those
/// intervals; the other baselines allocate per slot or over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub policy: Policy,
    pub spec: PlanSpec,
    pub instants: Vec<usize>,
    pub blocks: Vec<Block>,
    /// Sum of relaxed-optimal block energies.
    pub total_energy: f64,
    /// Sum of block energies after binary rounding.
    pub binary_energy: f64,
}

impl SamplingPlan {
    pub fn new(policy: Policy, spec: PlanSpec, instants: Vec<usize>, blocks: Vec<Block>) -> Self {
        let total_energy = blocks.iter().filter_map(|b| b.outcome.energy()).sum();
        let binary_energy = blocks
            .iter()
            .filter_map(|b| b.outcome.solution())
            .map(|s| s.binary_energy)
            .sum();
        Self {
            policy,
            spec,
            instants,
            blocks,
            total_energy,
            binary_energy,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.blocks.iter().all(|b| b.outcome.solution().is_some())
    }

    pub fn num_samples(&self) -> usize {
        self.instants.len()
    }

    /// `(start, end)` of each delivery interval.
    pub fn delivery_intervals(&self) -> Vec<(usize, usize)> {
        let mut ends: Vec<usize> = self.instants[1..].to_vec();
        ends.push(self.spec.horizon + 1);
        self.instants.iter().copied().zip(ends).collect()
    }

    /// Worst per-BS RB count over all slots of the binary allocation.
    pub fn max_load(&self, num_bs: usize) -> usize {
        self.blocks
            .iter()
            .filter_map(|b| b.outcome.solution())
            .map(|s| s.max_load(num_bs))
            .max()
            .unwrap_or(0)
    }
}

/// Instants `1, 1 + tau, 1 + 2 tau, ...` within the horizon.
pub fn periodic_instants(horizon: usize, tau: usize) -> Vec<usize> {
    (1..=horizon).step_by(tau.max(1)).collect()
}

/// Forward DP in node order. Among equal costs the earliest predecessor
/// wins, which yields the lexicographically smallest optimal sequence.
pub fn shortest_path(graph: &TimingGraph) -> Result<SamplingPlan> {
    let n = graph.num_nodes();
    let mut dist = vec![f64::INFINITY; n + 1];
    let mut pred: Vec<Option<usize>> = vec![None; n + 1];
    dist[1] = 0.0;
    for e in &graph.edges {
        let Some(w) = e.weight() else { continue };
        if dist[e.from].is_infinite() {
            continue;
        }
        let c = dist[e.from] + w;
        if c < dist[e.to] {
            dist[e.to] = c;
            pred[e.to] = Some(e.from);
        }
    }
    if dist[n].is_infinite() {
        return Err(Error::NoFeasiblePlan(format!(
            "no sampling sequence reaches slot {} with epsilon_theta = {}",
            n, graph.spec.rb_cap
        )));
    }
    let mut nodes = vec![n];
    while let Some(p) = pred[*nodes.last().unwrap()] {
        nodes.push(p);
    }
    nodes.reverse();
    let lookup: HashMap<(usize, usize), &Edge> =
        graph.edges.iter().map(|e| ((e.from, e.to), e)).collect();
    let blocks = nodes
        .windows(2)
        .map(|w| {
            let e = lookup[&(w[0], w[1])];
            Block {
                spec: graph.spec.interval(w[0], w[1], graph.spec.rate_target),
                outcome: (*e.outcome).clone(),
            }
        })
        .collect();
    let mut plan = SamplingPlan::new(
        Policy::AgeAware,
        graph.spec,
        nodes[..nodes.len() - 1].to_vec(),
        blocks,
    );
    // Keep the DP's summation order so the total matches path enumeration bit for bit.
    plan.total_energy = dist[n];
    Ok(plan)
}

/// Age-aware plan for the given cache and parameters.
pub fn plan_age_aware(cache: &IntervalCache, spec: &PlanSpec) -> Result<SamplingPlan> {
    shortest_path(&build_graph_cached(cache, spec)?)
}
