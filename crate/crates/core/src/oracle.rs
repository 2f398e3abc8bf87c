//! Brute-force references for validating the solvers.
//!
//! Nothing here calls into the matching, inner or timing solvers; the only
//! shared arithmetic is [`water_fill`]. Every entry point checks an
//! [`OracleBudget`] first because the enumerations blow up exponentially.

use rand_distr::{Distribution, Gamma};

use crate::channel::{stream_rng, ChannelProfile};
use crate::error::{Error, Result};
use crate::inner::{water_fill, IntervalSpec};
use crate::matching::{AssignmentProblem, BinaryAssignment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleBudget {
    pub max_n: usize,
    pub max_k: usize,
    pub max_t: usize,
    pub max_tau: usize,
    pub grid_points: usize,
    pub mc_samples: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_n: 3,
            max_k: 4,
            max_t: 12,
            max_tau: 4,
            grid_points: 10_000,
            mc_samples: 1_000_000,
        }
    }
}

impl OracleBudget {
    fn check(&self, what: &str, value: usize, cap: usize) -> Result<()> {
        if value > cap {
            Err(Error::OracleBudget(format!(
                "{what} = {value} exceeds cap {cap}"
            )))
        } else {
            Ok(())
        }
    }

    fn check_dims(&self, n: usize, k: usize) -> Result<()> {
        self.check("N", n, self.max_n)?;
        self.check("K", k, self.max_k)
    }
}

/// Every RB-to-BS map (`None` = unused) respecting the BS capacity.
fn feasible_assignments(n_bs: usize, n_rb: usize, cap: usize) -> Vec<Vec<Option<usize>>> {
    fn rec(
        k: usize,
        n_bs: usize,
        n_rb: usize,
        cap: usize,
        load: &mut Vec<usize>,
        cur: &mut Vec<Option<usize>>,
        out: &mut Vec<Vec<Option<usize>>>,
    ) {
        if k == n_rb {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        rec(k + 1, n_bs, n_rb, cap, load, cur, out);
        cur.pop();
        for n in 0..n_bs {
            if load[n] < cap {
                load[n] += 1;
                cur.push(Some(n));
                rec(k + 1, n_bs, n_rb, cap, load, cur, out);
                cur.pop();
                load[n] -= 1;
            }
        }
    }
    let mut out = Vec::new();
    rec(
        0,
        n_bs,
        n_rb,
        cap,
        &mut vec![0; n_bs],
        &mut Vec::new(),
        &mut out,
    );
    out
}

fn best_of(all: &[Vec<Option<usize>>], n_rb: usize, weights: &[f64]) -> (usize, f64) {
    let mut best = (0, 0.0);
    for (i, a) in all.iter().enumerate() {
        let v: f64 = a
            .iter()
            .enumerate()
            .filter_map(|(k, o)| o.map(|n| weights[n * n_rb + k]))
            .sum();
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// Exact optimum by enumerating every capacity-feasible binary matrix.
pub fn oracle_matching(
    problem: &AssignmentProblem,
    budget: &OracleBudget,
) -> Result<BinaryAssignment> {
    budget.check_dims(problem.num_bs, problem.num_rb)?;
    let all = feasible_assignments(problem.num_bs, problem.num_rb, problem.bs_capacity);
    let (i, v) = best_of(&all, problem.num_rb, &problem.weights);
    Ok(BinaryAssignment {
        num_bs: problem.num_bs,
        owner: all[i].clone(),
        total_weight: v,
    })
}

/// Optimal value of the LP relaxation (`0 <= a`, both capacity families),
/// by a dense primal simplex with Bland's rule.
pub fn lp_relaxation_value(problem: &AssignmentProblem) -> f64 {
    let (n, k) = (problem.num_bs, problem.num_rb);
    let vars = n * k;
    let rows = n + k;
    let cols = vars + rows;
    // Tableau rows: constraints then objective (maximize -w.x).
    let mut tab = vec![vec![0.0; cols + 1]; rows + 1];
    for b in 0..n {
        for r in 0..k {
            tab[b][b * k + r] = 1.0;
            tab[n + r][b * k + r] = 1.0;
        }
    }
    for (i, row) in tab.iter_mut().enumerate().take(rows) {
        row[vars + i] = 1.0;
        row[cols] = if i < n {
            problem.bs_capacity as f64
        } else {
            1.0
        };
    }
    for j in 0..vars {
        tab[rows][j] = problem.weights[j];
    }
    let mut basis: Vec<usize> = (vars..cols).collect();
    const EPS: f64 = 1e-12;
    loop {
        let Some(pc) = (0..cols).find(|&j| tab[rows][j] < -EPS) else {
            break;
        };
        let mut pr: Option<usize> = None;
        for i in 0..rows {
            if tab[i][pc] > EPS {
                let ratio = tab[i][cols] / tab[i][pc];
                let better = match pr {
                    None => true,
                    Some(p) => {
                        let cur = tab[p][cols] / tab[p][pc];
                        ratio < cur - EPS || (ratio <= cur + EPS && basis[i] < basis[p])
                    }
                };
                if better {
                    pr = Some(i);
                }
            }
        }
        let pr = pr.expect("bounded LP");
        let piv = tab[pr][pc];
        for v in tab[pr].iter_mut() {
            *v /= piv;
        }
        let prow = tab[pr].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != pr && row[pc].abs() > 0.0 {
                let f = row[pc];
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
            }
        }
        basis[pr] = pc;
    }
    // Objective row holds min w.x as minus its last entry.
    -tab[rows][cols]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleInner {
    Energy(f64),
    Infeasible { phi_max: f64 },
}

impl OracleInner {
    pub fn energy(self) -> Option<f64> {
        match self {
            OracleInner::Energy(e) => Some(e),
            OracleInner::Infeasible { .. } => None,
        }
    }
}

struct OracleSlot {
    floors: Vec<f64>,
    cap_level: f64,
    cap_power: f64,
    cap_rate: f64,
}

fn slot_eval(
    all: &[Vec<Option<usize>>],
    n_rb: usize,
    floors: &[f64],
    level: f64,
    w: &mut [f64],
) -> (f64, f64) {
    for (x, &i) in w.iter_mut().zip(floors) {
        let (p, r) = water_fill(level, i);
        *x = p - std::f64::consts::LN_2 * level * r;
    }
    let (best, _) = best_of(all, n_rb, w);
    all[best]
        .iter()
        .enumerate()
        .filter_map(|(k, o)| o.map(|n| floors[n * n_rb + k]))
        .fold((0.0, 0.0), |(p, r), i| {
            let (dp, dr) = water_fill(level, i);
            (p + dp, r + dr)
        })
}

/// Grid search over the global water level with exhaustive matching per point.
pub fn oracle_inner(
    spec: &IntervalSpec,
    profile: &ChannelProfile,
    budget: &OracleBudget,
) -> Result<OracleInner> {
    budget.check_dims(profile.num_bs, profile.num_rb)?;
    budget.check("interval length", spec.len(), budget.max_tau)?;
    if spec.rate_target <= 0.0 {
        return Ok(OracleInner::Energy(0.0));
    }
    let (n_bs, n_rb) = (profile.num_bs, profile.num_rb);
    let all = feasible_assignments(n_bs, n_rb, spec.rb_cap);
    let mut w = vec![0.0; n_bs * n_rb];
    let pbar = spec.power_cap;

    let slots: Vec<OracleSlot> = (spec.start - 1..spec.end - 1)
        .map(|t| {
            let floors: Vec<f64> = (0..n_bs)
                .flat_map(|n| (0..n_rb).map(move |k| (n, k)))
                .map(|(n, k)| profile.iota(n, k, t))
                .collect();
            let base = floors.iter().copied().fold(f64::INFINITY, f64::min);
            let (mut lo, mut hi) = (base, base + pbar);
            while slot_eval(&all, n_rb, &floors, hi, &mut w).0 < pbar {
                lo = hi;
                hi = base + 2.0 * (hi - base);
            }
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if slot_eval(&all, n_rb, &floors, mid, &mut w).0 >= pbar {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            // Blend the two sides so power is exactly the budget.
            let (p_lo, r_lo) = slot_eval(&all, n_rb, &floors, lo, &mut w);
            let (p_hi, r_hi) = slot_eval(&all, n_rb, &floors, hi, &mut w);
            let f = if p_hi > p_lo {
                ((pbar - p_lo) / (p_hi - p_lo)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            OracleSlot {
                floors,
                cap_level: hi,
                cap_power: p_lo + f * (p_hi - p_lo),
                cap_rate: r_lo + f * (r_hi - r_lo),
            }
        })
        .collect();

    let lo = slots
        .iter()
        .flat_map(|s| s.floors.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let hi = slots.iter().map(|s| s.cap_level).fold(0.0, f64::max);
    let mut eval = |level: f64| -> (f64, f64) {
        slots.iter().fold((0.0, 0.0), |(e, r), s| {
            let (de, dr) = if level >= s.cap_level {
                (s.cap_power, s.cap_rate)
            } else {
                slot_eval(&all, n_rb, &s.floors, level, &mut w)
            };
            (e + de, r + dr)
        })
    };
    let g = budget.grid_points.max(2);
    let ratio = (hi / lo).ln();
    let mut prev = eval(lo);
    for i in 1..g {
        let level = if i == g - 1 {
            hi
        } else {
            lo * (ratio * i as f64 / (g - 1) as f64).exp()
        };
        let cur = eval(level);
        if cur.1 >= spec.rate_target {
            let frac = if cur.1 > prev.1 {
                (spec.rate_target - prev.1) / (cur.1 - prev.1)
            } else {
                1.0
            };
            return Ok(OracleInner::Energy(
                prev.0 + frac.clamp(0.0, 1.0) * (cur.0 - prev.0),
            ));
        }
        prev = cur;
    }
    Ok(OracleInner::Infeasible { phi_max: prev.1 })
}

/// Minimum-energy sampling sequence by depth-first enumeration of all
/// sequences `1 = t_0 < t_1 < ... < T + 1` with gaps in `[1, tau]`.
/// `weight(i, j)` is `None` for an infeasible interval. Path sums accumulate
/// in path order. Returns `(nodes, energy, sequences_enumerated)`.
pub fn oracle_plan_with<F>(
    horizon: usize,
    tau: usize,
    mut weight: F,
) -> Option<(Vec<usize>, f64, u64)>
where
    F: FnMut(usize, usize) -> Option<f64>,
{
    let target = horizon + 1;
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut count = 0u64;
    let mut stack: Vec<(Vec<usize>, f64)> = vec![(vec![1], 0.0)];
    while let Some((path, cost)) = stack.pop() {
        let last = *path.last().unwrap();
        if last == target {
            count += 1;
            if best.as_ref().map_or(true, |b| cost < b.1) {
                best = Some((path, cost));
            }
            continue;
        }
        for step in (1..=tau).rev() {
            let next = last + step;
            if next > target {
                continue;
            }
            if let Some(w) = weight(last, next) {
                let mut p = path.clone();
                p.push(next);
                stack.push((p, cost + w));
            }
        }
    }
    best.map(|(p, c)| (p, c, count))
}

/// Exhaustive plan using [`oracle_inner`] interval energies.
pub fn oracle_plan(
    horizon: usize,
    tau: usize,
    profile: &ChannelProfile,
    rb_cap: usize,
    rate_target: f64,
    power_cap: f64,
    budget: &OracleBudget,
) -> Result<(Vec<usize>, f64)> {
    budget.check("T", horizon, budget.max_t)?;
    budget.check("tau", tau, budget.max_tau)?;
    let mut cache = std::collections::HashMap::new();
    let mut err = None;
    let res = oracle_plan_with(horizon, tau, |i, j| {
        *cache.entry((i, j)).or_insert_with(|| {
            let spec = IntervalSpec {
                start: i,
                end: j,
                rb_cap,
                rate_target,
                power_cap,
            };
            match oracle_inner(&spec, profile, budget) {
                Ok(o) => o.energy(),
                Err(e) => {
                    err = Some(e);
                    None
                }
            }
        })
    });
    if let Some(e) = err {
        return Err(e);
    }
    res.map(|(p, c, _)| (p[..p.len() - 1].to_vec(), c))
        .ok_or_else(|| Error::NoFeasiblePlan("no feasible sampling sequence".into()))
}

/// Monte Carlo mean of `log2(1 + snr * xi)` with `xi ~ Gamma(kappa, 1/kappa)`,
/// returned as `(mean, standard error)`.
pub fn mc_expected_capacity(
    kappa: f64,
    snr_bar: f64,
    samples: usize,
    seed: u64,
    budget: &OracleBudget,
) -> Result<(f64, f64)> {
    budget.check("samples", samples, budget.mc_samples)?;
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    if snr_bar == 0.0 {
        return Ok((0.0, 0.0));
    }
    let gamma = Gamma::new(kappa, 1.0 / kappa).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = stream_rng(seed, 0);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let x = (snr_bar * gamma.sample(&mut rng)).ln_1p() / std::f64::consts::LN_2;
        s += x;
        s2 += x * x;
    }
    let m = s / samples as f64;
    let var = (s2 / samples as f64 - m * m).max(0.0);
    Ok((m, (var / samples as f64).sqrt()))
}
