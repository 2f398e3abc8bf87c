//! Runtime scaling of the interval solver in the number of RBs.

use std::time::Instant;

use serde::Serialize;

use crate::channel::build_profile;
use crate::error::Result;
use crate::inner::{solve_interval, solve_slot_cap, IntervalSpec, Tolerances};
use crate::scenario::{patrol_scenario, PatrolParams};

pub const DEFAULT_KS: [usize; 5] = [10, 20, 40, 80, 160];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub num_rb: usize,
    /// Median wall time of one interval solve, seconds.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub num_bs: usize,
    pub interval_len: usize,
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `ln(seconds)` against `ln(K)`.
    pub slope: f64,
}

/// Least-squares slope of `y` against `x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Time `solve_interval` on patrol instances with `N = num_bs`, an interval
/// of `interval_len` slots, RB cap `K / 2` and a target at half the maximum
/// achievable rate.
pub fn bench_inner(
    ks: &[usize],
    num_bs: usize,
    interval_len: usize,
    repeats: usize,
    seed: u64,
) -> Result<BenchReport> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let params = PatrolParams::desk(num_bs, k, interval_len, interval_len);
        let scenario = patrol_scenario(&params, seed);
        let profile = build_profile(&scenario, seed)?;
        let rb_cap = (k / 2).max(1);
        let tol = Tolerances::default();
        let phi_max: f64 = (0..interval_len)
            .map(|t| solve_slot_cap(&profile, t, rb_cap, scenario.power_budget_mw, &tol).rate())
            .sum();
        let spec = IntervalSpec {
            start: 1,
            end: interval_len + 1,
            rb_cap,
            rate_target: 0.5 * phi_max,
            power_cap: scenario.power_budget_mw,
        };
        let mut times: Vec<f64> = (0..repeats.max(1))
            .map(|_| {
                let t0 = Instant::now();
                let out = solve_interval(&spec, &profile);
                let dt = t0.elapsed().as_secs_f64();
                std::hint::black_box(out).map(|_| dt)
            })
            .collect::<Result<_>>()?;
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            num_rb: k,
            seconds: times[times.len() / 2],
        });
    }
    let slope = loglog_slope(
        &rows
            .iter()
            .map(|r| (r.num_rb as f64, r.seconds))
            .collect::<Vec<_>>(),
    );
    Ok(BenchReport {
        num_bs,
        interval_len,
        rows,
        slope,
    })
}
