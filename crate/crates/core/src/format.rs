//! Number formatting and CSV exports.
//!
//! CSV files are comma separated with a header row and LF line endings.
//! Floats are printed with 9 significant digits in `%g` style.

use std::fmt::Write;

use crate::pareto::ParetoFrontier;
use crate::scenario::mw_to_dbm;
use crate::sim::AoiTrace;
use crate::timing::TimingGraph;

/// `%.9g`-style formatting.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!(
            "{}e{sign}{:02}",
            trim_zeros(mantissa.to_string()),
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Total energy as average power per slot in dBm.
pub fn energy_dbm(energy: f64, horizon: usize) -> f64 {
    mw_to_dbm(energy / horizon as f64)
}

/// Frontier rows; `periodic` optionally gives the periodic-policy energy
/// at each point's cap (`None` = infeasible).
pub fn frontier_csv(
    frontier: &ParetoFrontier,
    horizon: usize,
    periodic: Option<&[Option<f64>]>,
) -> String {
    let mut out = String::from("epsilon_theta,energy_linear,energy_dbm,num_samples");
    if periodic.is_some() {
        out.push_str(",periodic_energy_linear,periodic_energy_dbm");
    }
    out.push_str(",instants\n");
    for (i, p) in frontier.points.iter().enumerate() {
        write!(
            out,
            "{},{},{},{}",
            p.epsilon_theta,
            sig9(p.energy),
            sig9(energy_dbm(p.energy, horizon)),
            p.plan.num_samples()
        )
        .unwrap();
        if let Some(per) = periodic {
            match per[i] {
                Some(e) => write!(out, ",{},{}", sig9(e), sig9(energy_dbm(e, horizon))).unwrap(),
                None => out.push_str(",INF,INF"),
            }
        }
        let inst: Vec<String> = p.plan.instants.iter().map(|t| t.to_string()).collect();
        writeln!(out, ",{}", inst.join(";")).unwrap();
    }
    out
}

pub fn graph_csv(graph: &TimingGraph) -> String {
    let mut out = String::from("i,j,weight\n");
    for e in &graph.edges {
        let w = e.weight().map(sig9).unwrap_or_else(|| "INF".into());
        writeln!(out, "{},{},{}", e.from, e.to, w).unwrap();
    }
    out
}

/// One row per replica and slot `1..=T`.
pub fn trace_csv(traces: &[AoiTrace]) -> String {
    let mut out = String::from("replica,t,age,success,cum_payload\n");
    for (r, tr) in traces.iter().enumerate() {
        for t in 0..tr.success.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                r,
                t + 1,
                tr.age[t],
                u8::from(tr.success[t]),
                sig9(tr.cum_payload[t])
            )
            .unwrap();
        }
    }
    out
}
