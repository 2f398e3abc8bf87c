//! `mpcomm` command-line front end.
//!
//! Exit codes: 0 success, 2 validation, 3 infeasible, 4 I/O, 1 anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpcomm::bench::{bench_inner, DEFAULT_KS};
use mpcomm::channel::{build_profile, ChannelProfile};
use mpcomm::format::{energy_dbm, frontier_csv, graph_csv, sig9, trace_csv};
use mpcomm::oracle::{oracle_plan, OracleBudget};
use mpcomm::pareto::{
    budget_select, compute_frontier_cached, scalarize_select, transform_frontier, weighted_lp,
};
use mpcomm::planfile::PlanFile;
use mpcomm::scenario::{
    default_patrol_scenario, load_scenario, patrol_scenario, save_scenario, PatrolParams, Scenario,
    MAX_SEED,
};
use mpcomm::sim::{baseline_periodic, plan_policy, simulate, SimSettings};
use mpcomm::timing::{build_graph_cached, shortest_path, IntervalCache, PlanSpec, Policy};
use mpcomm::Error;

#[derive(Parser)]
#[command(
    name = "mpcomm",
    version,
    about = "Model-predictive UAV status-update planner"
)]
struct Cli {
    /// Worker threads for interval solves and replicas (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a scenario and its channel profile.
    Generate(GenerateArgs),
    /// Plan sampling instants and allocations for one RB cap.
    Plan(PlanArgs),
    /// Sweep the RB cap and write the load/energy frontier.
    Frontier(FrontierArgs),
    /// Monte Carlo evaluation of a plan file or a named policy.
    Simulate(SimulateArgs),
    /// Map the frontier through monotone transforms.
    Transform(TransformArgs),
    /// Pick a frontier point by weighted L_p utility or by load budget.
    Select(SelectArgs),
    /// Time the interval solver against the number of RBs.
    Bench(BenchArgs),
    /// Cross-check the planner against exhaustive enumeration.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Channel profile dump; built from the scenario and seed when absent.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Profile seed; falls back to MPCOMM_SEED, then the scenario's master seed.
    #[arg(long, env = "MPCOMM_SEED", value_parser = seed_parser())]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Default patrol deployment (3 GHz UMi, 50 m circle, 6 m/s).
    Table1,
    /// Small instance sized for exhaustive checks.
    Desk,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory (must exist).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "MPCOMM_SEED", default_value_t = 1, value_parser = seed_parser())]
    seed: u64,
    #[arg(long, value_enum, default_value = "table1")]
    preset: Preset,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    epsilon_theta: usize,
    /// Multiplier on the payload threshold for planning.
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    /// Plan file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Timing-graph CSV to write.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Also solve by exhaustive enumeration and report the difference.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct FrontierArgs {
    #[command(flatten)]
    common: Common,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add periodic-policy energies at each cap.
    #[arg(long)]
    periodic: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Plan file to evaluate; otherwise `--policy` is planned on the fly.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, default_value = "age-aware")]
    policy: String,
    #[arg(long)]
    epsilon_theta: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    /// Trace CSV output.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapName {
    Identity,
    Square,
    Sqrt,
    Log1p,
    Exp,
    /// Energy as average power per slot in dBm.
    Dbm,
}

#[derive(Args)]
struct TransformArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "identity")]
    g1: MapName,
    #[arg(long, value_enum, default_value = "identity")]
    g2: MapName,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    common: Common,
    /// Weighted L_p utility as `alpha,p,theta_target,energy_target`.
    #[arg(long, conflicts_with = "budget")]
    lp: Option<String>,
    /// Largest admissible g1(theta).
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, value_enum, default_value = "identity")]
    g1: MapName,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated RB counts.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS)]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    num_bs: usize,
    #[arg(long, default_value_t = 5)]
    interval_len: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, env = "MPCOMM_SEED", default_value_t = 1, value_parser = seed_parser())]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    epsilon_theta: usize,
}

fn seed_parser() -> clap::builder::RangedU64ValueParser {
    clap::value_parser!(u64).range(0..=MAX_SEED)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .expect("thread pool");
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::MissingKey(_)
        | Error::Invalid(_)
        | Error::Domain(_)
        | Error::OracleBudget(_)
        | Error::PlanFile(_) => 2,
        Error::NoFeasiblePlan(_) | Error::BudgetInfeasible(_) => 3,
        Error::Io(_) => 4,
        _ => 1,
    }
}

fn invalid(field: &str, msg: &str) -> Error {
    Error::Invalid(vec![mpcomm::error::Violation {
        field: field.into(),
        message: msg.into(),
    }])
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

struct Loaded {
    scenario: Scenario,
    profile: ChannelProfile,
    seed: u64,
}

fn load(c: &Common) -> Result<Loaded, Error> {
    let mut scenario = load_scenario(&read(&c.scenario)?)?;
    if let Some(s) = c.seed {
        scenario.master_seed = s;
    }
    let seed = scenario.master_seed;
    let profile = match &c.profile {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", p.display()),
                ))
            })?;
            ChannelProfile::read_from(std::io::BufReader::new(f))?
        }
        None => build_profile(&scenario, seed)?,
    };
    if (profile.num_bs, profile.num_rb, profile.horizon)
        != (scenario.num_bs, scenario.num_rb, scenario.horizon)
    {
        return Err(invalid("profile", "dimensions disagree with the scenario"));
    }
    Ok(Loaded {
        scenario,
        profile,
        seed,
    })
}

fn check_cap(eps: usize, s: &Scenario) -> Result<(), Error> {
    if eps == 0 || eps > s.num_rb {
        return Err(invalid(
            "epsilon_theta",
            &format!("must lie in [1, {}]", s.num_rb),
        ));
    }
    Ok(())
}

fn check_margin(m: f64) -> Result<(), Error> {
    if !(m >= 1.0 && m.is_finite()) {
        return Err(invalid("margin", "must be a finite value >= 1"));
    }
    Ok(())
}

fn map_fn(m: MapName, horizon: usize) -> impl Fn(f64) -> f64 {
    move |x: f64| match m {
        MapName::Identity => x,
        MapName::Square => x * x,
        MapName::Sqrt => x.sqrt(),
        MapName::Log1p => x.ln_1p(),
        MapName::Exp => x.exp(),
        MapName::Dbm => energy_dbm(x, horizon),
    }
}

fn run(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Plan(a) => cmd_plan(a),
        Cmd::Frontier(a) => cmd_frontier(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Transform(a) => cmd_transform(a),
        Cmd::Select(a) => cmd_select(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Oracle(a) => cmd_oracle(a),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<(), Error> {
    if !a.out.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", a.out.display()),
        )));
    }
    let scenario = match a.preset {
        Preset::Table1 => default_patrol_scenario(a.seed),
        Preset::Desk => patrol_scenario(&PatrolParams::desk(2, 3, 8, 3), a.seed),
    };
    let profile = build_profile(&scenario, a.seed)?;
    write(&a.out.join("scenario.toml"), &save_scenario(&scenario))?;
    let mut buf = Vec::new();
    profile.write_to(&mut buf)?;
    fs::write(a.out.join("profile.bin"), buf)?;
    println!(
        "wrote {} and {}",
        a.out.join("scenario.toml").display(),
        a.out.join("profile.bin").display()
    );
    Ok(())
}

fn cmd_plan(a: PlanArgs) -> Result<(), Error> {
    let l = load(&a.common)?;
    check_cap(a.epsilon_theta, &l.scenario)?;
    check_margin(a.margin)?;
    let cache = IntervalCache::new(&l.profile);
    let spec = PlanSpec::from_scenario(&l.scenario, a.epsilon_theta).with_margin(a.margin);
    let graph = build_graph_cached(&cache, &spec)?;
    if let Some(p) = &a.graph {
        write(p, &graph_csv(&graph))?;
    }
    let plan = shortest_path(&graph)?;
    let t = l.scenario.horizon;
    println!(
        "epsilon_theta={} energy={} energy_dbm={} binary_energy={} samples={} max_rb_load={}",
        a.epsilon_theta,
        sig9(plan.total_energy),
        sig9(energy_dbm(plan.total_energy, t)),
        sig9(plan.binary_energy),
        plan.num_samples(),
        plan.max_load(l.scenario.num_bs),
    );
    let inst: Vec<String> = plan.instants.iter().map(|x| x.to_string()).collect();
    println!("instants={}", inst.join(";"));
    if a.oracle {
        let (o_inst, o_energy) = oracle_plan(
            t,
            l.scenario.aoi_bound,
            &l.profile,
            a.epsilon_theta,
            spec.rate_target,
            spec.power_cap,
            &OracleBudget::default(),
        )?;
        let rel = (plan.total_energy - o_energy).abs() / o_energy.abs().max(f64::MIN_POSITIVE);
        let inst: Vec<String> = o_inst.iter().map(|x| x.to_string()).collect();
        println!(
            "oracle_energy={} oracle_instants={} rel_diff={}",
            sig9(o_energy),
            inst.join(";"),
            sig9(rel)
        );
    }
    if let Some(p) = &a.out {
        write(
            p,
            &PlanFile::new(&l.scenario, l.seed, a.margin, plan).to_json(),
        )?;
    }
    Ok(())
}

fn cmd_frontier(a: FrontierArgs) -> Result<(), Error> {
    let l = load(&a.common)?;
    let cache = IntervalCache::new(&l.profile);
    let base = PlanSpec::from_scenario(&l.scenario, l.scenario.num_rb);
    let f = compute_frontier_cached(&cache, &base, l.scenario.num_rb)?;
    let periodic = if a.periodic {
        Some(
            f.points
                .iter()
                .map(|p| {
                    let plan = baseline_periodic(&cache, &base.with_rb_cap(p.epsilon_theta))?;
                    Ok(plan.is_feasible().then_some(plan.total_energy))
                })
                .collect::<Result<Vec<_>, Error>>()?,
        )
    } else {
        None
    };
    let csv = frontier_csv(&f, l.scenario.horizon, periodic.as_deref());
    match &a.out {
        Some(p) => write(p, &csv)?,
        None => print!("{csv}"),
    }
    eprintln!(
        "theta_lo={} theta_hi={} points={}",
        f.theta_lo,
        f.theta_hi,
        f.len()
    );
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Error> {
    if a.replicas == 0 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    check_margin(a.margin)?;
    let l = load(&a.common)?;
    let plan = match &a.plan {
        Some(p) => PlanFile::from_json(&read(p)?, &l.scenario, &l.profile)?.plan,
        None => {
            let policy: Policy = a.policy.parse()?;
            let eps = a.epsilon_theta.unwrap_or(l.scenario.num_rb);
            check_cap(eps, &l.scenario)?;
            let cache = IntervalCache::new(&l.profile);
            let spec = PlanSpec::from_scenario(&l.scenario, eps).with_margin(a.margin);
            plan_policy(&cache, &spec, policy)?
        }
    };
    let settings = SimSettings {
        payload_threshold: l.scenario.payload_threshold,
        aoi_bound: l.scenario.aoi_bound,
        keep_traces: a.trace.is_some(),
    };
    let report = simulate(&plan, &l.profile, &settings, a.replicas, l.seed);
    if let Some(p) = &a.trace {
        write(p, &trace_csv(&report.traces))?;
    }
    println!(
        "policy={} feasible={} replicas={} success_rate={} interval_success_rate={} expected_peak_age={} \
         expected_aoi_met={} mean_peak_age={} energy={} energy_dbm={} binary_energy={} worst_rb_load={}",
        report.policy,
        plan.is_feasible(),
        report.replicas,
        sig9(report.success_rate),
        sig9(report.interval_success_rate),
        report.expected_peak_age,
        report.expected_aoi_met,
        sig9(report.mean_peak_age),
        sig9(report.energy),
        sig9(energy_dbm(report.energy, l.scenario.horizon)),
        sig9(report.binary_energy),
        report.worst_rb_load,
    );
    Ok(())
}

fn frontier_of(l: &Loaded) -> Result<mpcomm::pareto::ParetoFrontier, Error> {
    let cache = IntervalCache::new(&l.profile);
    let base = PlanSpec::from_scenario(&l.scenario, l.scenario.num_rb);
    compute_frontier_cached(&cache, &base, l.scenario.num_rb)
}

fn cmd_transform(a: TransformArgs) -> Result<(), Error> {
    let l = load(&a.common)?;
    let f = frontier_of(&l)?;
    let t = l.scenario.horizon;
    let pts = transform_frontier(&f, map_fn(a.g1, t), map_fn(a.g2, t))?;
    println!("g1_theta,g2_energy");
    for (x, y) in pts {
        println!("{},{}", sig9(x), sig9(y));
    }
    Ok(())
}

fn cmd_select(a: SelectArgs) -> Result<(), Error> {
    let l = load(&a.common)?;
    let f = frontier_of(&l)?;
    let point = match (&a.lp, a.budget) {
        (Some(spec), _) => {
            let v: Vec<f64> = spec
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| invalid("lp", "expected four comma-separated numbers"))?;
            if v.len() != 4 || !(0.0..=1.0).contains(&v[0]) || v[1] < 1.0 {
                return Err(invalid(
                    "lp",
                    "expected alpha in [0, 1], p >= 1, theta target, energy target",
                ));
            }
            scalarize_select(&f, weighted_lp(v[0], v[1], v[2], v[3]))?
        }
        (None, Some(b)) => budget_select(&f, map_fn(a.g1, l.scenario.horizon), b)?,
        (None, None) => return Err(invalid("select", "one of --lp or --budget is required")),
    };
    let inst: Vec<String> = point.plan.instants.iter().map(|x| x.to_string()).collect();
    println!(
        "epsilon_theta={} energy={} energy_dbm={} instants={}",
        point.epsilon_theta,
        sig9(point.energy),
        sig9(energy_dbm(point.energy, l.scenario.horizon)),
        inst.join(";")
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), Error> {
    if a.ks.len() < 2 || a.ks.contains(&0) {
        return Err(invalid("ks", "need at least two positive RB counts"));
    }
    let r = bench_inner(&a.ks, a.num_bs, a.interval_len, a.repeats, a.seed)?;
    println!("num_rb,seconds");
    for row in &r.rows {
        println!("{},{}", row.num_rb, sig9(row.seconds));
    }
    println!("slope={}", sig9(r.slope));
    if r.slope > 2.0 {
        eprintln!("warning: slope {} exceeds 2", sig9(r.slope));
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), Error> {
    let l = load(&a.common)?;
    check_cap(a.epsilon_theta, &l.scenario)?;
    let spec = PlanSpec::from_scenario(&l.scenario, a.epsilon_theta);
    let budget = OracleBudget::default();
    let (o_inst, o_energy) = oracle_plan(
        spec.horizon,
        spec.aoi_bound,
        &l.profile,
        spec.rb_cap,
        spec.rate_target,
        spec.power_cap,
        &budget,
    )?;
    let cache = IntervalCache::new(&l.profile);
    let plan = shortest_path(&build_graph_cached(&cache, &spec)?)?;
    let rel = (plan.total_energy - o_energy).abs() / o_energy.abs().max(f64::MIN_POSITIVE);
    let fmt = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(";")
    };
    println!(
        "planner_energy={} planner_instants={}",
        sig9(plan.total_energy),
        fmt(&plan.instants)
    );
    println!(
        "oracle_energy={} oracle_instants={}",
        sig9(o_energy),
        fmt(&o_inst)
    );
    println!("rel_diff={}", sig9(rel));
    Ok(())
}
