//! End-to-end runs of the `mpcomm` binary.

use std::path::Path;
use std::process::{Command, Output};

fn mpcomm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpcomm"))
        .args(args)
        .env_remove("MPCOMM_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mpcomm(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    mpcomm(args).status.code().unwrap()
}

fn desk(dir: &Path, seed: &str) -> String {
    ok(&[
        "generate",
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        seed,
        "--preset",
        "desk",
    ]);
    dir.join("scenario.toml").to_str().unwrap().to_string()
}

fn field(line: &str, key: &str) -> String {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {line}"))
        .to_string()
}

#[test]
fn generate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    desk(a.path(), "1");
    desk(b.path(), "1");
    for f in ["scenario.toml", "profile.bin"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(code(&["generate", "--out", missing.to_str().unwrap()]), 4);
    let sc = desk(dir.path(), "3");
    assert_eq!(
        code(&["plan", "--scenario", &sc, "--epsilon-theta", "0"]),
        2
    );
    assert_eq!(
        code(&["plan", "--scenario", &sc, "--epsilon-theta", "9"]),
        2
    );
    assert_eq!(code(&["simulate", "--scenario", &sc, "--replicas", "0"]), 2);
    assert_eq!(
        code(&[
            "plan",
            "--scenario",
            &sc,
            "--epsilon-theta",
            "1",
            "--margin",
            "0.5"
        ]),
        2
    );
    assert_eq!(code(&["select", "--scenario", &sc, "--budget", "0.5"]), 3);
    assert_eq!(
        code(&[
            "plan",
            "--scenario",
            "/nonexistent.toml",
            "--epsilon-theta",
            "1"
        ]),
        4
    );

    let text = std::fs::read_to_string(&sc).unwrap();
    let starved: String = text
        .lines()
        .map(|l| {
            if l.starts_with("power_budget_mw") {
                "power_budget_mw = 1e-12".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let starved_path = dir.path().join("starved.toml");
    std::fs::write(&starved_path, starved).unwrap();
    assert_eq!(
        code(&[
            "plan",
            "--scenario",
            starved_path.to_str().unwrap(),
            "--epsilon-theta",
            "1"
        ]),
        3
    );
    assert_eq!(
        code(&["frontier", "--scenario", starved_path.to_str().unwrap()]),
        3
    );
}

#[test]
fn frontier_is_reproducible_and_decreasing() {
    let dir = tempfile::tempdir().unwrap();
    let sc = desk(dir.path(), "3");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&[
        "frontier",
        "--scenario",
        &sc,
        "--out",
        a.to_str().unwrap(),
        "--periodic",
    ]);
    ok(&[
        "--jobs",
        "1",
        "frontier",
        "--scenario",
        &sc,
        "--out",
        b.to_str().unwrap(),
        "--periodic",
    ]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("epsilon_theta,energy_linear,energy_dbm,num_samples"));
    let rows: Vec<(usize, f64, f64)> = lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (
                c[0].parse().unwrap(),
                c[1].parse().unwrap(),
                c[4].parse().unwrap(),
            )
        })
        .collect();
    assert!(!rows.is_empty());
    for w in rows.windows(2) {
        assert!(w[0].0 < w[1].0 && w[1].1 < w[0].1);
    }
    for (_, aware, periodic) in rows {
        assert!(aware <= periodic * (1.0 + 1e-9));
    }
}

#[test]
fn plan_matches_library_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let sc = desk(dir.path(), "3");
    let plan_path = dir.path().join("plan.json");
    let graph_path = dir.path().join("graph.csv");
    let out = ok(&[
        "plan",
        "--scenario",
        &sc,
        "--epsilon-theta",
        "2",
        "--out",
        plan_path.to_str().unwrap(),
        "--graph",
        graph_path.to_str().unwrap(),
    ]);
    let first = out.lines().next().unwrap();

    let scenario = mpcomm::scenario::load_scenario(&std::fs::read_to_string(&sc).unwrap()).unwrap();
    let profile = mpcomm::channel::build_profile(&scenario, scenario.master_seed).unwrap();
    let lib = mpcomm::timing::build_graph(&scenario, &profile, 2).unwrap();
    let plan = mpcomm::timing::shortest_path(&lib).unwrap();
    assert_eq!(
        field(first, "energy"),
        mpcomm::format::sig9(plan.total_energy)
    );
    assert_eq!(
        std::fs::read_to_string(&graph_path).unwrap(),
        mpcomm::format::graph_csv(&lib)
    );

    let sim = ok(&[
        "simulate",
        "--scenario",
        &sc,
        "--plan",
        plan_path.to_str().unwrap(),
        "--replicas",
        "200",
    ]);
    assert_eq!(field(&sim, "energy"), field(first, "energy"));
    assert_eq!(field(&sim, "expected_aoi_met"), "true");
    assert!(field(&sim, "worst_rb_load").parse::<usize>().unwrap() <= 2);
}

#[test]
fn seed_override_changes_the_profile() {
    let dir = tempfile::tempdir().unwrap();
    let sc = desk(dir.path(), "3");
    let a = ok(&["plan", "--scenario", &sc, "--epsilon-theta", "3"]);
    let b = ok(&[
        "plan",
        "--scenario",
        &sc,
        "--epsilon-theta",
        "3",
        "--seed",
        "4",
    ]);
    let c = Command::new(env!("CARGO_BIN_EXE_mpcomm"))
        .args(["plan", "--scenario", &sc, "--epsilon-theta", "3"])
        .env("MPCOMM_SEED", "4")
        .output()
        .unwrap();
    assert_ne!(a, b);
    assert_eq!(String::from_utf8(c.stdout).unwrap(), b);
}

#[test]
fn simulate_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let sc = desk(dir.path(), "5");
    let trace = dir.path().join("trace.csv");
    let out = ok(&[
        "simulate",
        "--scenario",
        &sc,
        "--policy",
        "periodic",
        "--replicas",
        "3",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(field(&out, "policy"), "periodic");
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "replica,t,age,success,cum_payload"
    );
    assert_eq!(text.lines().count(), 1 + 3 * 8);
    assert_eq!(
        code(&[
            "simulate",
            "--scenario",
            &sc,
            "--policy",
            "bogus",
            "--replicas",
            "3"
        ]),
        2
    );
}
