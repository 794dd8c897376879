use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
schema = "mcb-tsa/config/v1"

[system]
c_ns = 5000.0
budget = 1e8
delta = 1.0
generators = [
  { name = "thermal", c_op = 130.0, c_inv = 500.0, is_vre = false },
  { name = "pv", c_op = 1.0, c_inv = 400.0, is_vre = true },
]
storages = [
  { name = "storage", eta_c = 0.9, eta_d = 0.9, e_max = 200.0, e_min = 0.0, p_c_max = 50.0, p_d_max = 50.0, c_d = 1.5 },
]

[data.synthetic]
horizon = 72
seed = 5
demand_mean = 200.0

[algorithm]
r0 = 12
delta_r = 12
r_max = 72
k = 40
n_top = 4
n_trees = 10
max_depth = 6

[bench]
methods = ["mcb", "kmedoids-input"]
scenarios = 3
perturb_columns = ["F_pv", "D"]
output_dir = "out"
workers = 2
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mcb-tsa"))
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    (dir, cfg)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_value(out: &Output, key: &str) -> f64 {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no {key} line"))
}

#[test]
fn gen_data_then_solve_full() {
    let (dir, cfg) = setup();
    let csv = dir.path().join("data.csv");
    ok(&run(&["gen-data", "-c", s(&cfg), "--horizon", "48", "--seed", "2", "-o", s(&csv)]));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("step,F_thermal,F_pv,D,price\n"));
    assert_eq!(text.lines().count(), 49);

    let json = dir.path().join("full.json");
    let duals = dir.path().join("mu.csv");
    let out = run(&["solve-full", "-c", s(&cfg), "--timeseries", s(&csv), "-o", s(&json), "--duals", s(&duals)]);
    ok(&out);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(summary["horizon"], 48);
    assert_eq!(summary["objective"].as_f64().unwrap(), stdout_value(&out, "objective"));
    assert_eq!(std::fs::read_to_string(&duals).unwrap().lines().count(), 49);
}

#[test]
fn estimate_and_aggregate() {
    let (dir, cfg) = setup();
    let mu = dir.path().join("mu.csv");
    let model = dir.path().join("model.json");
    ok(&run(&["estimate", "-c", s(&cfg), "-o", s(&mu), "--model", s(&model), "--seed", "3"]));
    assert_eq!(std::fs::read_to_string(&mu).unwrap().lines().count(), 73);
    assert!(std::fs::read_to_string(&model).unwrap().contains("mcb-tsa/estimator/v1"));

    let agg = dir.path().join("agg.csv");
    let out = run(&["aggregate", "-c", s(&cfg), "--r", "20", "--method", "input-chc", "-o", s(&agg), "--bounds"]);
    ok(&out);
    assert_eq!(stdout_value(&out, "representatives"), 24.0);
    assert!(stdout_value(&out, "f_LB") <= stdout_value(&out, "f_UB") * (1.0 + 1e-9));
    let text = std::fs::read_to_string(&agg).unwrap();
    assert!(text.starts_with("original_step,representative_id,weight\n"));
    assert_eq!(text.lines().count(), 73);
}

#[test]
fn run_writes_outputs() {
    let (dir, cfg) = setup();
    let out_dir = dir.path().join("run");
    ok(&run(&["run", "-c", s(&cfg), "-o", s(&out_dir), "--method", "input-chc", "--eps-target", "0.5"]));
    let conv = std::fs::read_to_string(out_dir.join("convergence_input-chc.csv")).unwrap();
    let rs: Vec<usize> = conv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(!rs.is_empty() && rs.windows(2).all(|w| w[0] < w[1]));
    assert!(out_dir.join("iterations_input-chc.csv").exists());
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["method"], "input-chc");
}

#[test]
fn bench_is_reproducible() {
    let (dir, cfg) = setup();
    ok(&run(&["bench", "-c", s(&cfg), "--seed", "17"]));
    let report = dir.path().join("out/report.json");
    let first = std::fs::read(&report).unwrap();
    ok(&run(&["bench", "-c", s(&cfg), "--seed", "17", "--workers", "1"]));
    assert_eq!(first, std::fs::read(&report).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
    for name in ["iterations_mcb_2.csv", "iterations_kmedoids-input_0.csv", "convergence_mcb.csv", "timings.csv"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }

    let other = dir.path().join("other");
    ok(&run(&["bench", "-c", s(&cfg), "--seed", "18", "-o", s(&other), "--scenarios", "1", "--methods", "mcb"]));
    assert_ne!(first, std::fs::read(other.join("report.json")).unwrap());
}

#[test]
fn validation_failures_exit_2() {
    let (dir, cfg) = setup();
    assert_eq!(run(&["bench", "-c", s(&cfg)]).status.code(), Some(2), "--seed is mandatory");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, CONFIG.replace("scenarios = 3", "scenarios = 0")).unwrap();
    assert_eq!(run(&["bench", "-c", s(&bad), "--seed", "1"]).status.code(), Some(2));
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "step,F_pv,D\n0,0.5,10\n1,1.5,10\n").unwrap();
    let out = run(&["solve-full", "-c", s(&cfg), "--timeseries", s(&csv)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let out = run(&["run", "-c", s(&cfg), "-o", s(dir.path()), "--method", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}
