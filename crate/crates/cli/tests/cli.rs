use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_switchcost"));
    c.env_remove("SWITCHCOST_SEED").env_remove("SWITCHCOST_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const CONTRACTS: &str = "\
id,effective_date,revis,p1,p2,p3,p4,p5,r_i,F_i,h_i,m,r1,r2,c_v,c_d,vremot,dremot,iremot
A-1,1991-03-01,0,0.08,0.11,0.13,0.10,0.12,250000,30000,4,12,2.5,1.5,8000,4000,0.2,0.6,0
A-2,1993-06-01,1,0.09,0.12,0.14,0.11,0.13,100000,10000,3,6,1.25,0,5000,2000,0.1,0.5,0.01
";

#[test]
fn solve_reports_equilibrium() {
    let o = run(&["solve", "--delta-c", "0.5", "--delta-f", "0.5", "--rho", "0.2", "--mu", "0.5", "--s", "0.3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    for key in ["d", "e", "theta", "markup"] {
        assert!(v[key].is_f64(), "{key}");
    }
    assert!(v["theta"].as_f64().unwrap().abs() <= 1.0);
    let (d, e) = (v["d"].as_f64().unwrap(), v["e"].as_f64().unwrap());
    assert!((v["markup"].as_f64().unwrap() - (d + e / 2.0)).abs() < 1e-12);
}

#[test]
fn solve_reads_a_parameter_file_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let p = path(dir.path(), "point.json");
    fs::write(&p, r#"{"delta_c":0.5,"delta_f":0.5,"rho":0.2,"mu":0.5,"s":0.9,"c":1.0}"#).unwrap();
    let a = json(&run(&["solve", "--params", &p, "--s", "0.3"]));
    let b = json(&run(&["solve", "--delta-c", "0.5", "--delta-f", "0.5", "--rho", "0.2", "--mu", "0.5", "--s", "0.3"]));
    assert!((a["e"].as_f64().unwrap() - b["e"].as_f64().unwrap()).abs() < 1e-12);
    assert!((a["d"].as_f64().unwrap() - b["d"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["solve", "--bogus"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["solve", "--delta-c", "0.5"])), 1);
    assert_eq!(code(&run(&["solve", "--delta-c", "2", "--delta-f", "0.5", "--rho", "0.2", "--mu", "0.5", "--s", "0.3"])), 1);
    // The seed is required for synthesis.
    assert_eq!(code(&run(&["synth", "--n", "5"])), 1);
    assert_eq!(code(&run(&["synth", "--n", "5", "--seed", "1", "--workers", "0"])), 1);
    assert_eq!(code(&run(&["estimate", "--data", "/nonexistent/data.csv"])), 1);
    assert_eq!(code(&run(&["counterfactual", "--params", "/nonexistent.json", "--results", "/x.json"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["synth", "--help"])), 0);
}

#[test]
fn failed_computation_exits_two() {
    // Complete lock-in: switching costs above the differentiation cost.
    let o = run(&["solve", "--delta-c", "0.5", "--delta-f", "0.5", "--rho", "0.2", "--mu", "0.5", "--s", "1.5"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    assert!(json(&o)["report"]["accepted"].is_null());
}

#[test]
fn sweep_writes_records_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "records.csv");
    let o = run(&["sweep", "-o", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 4455 + 1);
    let report: Value = serde_json::from_str(&fs::read_to_string(path(dir.path(), "records.report.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["total"], 4455);
    assert!(report["increasing_witness"].is_object());
    assert!(report["decreasing_witness"].is_object());
    assert_eq!(code(&run(&["sweep"])), 1, "stdout records need an explicit report path");
}

#[test]
fn sweep_output_ignores_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let grid = path(dir.path(), "grid.json");
    fs::write(&grid, r#"{"delta_c":[0.3,0.7],"delta_f":[0.5],"rho":[0.0,0.4],"mu":[0.2,0.8],"s":[0.0,0.5,1.0]}"#).unwrap();
    let outs: Vec<(Vec<u8>, String)> = ["1", "4"]
        .iter()
        .map(|w| {
            let report = path(dir.path(), &format!("r{w}.json"));
            let o = run(&["sweep", "--grid", &grid, "--workers", w, "--report", &report, "-o", "-"]);
            assert_eq!(code(&o), 0);
            (o.stdout, fs::read_to_string(&report).unwrap())
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    let with_env = bin()
        .env("SWITCHCOST_WORKERS", "3")
        .args(["sweep", "--grid", &grid, "--report", &path(dir.path(), "r3.json")])
        .output()
        .unwrap();
    assert_eq!(with_env.stdout, outs[0].0);
}

#[test]
fn simulate_writes_a_path() {
    let o = run(&[
        "simulate", "--delta-c", "0.5", "--delta-f", "0.5", "--rho", "0.2", "--mu", "0.5", "--s", "0.3", "--sigma0", "0.9",
        "--periods", "10",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,sigma,price");
    assert_eq!(lines.len(), 12);
    assert!(lines[1].starts_with("0,0.9"));
    let last: f64 = lines[11].split(',').nth(1).unwrap().parse().unwrap();
    assert!((last - 0.5).abs() < 0.4);
}

#[test]
fn derive_writes_rows_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let contracts = path(dir.path(), "contracts.csv");
    fs::write(&contracts, CONTRACTS).unwrap();
    let out = path(dir.path(), "derived.csv");
    let o = run(&["derive", "--contracts", &contracts, "-o", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(lines.count(), 2);
    assert!(header.contains(&"c_norm") && header.contains(&"tport"));
    let meta: Value = serde_json::from_str(&fs::read_to_string(path(dir.path(), "derived.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["rows"], 2);
    assert_eq!(meta["config"]["weights"], "as_printed");

    let costs = path(dir.path(), "costs.json");
    fs::write(&costs, r#"{"query_fee_cents": 0.9}"#).unwrap();
    let o = run(&["derive", "--contracts", &contracts, "--costs", &costs, "-o", "-"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_ne!(String::from_utf8(o.stdout).unwrap(), csv);

    fs::write(&costs, r#"{"query_fee_cents": 3.0}"#).unwrap();
    assert_eq!(code(&run(&["derive", "--contracts", &contracts, "--costs", &costs])), 1);
    // Service 4 carries weight, so its price is required.
    fs::write(&contracts, CONTRACTS.replace("0.14,0.11,0.13", "0.14,,0.13")).unwrap();
    let o = run(&["derive", "--contracts", &contracts]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("A-2"));
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.csv");
    let b = path(dir.path(), "b.csv");
    assert_eq!(code(&run(&["synth", "--n", "187", "--seed", "7", "-o", &a])), 0);
    assert_eq!(code(&run(&["synth", "--n", "187", "--seed", "7", "-o", &b, "--workers", "1"])), 0);
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(String::from_utf8(ta.clone()).unwrap().lines().count(), 188);

    let from_env = bin().env("SWITCHCOST_SEED", "7").args(["synth", "--n", "187"]).output().unwrap();
    assert_eq!(from_env.stdout, ta);
    let flag_wins = bin().env("SWITCHCOST_SEED", "8").args(["synth", "--n", "187", "--seed", "7"]).output().unwrap();
    assert_eq!(flag_wins.stdout, ta);
    let other = run(&["synth", "--n", "187", "--seed", "8"]);
    assert_ne!(other.stdout, ta);
}

#[test]
fn estimate_and_counterfactual_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "data.csv");
    assert_eq!(code(&run(&["synth", "--n", "300", "--seed", "3", "-o", &data])), 0);
    let config = path(dir.path(), "config.json");
    fs::write(&config, r#"{"starts": 4}"#).unwrap();
    let results = path(dir.path(), "results.json");
    let table = path(dir.path(), "table.txt");
    let o = run(&["estimate", "--data", &data, "--config", &config, "-o", &results, "--table", &table]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(&results).unwrap()).unwrap();
    assert_eq!(r["df"], 21);
    assert!((r["params"]["e"].as_f64().unwrap() - 1.0).abs() < 1e-4);
    let t = fs::read_to_string(&table).unwrap();
    assert!(t.starts_with("Independent Variable\tEstimate\n"));
    assert!(t.contains("J Statistic (significance level)"));

    let o = run(&["counterfactual", "--results", &results, "--data", &data]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cf = json(&o);
    assert!(cf["pct_change"].is_f64());
    let o = run(&["counterfactual", "--results", &results, "--scenario", "all-contracts", "--data", &data]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["contracts"], 300);
    assert_eq!(code(&run(&["counterfactual", "--results", &results, "--scenario", "all-contracts"])), 1);
}

#[test]
fn help_documents_schemas() {
    let text = |args: &[&str]| String::from_utf8(run(args).stdout).unwrap();
    assert!(text(&["synth", "--help"]).contains("fwd2_dport"));
    assert!(text(&["derive", "--help"]).contains("volume_commitment_factor"));
    assert!(text(&["sweep", "--help"]).contains("cutoffs_interior"));
    assert!(text(&["estimate", "--help"]).contains("j_statistic"));
    assert!(text(&["counterfactual", "--help"]).contains("pct_change_average_of_ratios"));
    assert!(text(&["solve", "--help"]).contains("markup"));
    assert!(text(&["--help"]).contains("Exit status"));
}
