use std::path::Path;
use std::process::{Command, Output};

use dyadic_bellman::Grid2D;
use serde_json::Value;

fn bellman(args: &[&str]) -> Output {
    bellman_env(args, None)
}

fn bellman_env(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bellman"));
    cmd.args(args).env_remove("BELLMAN_SEED");
    if let Some(s) = seed {
        cmd.env("BELLMAN_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn constant_values() {
    let o = bellman(&["constant", "--alpha", "2,4"]);
    assert!(o.status.success());
    let v = json(&o);
    assert!((v[0]["c_alpha"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    let c4 = (3.0 - 6.0f64.sqrt()).sqrt();
    assert!((v[1]["c_alpha"].as_f64().unwrap() - c4).abs() < 1e-10);
    assert!((c4 - 0.741_963_784_3).abs() < 1e-10);
}

#[test]
fn constant_below_two_warns() {
    let o = bellman(&["constant", "--alpha", "1.5"]);
    assert!(o.status.success());
    assert_eq!(json(&o)[0]["out_of_verified_range"], Value::Bool(true));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn eval_points() {
    let o = bellman(&["eval", "bollobas", "--", "-2", "1"]);
    assert_eq!(json(&o)[0]["value"].as_f64().unwrap(), 2.0);
    // inside the cone the Davis function is negative far enough out
    let o = bellman(&["eval", "davis", "3", "1", "--format", "csv"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "function,alpha,p,q,value");
    let value: f64 = lines.next().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(value < -26.0 && value > -27.0, "{value}");
}

#[test]
fn verify_schema_and_exit_status() {
    let o = bellman(&["verify", "dyadic", "--alpha", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reports = json(&o);
    let keys = ["name", "passed", "worst_violation", "location", "tolerance", "samples", "wall_time_ms"];
    for r in reports.as_array().unwrap() {
        let obj = r.as_object().unwrap();
        assert_eq!(obj.len(), keys.len());
        for k in keys {
            assert!(obj.contains_key(k), "{k}");
        }
        assert_eq!(r["passed"], Value::Bool(true));
    }
    // a negative tolerance demands a positive margin, which exact identities lack
    let o = bellman(&["verify", "davis", "--alpha", "2", "--tol", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(json(&o).as_array().unwrap().iter().any(|r| r["passed"] == Value::Bool(false)));
}

#[test]
fn envelope_writes_replayable_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    let o = bellman(&["envelope", "davis", "--grid", "p:-3,3,41", "q:0,3,41", "--a-set", "16", "--out", out_s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = Grid2D::parse_dump(&std::fs::read_to_string(out.join("envelope.grid")).unwrap()).unwrap();
    assert_eq!((grid.p.n, grid.q.n), (41, 41));
    let first = std::fs::read_to_string(out.join("report.json")).unwrap();
    let summary: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(summary["report"]["converged"], Value::Bool(true));
    assert_eq!(summary["a_set_size"], 17);

    let replay = dir.path().join("replay");
    let cfg = out.join("config.toml");
    let o = bellman(&["envelope", "davis", "--config", cfg.to_str().unwrap(), "--out", replay.to_str().unwrap()]);
    assert!(o.status.success());
    let read = |p: &Path| std::fs::read_to_string(p).unwrap();
    assert_eq!(first, read(&replay.join("report.json")));
    assert_eq!(read(&out.join("envelope.grid")), read(&replay.join("envelope.grid")));
}

#[test]
fn inflated_envelope_fails() {
    let o = bellman(&["envelope", "davis", "--inflate", "1.05", "--grid", "p:-3,3,41", "q:0,3,41"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["report"]["diverged"], Value::Bool(true));
}

#[test]
fn oracle_bound_direction() {
    let o = bellman(&["oracle", "davis", "0", "1", "--depth", "4"]);
    let v = &json(&o)[0];
    assert_eq!(v["bound"], "lower");
    assert!(v["value"].as_f64().unwrap() <= v["closed_form"].as_f64().unwrap());
    let o = bellman(&["oracle", "bollobas", "0", "1", "--depth", "4"]);
    let v = &json(&o)[0];
    assert_eq!(v["bound"], "upper");
    assert!(v["value"].as_f64().unwrap() >= v["closed_form"].as_f64().unwrap());
}

#[test]
fn mc_csv_and_seeding() {
    let args = ["mc", "t-a", "--paths", "300", "--dt", "1e-3"];
    let a = bellman(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("a,alpha,n_paths,censored,"));
    assert_eq!(stdout(&bellman(&args)), text);
    let env = bellman_env(&args, Some("11"));
    assert_ne!(stdout(&env), text);
    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "20240917"]);
    assert_eq!(stdout(&bellman_env(&with_flag, Some("11"))), text);
}

#[test]
fn usage_errors() {
    assert_eq!(bellman(&["envelope", "davis", "--grid", "p:1,0,5"]).status.code(), Some(2));
    assert_eq!(bellman(&["eval", "davis", "0", "1", "--alpha", "2,3"]).status.code(), Some(2));
    assert_eq!(bellman(&["envelope", "bollobas", "--direction", "sup"]).status.code(), Some(2));
    assert_eq!(bellman(&["mc", "hitting", "--a", "0"]).status.code(), Some(2));
    assert_eq!(bellman_env(&["constant"], Some("nope")).status.code(), Some(2));
}
