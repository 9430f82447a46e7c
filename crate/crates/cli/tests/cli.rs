use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stochmargin"));
    c.env_remove("STOCHMARGIN_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

const FAST: &[&str] = &["--interval", "0.1", "--runs", "4", "--workers", "2"];

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["mc", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_prints_ok() {
    let o = run(&["validate", "--scenario", "table2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.trim_end().ends_with("OK"), "{text}");
    assert!(text.contains("initial power flow mismatch"));
    assert!(text.contains("[sweep]"));
}

#[test]
fn bad_scenarios_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let base = stochmargin::scenario::bundled_scenario("default").unwrap();

    let unknown_bus = dir.path().join("bus99.toml");
    std::fs::write(&unknown_bus, base.replace("bus = 9", "bus = 99")).unwrap();
    let o = run(&["validate", "--scenario", unknown_bus.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("99"));

    let o = run(&["validate", "--dt", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt"));
}

#[test]
fn powerflow_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["powerflow", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = read(&dir.path().join("powerflow.csv"));
    assert_eq!(csv.lines().count(), 15);
    assert!(csv.starts_with("bus,v,theta_deg,p_gen,q_gen"));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn mc_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["mc", "--seed", "7", "--envelope-bus", "14", "--out", out];
    args.extend_from_slice(FAST);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let samples = read(&dir.path().join("samples.csv"));
    assert_eq!(samples.lines().next(), Some("run_index,margin,collapse_time,reason"));
    assert_eq!(samples.lines().count(), 5);
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.path().join("summary.json"))).unwrap();
    assert_eq!(summary["n"], 4);
    assert!(summary["mean"].as_f64().unwrap() > 0.0);
    assert!(read(&dir.path().join("histogram.csv")).starts_with("bin_left,bin_right,count"));
    assert!(read(&dir.path().join("envelope.csv")).starts_with("t,q05,q50,q95"));
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["workers"], 2);
    // the resolved scenario reproduces the batch
    let again = tempfile::tempdir().unwrap();
    let o = run(&[
        "mc",
        "--scenario",
        dir.path().join("scenario.toml").to_str().unwrap(),
        "--workers",
        "1",
        "--out",
        again.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(samples, read(&again.path().join("samples.csv")));
}

#[test]
fn noiseless_runs_are_identical_across_invocations() {
    let traces: Vec<String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let o = run(&[
                "run",
                "--sigma",
                "0",
                "--interval",
                "0.1",
                "--trace-stride",
                "5",
                "--out",
                dir.path().to_str().unwrap(),
            ]);
            assert_eq!(o.status.code(), Some(0));
            read(&dir.path().join("trace.csv"))
        })
        .collect();
    assert_eq!(traces[0], traces[1]);
    assert!(traces[0].starts_with("t,lambda,v_1,"));
}

#[test]
fn sweep_writes_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--axis", "sigma=0.05,0.1", "--out", dir.path().to_str().unwrap()];
    args.extend_from_slice(FAST);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = read(&dir.path().join("comparison.csv"));
    assert_eq!(table.lines().count(), 3);
    assert!(dir.path().join("sigma_0.05").join("samples.csv").exists());
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["point_seeds"].as_array().unwrap().len(), 2);
}

#[test]
fn malformed_axis_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "--axis", "speed=1,2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn out_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["powerflow"])
        .env("STOCHMARGIN_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("powerflow.csv").exists());
}
