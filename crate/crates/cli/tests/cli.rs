use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mimo-alloc"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_scenario(dir: &Path, seed: u64) -> String {
    let out = run(&["scenario", "--seed", &seed.to_string()], dir);
    assert!(out.status.success());
    let name = format!("scenario{seed}.json");
    fs::write(dir.join(&name), &out.stdout).unwrap();
    name
}

#[test]
fn allocate_reports_allocation_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), 3);
    let v = json(&run(&["allocate", "--k", "joint", &file], dir.path()));
    let p = v["p"].as_array().unwrap();
    let w = v["w"].as_array().unwrap();
    assert_eq!(p.len(), 5);
    assert_eq!(w.len(), 5);
    let total: f64 = p.iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((total / v["total_power"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(v["cost"].as_f64().unwrap() > 0.0);
    assert_eq!(v["certificate"]["kind"], "joint");
}

#[test]
fn bound_never_exceeds_allocated_cost() {
    let dir = tempfile::tempdir().unwrap();
    for seed in [1, 2] {
        let file = write_scenario(dir.path(), seed);
        for k in ["power", "bandwidth", "joint"] {
            let cost = json(&run(&["allocate", "-k", k, &file], dir.path()))["cost"].as_f64().unwrap();
            let bound = json(&run(&["bound", "-k", k, &file], dir.path()))["l_problem"].as_f64().unwrap();
            assert!(bound <= cost * (1.0 + 1e-9), "{k}: bound {bound} cost {cost}");
        }
    }
}

#[test]
fn explicit_budgets_scale_the_power_cost() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), 4);
    let cost = |power: &str| {
        json(&run(&["allocate", "-k", "power", "--power", power, &file], dir.path()))["cost"]
            .as_f64()
            .unwrap()
    };
    let ratio = cost("1e20") / cost("2e20");
    assert!((ratio - 2.0).abs() < 1e-6, "{ratio}");
}

#[test]
fn montecarlo_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "montecarlo".to_string(),
            "--trials".into(),
            "3".into(),
            "--seed".into(),
            "7".into(),
            "--policies".into(),
            "uniform,joint".into(),
            "--out".into(),
            out.into(),
        ]
    };
    for out in ["a", "b"] {
        let status = bin().args(args(out)).current_dir(dir.path()).output().unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    }
    let a = fs::read(dir.path().join("a/results.csv")).unwrap();
    let b = fs::read(dir.path().join("b/results.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,policy,snr_db,cost,sqrt_cost,lower_bound,gap,active_tx,max_loc_err,wall_ms"
    );
    assert!(lines.count() <= 3 * 2 * 5);
    let script = fs::read_to_string(dir.path().join("a/plot.py")).unwrap();
    assert!(script.contains("results.csv"));
}

#[test]
fn montecarlo_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"trials": 2, "snr_grid_db": [0, 10], "policies": ["power"], "localize": false}"#,
    )
    .unwrap();
    let out = run(&["montecarlo", "cfg.json", "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("run/results.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.split(',').nth(8) == Some("")));
}

#[test]
fn validate_passes_on_generated_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), 5);
    let out = run(&["validate", &file], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("joint colinearity"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn usage_errors_exit_with_one_and_print_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["allocate", "--k", "sideways", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Scenario JSON"));

    let out = run(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["allocate", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    fs::write(dir.path().join("bad.json"), r#"{"transmitters": []}"#).unwrap();
    let out = run(&["bound", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Scenario JSON"));

    let out = run(&["montecarlo", "--trials", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("montecarlo"));
}

#[test]
fn numerical_failures_exit_with_two() {
    // every receiver collinear with the transmitters and the target on one
    // line: each target's Fisher information is singular
    let dir = tempfile::tempdir().unwrap();
    let scenario = serde_json::json!({
        "consts": {
            "carrier_freq_hz": 1e9, "speed_of_light_mps": 299792458.0, "noise_psd_w_per_hz": 4.0e-21,
            "pulse_rep_freq_hz": 5e3, "integration_time_s": 0.01
        },
        "transmitters": [[0.0, 0.0], [100.0, 0.0]],
        "receivers": [[200.0, 0.0]],
        "targets": [[50.0, 0.0]],
        "gains": [[1.0, 0.0], [1.0, 0.0]]
    });
    fs::write(dir.path().join("line.json"), scenario.to_string()).unwrap();
    let out = run(&["allocate", "line.json"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
