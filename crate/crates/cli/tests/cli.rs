use std::path::Path;
use std::process::{Command, Output};

fn qmimo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmimo"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(dir, "manifest.json")).unwrap()
}

#[test]
fn analyze_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmimo(
        dir.path(),
        &["analyze", "--bits", "2,full", "--ebn0=-14:-12:1"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(dir.path(), "analyze.csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("curve,ebn0_db,pu,ber_closed,ber_two_term")
    );
    // two requested curves plus the two full-precision references, 3 points each
    assert_eq!(lines.count(), 12);
    let m = manifest(dir.path());
    assert_eq!(m["command"], "analyze");
    assert_eq!(m["resolved_config"]["bits"], "2,full");
    assert_eq!(m["outputs"][0]["path"], "analyze.csv");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn json_format_mirrors_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmimo(
        dir.path(),
        &["analyze", "--format", "json", "--bits", "3", "--ebn0=-10"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_str(&read(dir.path(), "analyze.json")).unwrap();
    let first = &rows[0];
    assert_eq!(first["curve"], "b=3");
    assert!(first["ber_two_term"].as_f64().unwrap() > 0.0);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# test\nn_users = 8\nseed = 5\nbits = 3\n").unwrap();
    let o = qmimo(
        dir.path(),
        &[
            "analyze",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "9",
            "--ebn0=0",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(dir.path());
    assert_eq!(m["resolved_config"]["n_users"], "8");
    assert_eq!(m["resolved_config"]["seed"], "9");
    assert_eq!(m["seed"], 9);
}

#[test]
fn usage_errors_exit_two_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "n_users = 4\nbogus_key = 1\n").unwrap();
    let o = qmimo(dir.path(), &["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = qmimo(dir.path(), &["analyze", "--ebn0=5:1:1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ebn0"), "{}", stderr(&o));

    let o = qmimo(dir.path(), &["analyze", "--set", "mod_order=8"]);
    assert_eq!(o.status.code(), Some(2));

    let o = qmimo(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_refuses_budget_over_bit_cap() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmimo(
        dir.path(),
        &[
            "simulate",
            "--bits",
            "3",
            "--ebn0=0",
            "--set",
            "n_blocks=1000",
            "--set",
            "bit_cap=1e6",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bit_cap"), "{}", stderr(&o));
    assert!(!dir.path().join("simulate.csv").exists());
}

#[test]
fn simulate_rejects_short_pilots() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmimo(
        dir.path(),
        &[
            "simulate",
            "--bits",
            "3",
            "--ebn0=0",
            "--set",
            "n_users=8",
            "--set",
            "pilot_len=4",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn simulate_rerun_from_manifest_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = [
        "simulate",
        "--bits",
        "2,full",
        "--ebn0=-8:-4:4",
        "--seed",
        "3",
        "--workers",
        "2",
        "--set",
        "n_antennas=16",
        "--set",
        "n_users=4",
        "--set",
        "pilot_len=4",
        "--set",
        "n_blocks=8",
    ];
    let o = qmimo(&a, &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = a.join("manifest.json");
    let o = qmimo(
        &b,
        &[
            "simulate",
            "--config",
            m.to_str().unwrap(),
            "--workers",
            "3",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read(&a, "simulate.csv"), read(&b, "simulate.csv"));
    let details = &manifest(&a)["details"];
    let text = details.to_string();
    assert!(text.contains("codebook_digest"), "{text}");
}

#[test]
fn infeasible_scenario_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmimo(
        dir.path(),
        &[
            "scenario",
            "nmin",
            "--bits",
            "1",
            "--ebn0=-40",
            "--set",
            "antenna_cap=64",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let csv = read(dir.path(), "scenario_nmin.csv");
    assert!(csv.lines().nth(1).unwrap().ends_with(",false"), "{csv}");
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn scenario_power_reports_calibrated_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmimo(
        dir.path(),
        &[
            "scenario",
            "power",
            "--bits",
            "1,2",
            "--set",
            "mod_order=4",
            "--set",
            "pilot_len=40",
            "--set",
            "n_range=200:300:1",
            "--set",
            "calibrate_crossing_n=255",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "summary.json")).unwrap();
    let text = summary.to_string();
    let crossings = summary["crossings"].as_array().expect(&text);
    assert_eq!(crossings.len(), 1, "{text}");
    let n = crossings[0]["n_antennas"].as_u64().unwrap();
    assert!(n.abs_diff(255) <= 1, "{text}");
}

#[test]
fn compensate_flags_infeasible_sinr_targets() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmimo(
        dir.path(),
        &["compensate", "--bits", "1,4", "--ebn0=-10:0:10"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(dir.path(), "compensate.csv");
    assert!(csv.starts_with("resolution,ebn0_q_db,tau_q_estimation,tau_q_sinr,sinr_feasible\n"));
    for row in csv.lines().skip(1) {
        let one_bit = row.starts_with("1,");
        assert_eq!(row.ends_with(",,false"), one_bit, "{row}");
        assert_eq!(row.ends_with(",true"), !one_bit, "{row}");
    }
    assert_eq!(csv.lines().count(), 5);
}
