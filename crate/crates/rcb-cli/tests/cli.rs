//! End-to-end checks of the `rcb` binary: every subcommand, exit-code
//! semantics, and file outputs.

use std::path::{Path, PathBuf};
use std::process::Command;

fn rcb_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rcb"))
}

fn small_config(dir: &Path, name: &str, model: &str, m: usize) -> PathBuf {
    let prices = rcb::signals::two_peak_prices(8, 0.25);
    rcb::signals::write_signal_price(&dir.join("prices.csv"), &prices).unwrap();
    let config = serde_json::json!({
        "name": name,
        "fleet": {
            "n": 4,
            "element": {"eta_c": 0.95, "eta_d": 0.95, "p_c_max": 5.0, "p_d_max": 5.0, "e_max": 13.5},
            "e0": "uniform:6.75"
        },
        "grid": {"delta_t_sched_hours": 0.25, "m": m, "k_steps": 8},
        "model": model,
        "objective": {"kind": "revenue", "signal": "prices.csv"},
        "solver": {"time_limit_seconds": 120.0},
        "output_dir": format!("{name}-out"),
        "seed": 5
    });
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn solve_writes_results_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "cli-solve", "rcb", 2);
    let output = rcb_bin()
        .args(["solve", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let out = dir.path().join("cli-solve-out");
    for file in [
        "composite_schedule.csv",
        "element_dispatch.csv",
        "spread.csv",
        "metrics.json",
    ] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("admissible=true"), "stdout: {stdout}");
}

#[test]
fn disaggregate_then_simulate_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "cli-disagg", "rcb", 2);

    // hand-written composite schedule inside the cutting plane
    let schedule = dir.path().join("schedule.csv");
    std::fs::write(
        &schedule,
        "k,p_c_kw,p_d_kw\n0,7.5,0\n1,0,6\n2,3,3\n3,0,0\n4,5,0\n5,0,5\n6,2,1\n7,0,2\n",
    )
    .unwrap();

    let output = rcb_bin()
        .args(["disaggregate", "--config"])
        .arg(&config)
        .arg("--schedule")
        .arg(&schedule)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let dispatch = dir.path().join("cli-disagg-out/element_dispatch.csv");
    assert!(dispatch.exists());

    let output = rcb_bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--dispatch")
        .arg(&dispatch)
        .arg("--schedule")
        .arg(&schedule)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "simulate rejected PSC output: {}",
        String::from_utf8_lossy(&output.stdout)
    );
}

#[test]
fn simulate_flags_inadmissible_dispatch_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "cli-bad", "rcb", 1);
    // element 0 charges and discharges at once in step 0
    let mut rows = String::from("l,i,p_c_kw,p_d_kw\n0,0,2.0,2.0\n");
    for l in 0..8 {
        for i in 0..4 {
            if l == 0 && i == 0 {
                continue;
            }
            rows.push_str(&format!("{l},{i},0,0\n"));
        }
    }
    let dispatch = dir.path().join("bad_dispatch.csv");
    std::fs::write(&dispatch, rows).unwrap();

    let output = rcb_bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--dispatch")
        .arg(&dispatch)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("complementarity"), "stdout: {stdout}");
}

#[test]
fn region_emits_figure_data() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let out = tempfile::tempdir().unwrap();
    let output = rcb_bin()
        .args(["region", "--config"])
        .arg(fixtures.join("region_fig.json"))
        .arg("--output-dir")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let power = std::fs::read_to_string(out.path().join("region_power.csv")).unwrap();
    // plane intercepts at (N-1) * 500 kW = 4.5 MW
    assert!(power.contains("polygon,4500,0"), "{power}");
    assert!(power.contains("polygon,0,4500"), "{power}");
    assert!(out.path().join("region_energy.csv").exists());
}

#[test]
fn verify_suites_pass() {
    let output = rcb_bin()
        .args(["verify", "--count", "10", "--seed", "3"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "stdout: {stdout}");
    assert_eq!(stdout.matches("PASS").count(), 5, "stdout: {stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn batch_solve_runs_scenarios_concurrently() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_config(dir.path(), "batch-a", "rcb", 2);
    let b = small_config(dir.path(), "batch-b", "relaxed", 1);
    let output = rcb_bin()
        .args(["solve", "--config"])
        .arg(&a)
        .arg("--config")
        .arg(&b)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(dir.path().join("batch-a-out/metrics.json").exists());
    assert!(dir.path().join("batch-b-out/metrics.json").exists());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("batch-a:") && stdout.contains("batch-b:"));
}

#[test]
fn solve_exit_code_nonzero_on_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{not json").unwrap();
    let output = rcb_bin()
        .args(["solve", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!output.status.success());
}
