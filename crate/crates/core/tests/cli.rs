use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn occspeed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occspeed"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let mut rows = vec![header];
    for rec in r.records() {
        rows.push(rec.unwrap().iter().map(String::from).collect());
    }
    rows
}

fn plan(scenario: &str, extra: &[&str]) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    let f = fixture(scenario);
    let mut args = vec!["plan", "--scenario", f.to_str().unwrap(), "--out", dir.path().to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = occspeed(&args);
    (dir, o)
}

#[test]
fn plan_writes_limits_profile_and_metrics() {
    let (dir, o) = plan("unicaragil.json", &["--preset", "example"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("travel_time_s: "));

    let limits = csv_rows(&dir.path().join("limits.csv"));
    assert_eq!(limits[0], ["s_m", "v_lim_mps", "binding"]);
    assert_eq!(limits.len(), 1402);
    assert!(limits.iter().skip(1).any(|r| r[2] == "2"));
    let profile = csv_rows(&dir.path().join("profile.csv"));
    assert_eq!(profile[0], ["s_m", "v_lim_mps", "v_mps", "t_s"]);
    assert_eq!(profile.last().unwrap()[0], "140");

    let m = json(&dir.path().join("metrics.json"));
    let t = m["travel_time"].as_f64().unwrap();
    assert!((t - 29.1).abs() <= 0.25 * 29.1);
    assert!((m["no_treatment_travel_time"].as_f64().unwrap() - 16.8).abs() < 1e-9);
    assert_eq!(m["avg_speed_passing_each"].as_array().unwrap().len(), 3);
}

#[test]
fn extreme_preset_and_default_scenario() {
    let dir = TempDir::new().unwrap();
    let o = occspeed(&["plan", "--preset", "extreme", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let m = json(&dir.path().join("metrics.json"));
    assert!(m["min_limit"].as_f64().unwrap() < 0.01);
    assert_eq!(m["scenario"], "unicaragil");
}

#[test]
fn empty_scenario_is_flat() {
    let (dir, o) = plan("empty.json", &[]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&dir.path().join("profile.csv"));
    assert!(rows.iter().skip(1).all(|r| r[1] == r[2] && r[2] == rows[1][2]));
    let m = json(&dir.path().join("metrics.json"));
    assert!(m["avg_speed_passing"].is_null());
}

#[test]
fn format_selects_outputs() {
    let (dir, o) = plan("unicaragil.json", &["--format", "json"]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("metrics.json").exists());
    assert!(!dir.path().join("limits.csv").exists());
    let (dir, o) = plan("unicaragil.json", &["--format", "csv"]);
    assert_eq!(code(&o), 0);
    assert!(!dir.path().join("metrics.json").exists());
    assert!(dir.path().join("profile.csv").exists());
}

#[test]
fn outputs_are_byte_reproducible() {
    let (a, _) = plan("single_rv_50.json", &[]);
    let (b, _) = plan("single_rv_50.json", &[]);
    for f in ["limits.csv", "profile.csv", "metrics.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn fixtures_run_under_both_presets() {
    for name in ["unicaragil.json", "single_rv_50.json", "empty.json"] {
        for p in ["example", "extreme"] {
            let (_, o) = plan(name, &["--preset", p]);
            assert_eq!(code(&o), 0, "{name} {p}");
        }
    }
}

#[test]
fn simulate_writes_trace() {
    let dir = TempDir::new().unwrap();
    let f = fixture("unicaragil.json");
    let o = occspeed(&["simulate", "--scenario", f.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&dir.path().join("trace.csv"));
    assert_eq!(rows[0], ["t_s", "s_m", "v_mps", "mode"]);
    assert!(rows.iter().skip(1).all(|r| r[3] == "tracking"));
    let sim = json(&dir.path().join("simulation.json"));
    let (a, b) = (sim["travel_time"].as_f64().unwrap(), sim["profile_travel_time"].as_f64().unwrap());
    assert!((a - b).abs() <= 0.01);
}

fn verify(scenario: &str, extra: &[&str]) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    let f = fixture(scenario);
    let mut args = vec!["verify", "--scenario", f.to_str().unwrap(), "--out", dir.path().to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = occspeed(&args);
    (dir, o)
}

#[test]
fn verify_is_safe_on_fixtures() {
    for name in ["unicaragil.json", "single_rv_50.json"] {
        let (dir, o) = verify(name, &[]);
        assert_eq!(code(&o), 0, "{name}");
        let r = json(&dir.path().join("sweep.json"));
        assert_eq!(r["collisions"], 0);
        assert!(r["worst_stop_margin"].as_f64().unwrap() >= 0.0);
        let rows = csv_rows(&dir.path().join("events.csv"));
        assert_eq!(&rows[0][..4], ["m", "t_emerge", "outcome", "stop_margin_m"]);
        assert_eq!(rows.len() as u64 - 1, r["events"].as_u64().unwrap());
    }
}

#[test]
fn verify_reports_collisions_when_pedestrians_are_faster() {
    let (dir, o) = verify("single_rv_50.json", &["--override", "v_O=3.2"]);
    assert_eq!(code(&o), 3);
    let r = json(&dir.path().join("sweep.json"));
    assert!(r["collisions"].as_u64().unwrap() > 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("COLLISIONS"));
}

#[test]
fn usage_errors() {
    assert_eq!(code(&occspeed(&["plan", "--scenario", "/nonexistent/scenario.json"])), 1);
    assert_eq!(code(&occspeed(&["verify", "--scenario", "/nonexistent/scenario.json"])), 1);
    assert_eq!(code(&occspeed(&["plan", "--no-such-flag"])), 1);
    assert_eq!(code(&occspeed(&["plan", "--ds", "0", "--format", "json"])), 1);
    assert_eq!(code(&occspeed(&["plan", "--preset", "cautious"])), 1);
    assert_eq!(code(&occspeed(&["plan", "--override", "colour=3"])), 1);
    assert_eq!(code(&occspeed(&["sweep-params"])), 1);
    assert_eq!(code(&occspeed(&["sweep-params", "--grid", "a_max="])), 1);
    assert_eq!(code(&occspeed(&["--help"])), 0);
}

#[test]
fn invalid_scenarios_exit_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    let text = fs::read_to_string(fixture("single_rv_50.json")).unwrap().replace("\"d_lat\": 1.0", "\"d_lat\": -0.1");
    fs::write(&bad, text).unwrap();
    let o = occspeed(&["plan", "--scenario", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8(o.stderr).unwrap().contains("negative lateral gap"));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{ \"route\": ").unwrap();
    assert_eq!(code(&occspeed(&["plan", "--scenario", broken.to_str().unwrap()])), 2);

    let f = fixture("unicaragil.json");
    let o = occspeed(&["plan", "--scenario", f.to_str().unwrap(), "--override", "a_plan_dec=9"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unstoppable_limit_is_reported_as_infeasible() {
    // Zero gap and zero width: the limit must reach zero at the conflict point.
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("touching.json");
    let text = r#"{
        "route": { "length": 50, "posted_limit": "30 kph" },
        "ego": { "width": 2.0, "length": 4.5 },
        "parked": [ { "s_front": 30, "length": 5, "d_lat": 0 } ],
        "assumptions": { "w_o": 0 }
    }"#;
    fs::write(&path, text).unwrap();
    let o = occspeed(&["plan", "--scenario", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

fn sweep(grid: &str) -> Vec<Vec<String>> {
    let dir = TempDir::new().unwrap();
    let o = occspeed(&["sweep-params", "--grid", grid, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("sweep_params.json").exists());
    csv_rows(&dir.path().join("sweep_params.csv"))
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = rows[0].iter().position(|h| h == name).unwrap();
    rows.iter().skip(1).map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn sweep_travel_time_falls_with_braking_capability() {
    let rows = sweep("a_max=1.0,3.25,6.5");
    let t = column(&rows, "travel_time_s");
    assert_eq!(t.len(), 3);
    assert!(t[0] > t[1] && t[1] > t[2], "{t:?}");
}

#[test]
fn sweep_min_limit_falls_with_pedestrian_speed() {
    let rows = sweep("v_o=1.6,5,10");
    let m = column(&rows, "min_limit_mps");
    assert!(m[0] > m[1] && m[1] > m[2], "{m:?}");
}

#[test]
fn sweep_cartesian_product() {
    let rows = sweep("a_max=3.25,6.5");
    assert_eq!(rows.len(), 3);
    let dir = TempDir::new().unwrap();
    let o = occspeed(&[
        "sweep-params",
        "--grid",
        "a_max=3.25,6.5",
        "--grid",
        "t_r=0.5,1,1.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&dir.path().join("sweep_params.csv"));
    assert_eq!(rows.len(), 7);
    assert_eq!(&rows[0][..2], ["a_max", "t_r"]);
}

#[test]
fn single_point_sweep_matches_plan() {
    let rows = sweep("a_max=6.5");
    let (dir, _) = plan("unicaragil.json", &[]);
    let m = json(&dir.path().join("metrics.json"));
    assert_eq!(column(&rows, "travel_time_s")[0], m["travel_time"].as_f64().unwrap());
    assert_eq!(column(&rows, "min_limit_mps")[0], m["min_limit"].as_f64().unwrap());
}
