use std::path::{Path, PathBuf};
use std::process::Command;

use rovernav::mission::{
    emit_metrics, parse_trajectory, run_scenario, ModePolicy, NavMode, RunStatus, ScenarioConfig, CSV_HEADER,
};
use rovernav::terrain::{generate_terrain, write_asc, TerrainSpec};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn minimal(extra: &str) -> ScenarioConfig {
    let text = format!(
        "name = \"t\"\nseed = 4\nmode = \"efficient_only\"\n[terrain]\nextent_x = 24.0\nextent_y = 10.0\namplitude = 0.0\n\
         [path]\nwaypoints = [[2.0, 5.0], [20.0, 5.0]]\n[odometry]\ndrift_rate = 0.0\n{extra}"
    );
    ScenarioConfig::parse(&text).unwrap()
}

#[test]
fn flat_baseline_drives_the_plan() {
    let config = ScenarioConfig::load(scenario("flat_baseline.toml")).unwrap();
    let out = run_scenario(&config).unwrap();
    let m = &out.metrics;
    assert_eq!(m.status, RunStatus::Completed);
    assert_eq!(m.replans, 0);
    assert!(m.overhead().unwrap().abs() < 0.02, "{}", m.csv_row());
    assert!(m.final_error < 1e-9);
    assert!(out.trajectory.iter().all(|r| r.mode == NavMode::Efficient));
}

#[test]
fn rock_on_the_path_is_avoided() {
    let config = minimal("[[obstacles]]\nx = 11.0\ny = 5.0\nradius = 0.4\nheight = 0.3\n");
    let out = run_scenario(&config).unwrap();
    assert_eq!(out.metrics.status, RunStatus::Completed, "{}", out.events_log());
    assert!(out.metrics.replans >= 1);
    // The rover never stood on the rock.
    assert!(out
        .trajectory
        .iter()
        .all(|r| (r.truth.0 - 11.0).hypot(r.truth.1 - 5.0) > 0.4));
}

#[test]
fn same_seed_same_bytes_other_seed_other_noise() {
    let mut config = minimal("");
    config.odometry.drift_rate = 0.02;
    let a = run_scenario(&config).unwrap();
    let b = run_scenario(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_metrics(&a, dir.path().join("a")).unwrap();
    emit_metrics(&b, dir.path().join("b")).unwrap();
    for f in ["metrics.csv", "trajectory.csv", "events.log"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    config.seed = 5;
    let c = run_scenario(&config).unwrap();
    assert_ne!(a.metrics.odometry_error, c.metrics.odometry_error);
}

#[test]
fn trajectory_file_reads_back() {
    let out = run_scenario(&minimal("")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_metrics(&out, dir.path()).unwrap();
    let rows = parse_trajectory(&std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), out.trajectory.len());
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some(CSV_HEADER));
}

#[test]
fn dem_file_is_used_and_resolved_next_to_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let spec = TerrainSpec {
        extent_x: 24.0,
        extent_y: 10.0,
        amplitude: 0.0,
        ..TerrainSpec::default()
    };
    write_asc(&generate_terrain(1, &spec).unwrap(), dir.path().join("flat.asc")).unwrap();
    let text = "name = \"dem\"\nseed = 1\nmode = \"efficient_only\"\n[terrain]\ndem = \"flat.asc\"\n\
                [path]\nwaypoints = [[2.0, 5.0], [20.0, 5.0]]\n";
    std::fs::write(dir.path().join("s.toml"), text).unwrap();
    let config = ScenarioConfig::load(dir.path().join("s.toml")).unwrap();
    assert_eq!(run_scenario(&config).unwrap().metrics.status, RunStatus::Completed);

    std::fs::write(dir.path().join("bad.toml"), text.replace("flat.asc", "missing.asc")).unwrap();
    assert!(ScenarioConfig::load(dir.path().join("bad.toml")).is_err());
}

#[test]
fn full_mode_runs_slam_and_beats_dead_reckoning_here() {
    let mut config = ScenarioConfig::load(scenario("slam_drift.toml")).unwrap();
    config.path.waypoints = vec![[5.0, 15.0], [25.0, 15.0]];
    let out = run_scenario(&config).unwrap();
    assert_eq!(out.metrics.status, RunStatus::Completed);
    assert_eq!(config.mode, ModePolicy::FullOnly);
    assert!(out.trajectory.iter().all(|r| r.mode == NavMode::Full));
    assert!(out.metrics.final_error < 0.5, "{}", out.metrics.csv_row());
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rovernav"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let ok = cli(&[
        "run",
        scenario("flat_baseline.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with(CSV_HEADER));
    assert!(out.join("trajectory.csv").exists());

    let replay = cli(&["replay", out.join("trajectory.csv").to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0));

    let missing = cli(&["run", "no/such/scenario.toml"]);
    assert_eq!(missing.status.code(), Some(3));

    // Flat ground cannot undo the injected jump; the rover leaves its corridor.
    let fault = cli(&[
        "run",
        scenario("global_flat.toml").to_str().unwrap(),
        "--out",
        dir.path().join("flat").to_str().unwrap(),
    ]);
    assert_eq!(fault.status.code(), Some(2));

    let cal = cli(&[
        "calibrate",
        scenario("flat_baseline.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(cal.status.code(), Some(0));
    assert!(out.join("calibration.txt").exists());
}

#[test]
fn cli_match_finds_a_shifted_patch() {
    let dir = tempfile::tempdir().unwrap();
    let spec = TerrainSpec {
        extent_x: 40.0,
        extent_y: 40.0,
        amplitude: 0.6,
        feature_scale: 20.0,
        octaves: 6,
        craters: 3,
        ripples: 2,
        ..TerrainSpec::default()
    };
    let truth = generate_terrain(1, &spec).unwrap();
    let orbital = rovernav::terrain::derive_orbital_map(&truth, 0.5).unwrap();
    let local = truth
        .crop(140, 120, 120, 120)
        .unwrap()
        .translated(rovernav::Point2::new(2.0, 1.0));
    write_asc(&orbital, dir.path().join("o.asc")).unwrap();
    write_asc(&local, dir.path().join("l.asc")).unwrap();
    let scores = dir.path().join("scores.csv");
    let out = cli(&[
        "match",
        dir.path().join("l.asc").to_str().unwrap(),
        dir.path().join("o.asc").to_str().unwrap(),
        "--metric",
        "ncc",
        "--out",
        scores.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("accepted=true"), "{text}");
    // 0.1 m cells 140 and 120 land on 0.5 m cells 28 and 24.
    assert!(text.contains("offset=(28,24)"), "{text}");
    assert!(scores.exists());
}
