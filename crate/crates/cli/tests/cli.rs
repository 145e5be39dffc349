use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stringnet"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &TempDir, name: &str, value: &Value) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn gaussian(center: f64, width: f64, amplitude: f64) -> Value {
    json!({"kind": "gaussian", "center": center, "width": width, "amplitude": amplitude})
}

fn star(speeds: &[f64], alpha: Value, bc: &str) -> Value {
    let edges: Vec<Value> = speeds
        .iter()
        .enumerate()
        .map(|(i, &c)| json!({"from": if i == 0 { 0 } else { 1 }, "to": i + 1, "speed": c}))
        .collect();
    json!({"nodes": speeds.len() + 1, "edges": edges, "alpha": alpha, "root_bc": bc})
}

fn bone(alpha: (f64, f64)) -> Value {
    json!({
        "nodes": 6,
        "edges": [
            {"from": 0, "to": 1, "speed": 1.0},
            {"from": 1, "to": 2, "speed": 1.0},
            {"from": 1, "to": 3, "speed": 1.0},
            {"from": 2, "to": 4, "speed": 1.0},
            {"from": 2, "to": 5, "speed": 1.0}
        ],
        "alpha": {"1": alpha.0, "2": alpha.1},
        "root_bc": "transparent"
    })
}

#[test]
fn validate_accepts_star() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &json!({"network": star(&[1.0, 1.0, 1.0], json!(1.0), "dirichlet")}));
    let o = run(&["validate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("valid network: 4 nodes, 3 edges"));
}

#[test]
fn validate_rejects_alpha_equal_to_degree() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &json!({"network": star(&[1.0, 1.0, 1.0], json!(3.0), "dirichlet")}));
    let o = run(&["validate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("node 1"), "{}", stderr(&o));
}

#[test]
fn validate_rejects_cycle_as_topology() {
    let dir = TempDir::new().unwrap();
    let net = json!({
        "nodes": 4,
        "edges": [
            {"from": 0, "to": 1, "speed": 1.0},
            {"from": 1, "to": 2, "speed": 1.0},
            {"from": 2, "to": 3, "speed": 1.0},
            {"from": 3, "to": 1, "speed": 1.0}
        ],
        "alpha": 0.0,
        "root_bc": "dirichlet"
    });
    let cfg = write_config(&dir, "c.json", &json!({"network": net}));
    assert_eq!(run(&["validate"], &cfg, dir.path()).status.code(), Some(3));
}

#[test]
fn config_and_io_errors() {
    let dir = TempDir::new().unwrap();
    let mut value = json!({"network": star(&[1.0, 1.0], json!(0.0), "neumann")});
    value["network"]["edges"][1]["sped"] = json!(2.0);
    let cfg = write_config(&dir, "c.json", &value);
    let o = run(&["validate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("c.json") && err.contains("network.edges[1]"), "{err}");

    let missing = dir.path().join("absent.json");
    assert_eq!(run(&["validate"], &missing, dir.path()).status.code(), Some(5));
    assert_eq!(bin().arg("bogus").output().unwrap().status.code(), Some(1));
}

#[test]
fn timing_of_reference_tree() {
    let dir = TempDir::new().unwrap();
    let o = run(&["timing"], &configs().join("reference_tree.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("root time T(R) = 5\n"));
    assert!(text.contains("tree time T(T) = 7\n"));
    let (header, rows) = read_csv(&dir.path().join("leaves.csv"));
    assert_eq!(header, ["node", "root_time"]);
    let mut leaf_times: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] != "0")
        .map(|r| r[1].parse().unwrap())
        .collect();
    leaf_times.sort_by(f64::total_cmp);
    assert_eq!(leaf_times, [5.0, 6.0, 6.0, 7.0, 7.0, 7.0, 7.0]);
}

#[test]
fn timing_of_small_trees() {
    let dir = TempDir::new().unwrap();
    let single = write_config(&dir, "one.json", &json!({"network": star(&[4.0], json!(0.0), "dirichlet")}));
    let text = stdout(&run(&["timing"], &single, dir.path()));
    assert!(text.contains("root time T(R) = 0.25\n") && text.contains("tree time T(T) = 0.25\n"), "{text}");

    let speeds: [f64; 3] = [2.0, 1.0, 4.0];
    // Root edge plus the slower pendant.
    let expected = 1.0 / speeds[0] + (1.0 / speeds[1]).max(1.0 / speeds[2]);
    let cfg = write_config(&dir, "star.json", &json!({"network": star(&speeds, json!(1.0), "dirichlet")}));
    let text = stdout(&run(&["timing"], &cfg, dir.path()));
    assert!(text.contains(&format!("root time T(R) = {expected}\n")), "{text}");
}

#[test]
fn length_rescaling_is_reported() {
    let dir = TempDir::new().unwrap();
    let o = run(&["timing"], &configs().join("rescaled_star.json"), dir.path());
    let text = stdout(&o);
    assert!(text.contains("rescaled edge 0-1: length 2 with speed 2 becomes unit length with speed 1"));
    // Travel times are length / speed: 1 + max(0.5, 0.25).
    assert!(text.contains("root time T(R) = 1.5\n"), "{text}");
}

#[test]
fn simulate_fts_star_reports_extinction() {
    let dir = TempDir::new().unwrap();
    let o = run(&["simulate"], &configs().join("star_dirichlet.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("extinct at t ≤ 4.000"), "{}", stdout(&o));
    let (header, rows) = read_csv(&dir.path().join("energy.csv"));
    assert_eq!(header, ["t", "E", "sup_s", "sup_d"]);
    assert_eq!(rows.len(), 8001);
    let (header, _) = read_csv(&dir.path().join("nodes.csv"));
    assert_eq!(header, ["t", "v_1"]);
    let (header, rows) = read_csv(&dir.path().join("snapshot_001.csv"));
    assert_eq!(header, ["edge", "x", "u", "s", "d"]);
    // At t = 4 the state is gone.
    for r in rows {
        for v in &r[2..] {
            assert!(v.parse::<f64>().unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn simulate_undamped_bone_does_not_extinguish() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({
            "network": bone((0.0, 0.0)),
            "initial": {"eigen": {"k": 0}},
            "dt": 0.01,
            "horizon": 10.0
        }),
    );
    let o = run(&["simulate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("no extinction within horizon"));
}

#[test]
fn stride_thins_the_trace() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({
            "network": star(&[1.0, 1.0, 1.0], json!(0.5), "neumann"),
            "initial": {"edges": [{"edge": [1, 2], "displacement": gaussian(0.5, 0.06, 1.0)}]},
            "dt": 0.01,
            "horizon": 1.05
        }),
    );
    let o = run(&["simulate", "--stride", "10"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("energy.csv"));
    let t: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    // 105 steps: every 10th from 0, then the final step.
    let expected: Vec<f64> = (0..=10).map(|k| (10 * k) as f64 * 0.01).chain([1.05]).collect();
    assert_eq!(t.len(), expected.len());
    for (a, b) in t.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn outputs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = configs().join("star_dirichlet.json");
    for dir in [&a, &b] {
        assert_eq!(run(&["simulate"], &cfg, dir.path()).status.code(), Some(0));
    }
    for name in ["energy.csv", "nodes.csv", "snapshot_000.csv", "snapshots.csv", "edges.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn csv_numbers_have_seventeen_significant_digits() {
    let dir = TempDir::new().unwrap();
    run(&["simulate"], &configs().join("star_dirichlet.json"), dir.path());
    let (_, rows) = read_csv(&dir.path().join("energy.csv"));
    for field in rows.iter().take(50).flatten() {
        assert!(!field.contains('e') && !field.contains('E'), "{field}");
        let digits: String = field.chars().filter(char::is_ascii_digit).collect();
        let significant = digits.trim_start_matches('0');
        if !significant.is_empty() {
            assert_eq!(significant.len(), 17, "{field}");
        }
    }
}

#[test]
fn incommensurable_step_exits_with_timestep_code() {
    let dir = TempDir::new().unwrap();
    let o = run(&["simulate", "--dt", "0.0007"], &configs().join("star_dirichlet.json"), dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn spectrum_of_undamped_star() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({"network": star(&[1.0, 1.0, 1.0], json!(0.0), "dirichlet"), "spectrum": {"k_min": 0, "k_max": 1}}),
    );
    let o = run(&["spectrum"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("spectrum.csv"));
    assert_eq!(header, ["k", "re", "im", "residual"]);
    let re: f64 = rows[0][1].parse().unwrap();
    // e^{2 lambda} = (N - 2 - alpha) / (N - alpha) with N = 3.
    assert!((re - 0.5 * (1.0f64 / 3.0).ln()).abs() < 1e-12);
    let im: f64 = rows[1][2].parse().unwrap();
    assert!((im - std::f64::consts::PI).abs() < 1e-12);
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap() < 1e-10);
    }
}

#[test]
fn sweep_flips_exactly_at_alpha_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &json!({"network": star(&[1.0, 1.0, 1.0], json!(0.0), "dirichlet")}));
    let o = run(&["spectrum", "--sweep", "alpha1=-1:2.5:0.5"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(header, ["alpha1", "re_lambda0", "exists"]);
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let alpha: f64 = r[0].parse().unwrap();
        assert_eq!(r[2] == "false", alpha == 1.0, "{r:?}");
    }
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = configs().join("bone_undamped.json");
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let o = bin()
            .env("STRINGNET_THREADS", threads)
            .args(["spectrum", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let x = std::fs::read(a.path().join("sweep.csv")).unwrap();
    assert_eq!(x, std::fs::read(b.path().join("sweep.csv")).unwrap());

    let o = bin()
        .env("STRINGNET_THREADS", "zero")
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(a.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bone_on_the_critical_line_has_no_point_spectrum() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &json!({"network": bone((1.0, 1.0))}));
    let o = run(&["spectrum"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("no point spectrum; finite-time stable"));
}

#[test]
fn spectrum_of_ill_posed_network_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &json!({"network": bone((3.0, 0.0))}));
    assert_eq!(run(&["spectrum"], &cfg, dir.path()).status.code(), Some(2));
}

#[test]
fn crosscheck_smooth_star() {
    let dir = TempDir::new().unwrap();
    let o = run(&["crosscheck"], &configs().join("crosscheck_star.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("crosscheck.csv"));
    assert_eq!(header[..3], ["t", "cells", "relative_l2"]);
    let coarse: f64 = rows[0][2].parse().unwrap();
    let fine: f64 = rows[1][2].parse().unwrap();
    assert_eq!((rows[0][1].as_str(), rows[1][1].as_str()), ("400", "800"));
    assert!(coarse < 0.02, "{coarse}");
    let ratio = coarse / fine;
    assert!((3.0..=5.0).contains(&ratio), "{ratio}");
}

#[test]
fn crosscheck_zero_data() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({
            "network": star(&[1.0, 1.0, 1.0], json!(0.5), "dirichlet"),
            "crosscheck": {"cells": 40, "times": [0.5], "dt": 0.01}
        }),
    );
    let o = run(&["crosscheck"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("crosscheck.csv"));
    for r in rows {
        for v in &r[2..] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
    }
}
