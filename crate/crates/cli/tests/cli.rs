use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn boxvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxvi"))
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn solve_const_two_is_nodally_exact() {
    let doc = json(&boxvi(&[
        "solve",
        "--set",
        "mesh.n=40",
        "--set",
        "problem.f=const:2",
    ]));
    let y = floats(&doc["y"]);
    let nodes = doc["nodes"].as_array().unwrap();
    for (v, x) in y.iter().zip(nodes) {
        let x = x[0].as_f64().unwrap();
        assert!((v - x * (1.0 - x) / 2.0).abs() <= 1e-12);
    }
    assert!(floats(&doc["q"]).iter().all(|&q| q == 1.0));
    assert!(doc["cross_check_gap"].as_f64().unwrap() < 1e-10);
    assert!(doc["flags"].as_array().unwrap().is_empty());
}

#[test]
fn solve_half_load_is_flagged() {
    let doc = json(&boxvi(&["solve", "--set", "problem.f=const:0.5"]));
    assert!(floats(&doc["y"]).iter().all(|&v| v == 0.0));
    assert_eq!(doc["flags"][0], "inactive-interior");
}

#[test]
fn config_file_and_override_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[mesh]\nn = 10\n\n[problem]\nf = \"const:-2\"\n").unwrap();
    let c = cfg.to_str().unwrap();
    let doc = json(&boxvi(&["solve", "--config", c]));
    assert_eq!(doc["mesh"]["n"], 10);
    assert!(floats(&doc["q"]).iter().all(|&q| q == -1.0));
    let doc = json(&boxvi(&["solve", "--config", c, "--set", "mesh.n=12"]));
    assert_eq!(doc["mesh"]["n"], 12);
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let out = boxvi(&["solve", "--set", "problem.f=const:abc"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem.f"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[mesh]\nn = 10\ncolour = \"red\"\n").unwrap();
    let out = boxvi(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = boxvi(&[
        "solve",
        "--set",
        "mesh.n=9",
        "--set",
        "mesh.alignment=aligned",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = boxvi(&[
        "witness",
        "--set",
        "witness.elements=101",
        "--set",
        "witness.n_list=[32]",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolved"));
}

#[test]
fn derivative_cases_and_fd_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let o = out.to_str().unwrap();
    let run = boxvi(&[
        "derivative",
        "--out",
        o,
        "--set",
        "mesh.n=16",
        "--set",
        "problem.f=const:2",
    ]);
    assert!(run.status.success());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let delta = floats(&doc["delta"]);
    for (d, x) in delta.iter().zip(doc["nodes"].as_array().unwrap()) {
        let x = x[0].as_f64().unwrap();
        assert!((d - x * (1.0 - x) / 2.0).abs() <= 1e-10);
    }
    let csv = std::fs::read_to_string(format!("{o}.fd.csv")).unwrap();
    assert!(csv.starts_with("t,err\n"));
    assert_eq!(csv.lines().count(), 6);

    let doc = json(&boxvi(&[
        "derivative",
        "--set",
        "problem.f=const:1",
        "--set",
        "problem.g=const:-1",
        "--set",
        "derivative.t_list=[]",
    ]));
    assert!(floats(&doc["delta"]).iter().all(|&d| d == 0.0));
    assert!(doc.get("fd").is_none());
}

#[test]
fn capacity_values_and_monotonicity() {
    let cap = |extra: &[&str]| {
        let mut args = vec!["capacity", "--set", "mesh.n=512"];
        args.extend_from_slice(extra);
        json(&boxvi(&args))["capacity"].as_f64().unwrap()
    };
    let point = cap(&["--set", "capacity.points=[[0.5]]"]);
    assert!((point / (2.0 / 0.5_f64.tanh()) - 1.0).abs() < 0.01);
    let empty = cap(&[]);
    assert_eq!(empty, 0.0);
    let inner = cap(&["--set", "capacity.regions=[{lo=[0.4], hi=[0.6]}]"]);
    let outer = cap(&["--set", "capacity.regions=[{lo=[0.25], hi=[0.75]}]"]);
    assert!(point <= inner && inner <= outer);
    assert!((outer / (2.0 / 0.25_f64.tanh() + 0.5) - 1.0).abs() < 0.01);
}

#[test]
fn witness_csv_and_side_file_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let run = boxvi(&[
        "witness",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "witness.alignment=aligned",
    ]);
    assert!(run.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "alignment,h,n,d1,pairing,d2,z_supnorm,cap_node"
    );
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let h: f64 = cols[1].parse().unwrap();
        let z: f64 = cols[6].parse().unwrap();
        assert!((z * h - 0.5).abs() < 0.01);
    }
    assert!(!Path::new(&format!("{}.fd.csv", out.display())).exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    for args in [
        &["solve", "--set", "problem.f=sin:3", "--set", "mesh.n=33"][..],
        &["derivative", "--set", "problem.f=const:1"][..],
        &["witness"][..],
        &["capacity", "--set", "capacity.points=[[0.3]]"][..],
    ] {
        let a = boxvi(args);
        let b = boxvi(args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
    }
}
