use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tdhelm::export::read_nodes_csv;

fn tdhelm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdhelm"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn bad_input_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = tdhelm(&["run", "--case", "3d_cube"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("3d_cube"));
    let out = tdhelm(&["run", "--case", "1d_bump", "--levels", "1/5,3/100"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = tdhelm(&["run", "--case", "2d_bump", "--decompose"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "[problem]\ncase = \"1d_bump\"\nspeed = 3\n").unwrap();
    let out = tdhelm(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn aborted_run_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("short.toml"), "[problem]\ncase = \"1d_bump\"\n[driver]\nt_max = 0.05\n").unwrap();
    let out = tdhelm(&["run", "--config", "short.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = tdhelm(&["run", "--case", "1d_bump", "--omega", "10pi", "--out-dir", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("res/1d_bump_omega10pi");

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["m"], 28);
    assert_eq!(report["config"]["case"], "1d_bump");
    assert!(report["err2"].as_f64().unwrap() > 0.0);

    let nodes = read_nodes_csv(fs::read_to_string(run.join("field_nodes.csv")).unwrap().as_bytes()).unwrap();
    assert_eq!(nodes.len(), 221);
    assert!(nodes.iter().any(|(_, v)| v.norm() > 1e-3));

    let raster = fs::read_to_string(run.join("field_raster.txt")).unwrap();
    let header: Vec<&str> = raster.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(&header[..3], &["#", "111", "1"]);
    assert_eq!(raster.lines().filter(|l| !l.starts_with('#')).count(), 111);
    assert!(raster.lines().last().unwrap().starts_with("# config {"));

    let levels = fs::read_to_string(run.join("level_map.txt")).unwrap();
    assert_eq!(levels.lines().count(), 2);

    let table = fs::read_to_string(dir.path().join("res/table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("1d_bump,"));
}

#[test]
fn sweep_writes_growth_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = tdhelm(&["run", "--case", "1d_bump", "--sweep", "omega=10pi,20pi", "--out-dir", "."], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("1d_bump_omega20pi/report.json").exists());
    let growth = fs::read_to_string(dir.path().join("growth.csv")).unwrap();
    let line = growth.lines().nth(1).unwrap();
    let ratio: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
    assert!(ratio > 1.0 && ratio < 1.35);
}
