use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringmodes"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn spectrum_from_inline_ring() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--ring", "N=20,R=0.1599,pol=transverse"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = dir.path().join("spectrum.csv");
    let header = std::fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(
        header,
        "m,branch,omega_over_Gamma0,gamma_over_Gamma0,occupation_component_1"
    );
    let table = rows(&csv);
    assert_eq!(table.len(), 20);
    let brightest = table
        .iter()
        .max_by(|a, b| a[3].parse::<f64>().unwrap().total_cmp(&b[3].parse::<f64>().unwrap()))
        .unwrap();
    assert_eq!(brightest[0], "0");
    let summary = json(&dir.path().join("spectrum.json"));
    assert_eq!(summary["brightest"]["m"], 0);
    assert!(summary["sum_rule_residuals"]["gamma"].as_f64().unwrap() < 1e-9);
    assert!(summary["sum_rule_residuals"]["omega"].as_f64().unwrap() < 1e-9);
    let manifest = json(&dir.path().join("spectrum.manifest.json"));
    assert_eq!(manifest["command"], "spectrum");
    assert_eq!(manifest["geometry_hash"], summary["geometry_hash"]);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn spectrum_of_lh2() {
    let dir = tempfile::tempdir().unwrap();
    let lh2 = data("lh2.json");
    let o = run(dir.path(), &["--geometry", lh2.to_str().unwrap(), "spectrum"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = rows(&dir.path().join("spectrum.csv"));
    assert_eq!(table.len(), 27);
    for b in ["0", "1", "2"] {
        assert_eq!(table.iter().filter(|r| r[1] == b).count(), 9);
    }
    let mut bright: Vec<&str> = table
        .iter()
        .filter(|r| r[1] == "0" && r[3].parse::<f64>().unwrap() > 1.0)
        .map(|r| r[0].as_str())
        .collect();
    bright.sort();
    assert_eq!(bright, ["-1", "1"]);
}

#[test]
fn oracle_check_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    for file in ["stacked_pair.json", "lh2.json"] {
        let path = data(file);
        let o = run(dir.path(), &["--geometry", path.to_str().unwrap(), "oracle-check"]);
        assert!(o.status.success(), "{file}: {}", stderr(&o));
        assert!(stdout(&o).lines().any(|l| l == "PASS"), "{}", stdout(&o));
    }
    let report = json(&dir.path().join("oracle.json"));
    assert_eq!(report["verdict"], "PASS");

    let pair = data("stacked_pair.json");
    let report_path = dir.path().join("oracle.json");
    let o = run(dir.path(), &["--geometry", pair.to_str().unwrap(), "oracle-check"]);
    assert!(o.status.success());
    assert!(json(&report_path)["max_deviation"].as_f64().unwrap() < 1e-9);

    let o = run(
        dir.path(),
        &["--geometry", pair.to_str().unwrap(), "oracle-check", "--tol", "1e-30"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL"));
}

fn broken_geometry(dir: &Path) -> PathBuf {
    let mut emitters = Vec::new();
    for k in 0..6 {
        let phi = std::f64::consts::TAU * k as f64 / 6.0;
        let r = if k == 2 { 0.21 } else { 0.2 };
        emitters.push(serde_json::json!({
            "cell": k, "component": 0,
            "position": [r * phi.cos(), r * phi.sin(), 0.0],
            "dipole": [0.0, 0.0, 1.0]
        }));
    }
    let doc = serde_json::json!({ "n_cells": 6, "emitters": emitters });
    let path = dir.join("broken.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    path
}

#[test]
fn broken_symmetry_is_gated() {
    let dir = tempfile::tempdir().unwrap();
    let broken = broken_geometry(dir.path());
    let g = broken.to_str().unwrap();
    let o = run(dir.path(), &["--geometry", g, "oracle-check"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "oracle-only"));
    let o = run(dir.path(), &["--geometry", g, "spectrum"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not C6-symmetric"), "{}", stderr(&o));
    let o = run(dir.path(), &["--geometry", g, "validate-geometry"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("\"symmetric\": false"));
    let lh2 = data("lh2.json");
    let o = run(dir.path(), &["--geometry", lh2.to_str().unwrap(), "validate-geometry"]);
    assert!(o.status.success());
}

#[test]
fn fieldmaps_and_selectors() {
    let dir = tempfile::tempdir().unwrap();
    let stack = [
        "--ring",
        "N=9,d=0.1,pol=tangential",
        "--ring",
        "N=9,d=0.1,z=0.2,pol=tangential",
    ];
    let mut args = vec!["fieldmap"];
    args.extend(stack);
    args.extend([
        "--mode",
        "m=1,sym=symmetric",
        "--plane",
        "z",
        "--offset",
        "0.1",
        "--resolution",
        "21",
    ]);
    let o = run(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let stem = "fieldmap_m1_symmetric_z0.1";
    let table = rows(&dir.path().join(format!("{stem}.csv")));
    assert_eq!(table.len(), 21 * 21);
    assert_eq!(table[0].len(), 10);
    let meta = json(&dir.path().join(format!("{stem}.json")));
    assert_eq!(meta["plane"]["axis"], "z");
    assert_eq!(meta["mode"]["m"], 1);
    assert!(dir.path().join(format!("{stem}.manifest.json")).exists());

    let mut args = vec!["fieldmap"];
    args.extend(stack);
    args.extend([
        "--mode",
        "m=4,sym=anti",
        "--plane",
        "y",
        "--resolution",
        "11",
        "--stem",
        "dark",
    ]);
    let o = run(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let header = std::fs::read_to_string(dir.path().join("dark.csv")).unwrap();
    assert!(header.starts_with("x,z,Ex_re"));

    let mut args = vec!["fieldmap"];
    args.extend(stack);
    args.extend(["--mode", "m=7"]);
    let o = run(dir.path(), &args);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("valid selectors") && err.contains("m=4,sym=antisymmetric"),
        "{err}"
    );
}

#[test]
fn input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["spectrum", "--ring", "N=9"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["--geometry", "/nonexistent/geometry.json", "spectrum"]);
    assert_eq!(o.status.code(), Some(1));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n_cells\": 9, \"rings\": [{\"radius\": }]}").unwrap();
    let o = run(dir.path(), &["--geometry", bad.to_str().unwrap(), "spectrum"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
    let o = run(dir.path(), &["spectrum", "--ring", "N=4,R=0.1", "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweeps_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = data("sweeps/delta_transverse.json");
    let o = run(dir.path(), &["sweep", spec.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = json(&dir.path().join("delta_transverse.json"));
    let dc = summary["crossing"]["critical_value"].as_f64().unwrap();
    assert!((dc - 0.15).abs() < 0.05, "{dc}");
    assert!(dir.path().join("delta_transverse.gp").exists());
    assert_eq!(rows(&dir.path().join("delta_transverse.csv")).len(), 400);
    let manifest = json(&dir.path().join("delta_transverse.manifest.json"));
    assert_eq!(manifest["command"], "sweep");

    let spec = data("sweeps/n_scaling.json");
    let o = run(dir.path(), &["sweep", spec.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = json(&dir.path().join("n_scaling.json"));
    for f in summary["fits"].as_array().unwrap() {
        assert!(f["fit"]["slope"].as_f64().unwrap() < 0.0);
    }
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    let lh2 = data("lh2.json");
    let sweep = data("sweeps/alpha_lh2.json");
    for (dir, t) in [(&one, "1"), (&four, "4")] {
        let o = run(
            dir.path(),
            &["--threads", t, "--geometry", lh2.to_str().unwrap(), "spectrum"],
        );
        assert!(o.status.success());
        let o = run(dir.path(), &["--threads", t, "sweep", sweep.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut args = vec!["--threads", t, "fieldmap", "--ring", "N=9,d=0.1,pol=tangential"];
        args.extend(["--mode", "m=1", "--resolution", "31", "--stem", "map"]);
        let o = run(dir.path(), &args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in [
        "spectrum.csv",
        "spectrum.json",
        "alpha_lh2.csv",
        "alpha_lh2.json",
        "map.csv",
        "map.json",
    ] {
        let a = std::fs::read(one.path().join(f)).unwrap();
        let b = std::fs::read(four.path().join(f)).unwrap();
        assert!(a == b, "{f} differs between thread counts");
    }
}
