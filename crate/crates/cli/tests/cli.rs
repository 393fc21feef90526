use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn morseflow(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morseflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("MORSEFLOW_OUT")
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn torus_homology_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let torus = scenario("torus.json");
    let out = morseflow(tmp.path(), &["homology", "--scenario", torus.to_str().unwrap(), "--levels", "-1,1,3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("homology");
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), dir.display().to_string());
    let h = read_json(&dir.join("homology.json"));
    assert_eq!(h["betti"], serde_json::json!([1, 2, 1]));
    let filtered: Vec<Value> = h["filtered"].as_array().unwrap().iter().map(|f| f["betti"].clone()).collect();
    assert_eq!(filtered, vec![serde_json::json!([1, 0, 0]), serde_json::json!([1, 2, 0]), serde_json::json!([1, 2, 1])]);
    let manifest = read_json(&dir.join("manifest.json"));
    assert_eq!(manifest["outputs"], serde_json::json!(["homology.json", "homology.txt"]));
    assert!(manifest["tolerances"].is_object());
}

#[test]
fn exit_codes_separate_input_from_numerical_failures() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(morseflow(tmp.path(), &["no-such-command"]).status.code(), Some(1));

    let torus = scenario("torus.json");
    let singular = morseflow(tmp.path(), &["homology", "--scenario", torus.to_str().unwrap(), "--levels", "0"]);
    assert_eq!(singular.status.code(), Some(1));

    let quartic = scenario("degenerate_quartic.json");
    let degenerate = morseflow(tmp.path(), &["critical-points", "--scenario", quartic.to_str().unwrap()]);
    assert_eq!(degenerate.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&degenerate.stderr).contains("degenerate"));

    let empty = tempfile::tempdir().unwrap();
    let report = morseflow(tmp.path(), &["report", "--input", empty.path().to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(1));
}

#[test]
fn report_bundles_the_pipeline_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let torus = scenario("torus.json");
    let out = morseflow(tmp.path(), &["report", "--scenario", torus.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("report");
    let r = read_json(&dir.join("report.json"));
    let s = &r["summary"];
    assert_eq!(s["critical_points"], 4);
    assert_eq!(s["critical_points_by_index"], serde_json::json!([1, 2, 1]));
    assert_eq!(s["connections"], 8);
    assert_eq!(s["arcs"], 4);
    assert_eq!(s["broken_pairs"], 8);
    assert_eq!(s["betti"], serde_json::json!([1, 2, 1]));
    for f in ["moduli_connections.csv", "moduli_arcs.csv", "anchors.csv", "betti.txt", "manifest.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn outputs_are_deterministic() {
    let torus = scenario("torus.json");
    let run = || {
        let tmp = tempfile::tempdir().unwrap();
        let out = morseflow(tmp.path(), &["moduli", "--scenario", torus.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let dir = tmp.path().join("moduli");
        let mut names: Vec<String> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != "manifest.json")
            .collect();
        names.sort();
        names.into_iter().map(|n| (fs::read(dir.join(&n)).unwrap(), n)).collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn output_root_can_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let paraboloid = scenario("paraboloid.json");
    let out = Command::new(env!("CARGO_BIN_EXE_morseflow"))
        .args(["critical-points", "--scenario", paraboloid.to_str().unwrap()])
        .env("MORSEFLOW_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let points = read_json(&tmp.path().join("critical-points/critical_points.json"));
    assert_eq!(points.as_array().unwrap().len(), 1);
    assert_eq!(points[0]["index"], 0);
}
