use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jumpset::synth::{CorpusSpec, Shape};
use serde_json::{json, Value};

fn jumpset(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumpset"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_spec(dir: &Path, spec: &CorpusSpec) -> PathBuf {
    let spec_path = dir.join(format!("{}.spec.json", spec.name));
    fs::write(&spec_path, serde_json::to_string(spec).unwrap()).unwrap();
    let out = jumpset(&["gen", s(&spec_path), "--out", s(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join(format!("{}.gf1.json", spec.name))
}

/// A small oblique step, generated through `gen`.
fn small_edge(dir: &Path) -> PathBuf {
    let shape = Shape::Halfplane {
        a: 2.0,
        b: 0.0,
        normal: vec![0.8, 0.6],
        offset: 0.0,
    };
    gen_spec(dir, &CorpusSpec::new("tiny_edge", shape, 48))
}

#[test]
fn gen_lists_the_corpus() {
    let out = jumpset(&["gen", "--list"]);
    assert_eq!(code(&out), 0);
    let names = String::from_utf8(out.stdout).unwrap();
    assert_eq!(names.lines().count(), 18);
    assert!(names.lines().any(|l| l == "extended_disk_256"));
}

#[test]
fn classify_writes_json_and_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let grid = small_edge(dir.path());
    let out_dir = dir.path().join("c");
    let out = jumpset(&["classify", s(&grid), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&out_dir.join("tiny_edge.classify.json"));
    assert_eq!(v["schema"], 1);
    assert_eq!(v["value_space"], "identity");
    let counts = v["counts"].as_object().unwrap();
    let total: u64 = counts.values().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(total, 48 * 48);
    assert!(counts["jump"].as_u64().unwrap() > 0);
    assert!(v["config"].get("out").is_none());
    let pgm = fs::read(out_dir.join("tiny_edge.classes.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n48 48\n255\n"));
    assert_eq!(pgm.len(), b"P5\n48 48\n255\n".len() + 48 * 48);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let grid = small_edge(dir.path());
    let mut runs = Vec::new();
    for workers in ["1", "4"] {
        let out_dir = dir.path().join(format!("w{workers}"));
        let common = [s(&grid), "--workers", workers, "--out", s(&out_dir)];
        for args in [vec!["classify"], vec!["esets", "--r0", "0.25"]] {
            let out = jumpset(&[args, common.to_vec()].concat());
            assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        }
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        runs.push(files);
    }
    assert!(runs[0].len() > 3);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn verify_and_cover_accept_eset_files() {
    let dir = tempfile::tempdir().unwrap();
    let grid = small_edge(dir.path());
    let out_dir = dir.path().join("e");
    let out = jumpset(&["esets", s(&grid), "--out", s(&out_dir), "--delta", "0.2", "--r0", "0.25"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let index = read_json(&out_dir.join("tiny_edge.esets.json"));
    let entry = index["esets"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["cover_pass"].is_boolean())
        .expect("an E-set with a proper cone")
        .clone();
    let file = out_dir.join(entry["file"].as_str().unwrap());
    let out = jumpset(&["verify", s(&file), "--out", s(&out_dir)]);
    let expected = if entry["violations"] == 0 { 0 } else { 1 };
    assert_eq!(code(&out), expected);
    let stem = file.file_name().unwrap().to_str().unwrap().trim_end_matches(".json");
    let v = read_json(&out_dir.join(format!("{stem}.verify.json")));
    assert_eq!(v["violation_count"], entry["violations"]);
    let out = jumpset(&["cover", s(&file), "--out", s(&out_dir)]);
    assert!(matches!(code(&out), 0 | 1));
    assert!(out_dir.join(format!("{stem}.cover.json")).exists());
}

fn point_file(dir: &Path, name: &str, points: Value) -> PathBuf {
    let path = dir.join(name);
    let body = json!({
        "points": points,
        "params": {"ball": {"center": [0.0, 0.5], "radius": 0.25}, "tau": 0.5, "r0": 0.25},
    });
    fs::write(&path, body.to_string()).unwrap();
    path
}

#[test]
fn planted_axis_pair_is_one_violation() {
    let dir = tempfile::tempdir().unwrap();
    let file = point_file(dir.path(), "axis.json", json!([[0.0, 0.0], [0.0, 0.1]]));
    let out = jumpset(&["verify", s(&file), "--out", s(dir.path()), "--guard", "0.01"]);
    assert_eq!(code(&out), 1);
    let v = read_json(&dir.path().join("axis.verify.json"));
    assert_eq!(v["violation_count"], 1);
    assert_eq!(v["violations"][0]["i"], 0);
    assert_eq!(v["violations"][0]["j"], 1);
}

#[test]
fn perpendicular_points_pass_verify() {
    let dir = tempfile::tempdir().unwrap();
    let file = point_file(dir.path(), "flat.json", json!([[0.0, 0.0], [0.1, 0.0], [-0.05, 0.0]]));
    let out = jumpset(&["verify", s(&file), "--out", s(dir.path())]);
    assert_eq!(code(&out), 0);
}

#[test]
fn planted_in_cell_pair_fails_cover() {
    let dir = tempfile::tempdir().unwrap();
    let file = point_file(dir.path(), "cell.json", json!([[0.01, 0.01], [0.01, 0.02]]));
    let out = jumpset(&["cover", s(&file), "--out", s(dir.path())]);
    assert_eq!(code(&out), 1);
    let v = read_json(&dir.path().join("cell.cover.json"));
    assert_eq!(v["failing_cells"], 1);
    assert_eq!(v["report"]["cells"][0]["infinite_slope"], true);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&jumpset(&[])), 2);
    assert_eq!(code(&jumpset(&["classify"])), 2);
    assert_eq!(code(&jumpset(&["verify", "x.json", "--guard", "abc"])), 2);
    let missing = dir.path().join("missing.gf1.json");
    assert_eq!(code(&jumpset(&["classify", s(&missing), "--out", s(dir.path())])), 3);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    assert_eq!(code(&jumpset(&["verify", s(&bad), "--out", s(dir.path())])), 3);
    let degenerate = dir.path().join("degenerate.json");
    let body = json!({"points": [[0.0, 0.0]], "params": {"ball": {"center": [0.0, 0.1], "radius": 0.5}, "tau": 0.5, "r0": 0.25}});
    fs::write(&degenerate, body.to_string()).unwrap();
    assert_eq!(code(&jumpset(&["verify", s(&degenerate), "--out", s(dir.path())])), 3);
}

#[test]
fn extended_classification_reports_phi_space() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gen_spec(dir.path(), &CorpusSpec::new("tiny_ext", Shape::ExtendedDisk { radius: 0.3 }, 128));
    // infinite payload values need the extended route
    assert_eq!(code(&jumpset(&["classify", s(&grid), "--out", s(dir.path())])), 3);
    let out = jumpset(&["classify", s(&grid), "--extended", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("tiny_ext.classify.json"));
    assert_eq!(v["value_space"], "phi");
    let jump = v["points"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["class"] == "jump")
        .expect("a jump point");
    assert_eq!(jump["a_value"], "inf");
    assert_eq!(jump["b_value"], 0.0);
}

#[test]
fn report_summarises_both_stages() {
    let dir = tempfile::tempdir().unwrap();
    let grid = small_edge(dir.path());
    let out = jumpset(&["report", s(&grid), "--out", s(dir.path()), "--delta", "0.2,0.4", "--r0", "0.25"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("tiny_edge.report.json"));
    assert!(v["decomposition"]["nonempty_esets"].as_u64().unwrap() > 0);
    assert_eq!(v["config"]["decomposition"]["deltas"], json!([0.2, 0.4]));
}
