use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn mcontent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcontent"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_vec(v).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn square_config(bbox: Option<Value>) -> Value {
    let mut grid = json!({ "h": 1.0 / 1024.0 });
    if let Some(b) = bbox {
        grid["bbox"] = b;
    }
    json!({
        "shape": { "type": "box", "min": [0, 0], "max": [1, 1] },
        "grid": grid,
        "q": { "type": "ball", "center": [0, 0], "radius": 1 },
        "schedule": { "r_max": 0.0625, "r_min": 0.0078125, "count": 10, "snap": true }
    })
}

/// Values of column `name` in a CSV file.
fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

#[test]
fn square_estimate_fits_perimeter_four() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "square.json", &square_config(None));
    ok(&mcontent(dir.path(), &["estimate", "--config", cfg.to_str().unwrap(), "--out", "out"]));
    let c0 = csv_column(&dir.path().join("out/report.csv"), "fit_c0");
    assert!((c0[0] - 4.0).abs() < 0.04, "fit_c0 = {}", c0[0]);
    let report = read_json(&dir.path().join("out/report.json"));
    assert_eq!(report["report"]["trend"], "converging");
    // defaults are echoed
    assert_eq!(report["config"]["kernel_cap"], 512);
    assert!(report["config"]["grid"]["bbox"]["min"].is_array());
    assert_eq!(report["config"]["trend"]["window"], 6);
}

#[test]
fn too_small_bbox_names_the_required_one_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let bbox = json!({ "min": [-0.01, -0.01], "max": [1.01, 1.01] });
    let cfg = write_config(dir.path(), "bad.json", &square_config(Some(bbox)));
    let o = mcontent(dir.path(), &["estimate", "--config", cfg.to_str().unwrap(), "--out", "out"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("required bbox: min [-0.0625, -0.0625], max [1.0625, 1.0625]"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn schedule_below_resolution_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mut v = square_config(None);
    v["schedule"]["r_min"] = json!(0.004);
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = mcontent(dir.path(), &["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = TempDir::new().unwrap();
    let mut v = square_config(None);
    v["schedual"] = json!({});
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = mcontent(dir.path(), &["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schedual"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "square.json", &square_config(None));
    let c = cfg.to_str().unwrap();
    ok(&mcontent(dir.path(), &["estimate", "--config", c, "--out", "a", "--seed", "9"]));
    ok(&mcontent(dir.path(), &["estimate", "--config", c, "--out", "b", "--seed", "9", "--threads", "1"]));
    for f in ["report.csv", "report.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
    let seed = &read_json(&dir.path().join("a/report.json"))["config"]["seed"];
    assert_eq!(seed, 9);
}

#[test]
fn circle_sheet_content_is_its_length() {
    let dir = TempDir::new().unwrap();
    let v = json!({
        "shape": { "type": "shell", "center": [0, 0], "radius": 0.5 },
        "grid": { "h": 1.0 / 1024.0 },
        "q": { "type": "ball", "center": [0, 0], "radius": 1 },
        "schedule": { "r_max": 0.0625, "r_min": 0.0078125, "count": 8, "snap": true }
    });
    let cfg = write_config(dir.path(), "c.json", &v);
    ok(&mcontent(dir.path(), &["content", "--config", cfg.to_str().unwrap(), "--out", "o"]));
    let c0 = csv_column(&dir.path().join("o/report.csv"), "fit_c0")[0];
    assert!((c0 / PI - 1.0).abs() < 0.02, "c0 = {c0}");

    let mut solid = v.clone();
    solid["shape"]["type"] = json!("ball");
    let cfg = write_config(dir.path(), "s.json", &solid);
    let o = mcontent(dir.path(), &["content", "--config", cfg.to_str().unwrap(), "--out", "s"]);
    assert_eq!(o.status.code(), Some(2));
}

fn perimeter(dir: &Path, shape: Value, q: Value) -> Value {
    let cfg = write_config(dir, "p.json", &json!({ "shape": shape, "q": q }));
    ok(&mcontent(dir, &["perimeter", "--config", cfg.to_str().unwrap(), "--out", "p"]));
    read_json(&dir.join("p/perimeter.json"))
}

#[test]
fn perimeter_examples() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let square = json!({ "type": "box", "min": [0, 0], "max": [1, 1] });
    let p = perimeter(d, square, json!({ "type": "segment", "a": [0, 0], "b": [1, 0] }));
    assert!((p["P_Q"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((p["P_symmetral"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((p["P_iso"].as_f64().unwrap() - 4.0).abs() < 1e-12);

    let sphere = json!({ "type": "ball", "center": [0, 0, 0], "radius": 1 });
    let disk = json!({ "type": "ball", "center": [0, 0, 0], "radius": 1, "basis": [[1, 0, 0], [0, 1, 0]] });
    let p = perimeter(d, sphere, disk);
    assert!((p["P_Q"].as_f64().unwrap() - PI * PI).abs() < 1e-4 * PI * PI);

    let cube = json!({ "type": "box", "min": [0, 0, 0], "max": [1, 1, 1] });
    let p = perimeter(d, cube, json!({ "type": "ball", "center": [0, 0, 0], "radius": 1 }));
    assert!((p["P_Q"].as_f64().unwrap() - 6.0).abs() < 1e-12);

    let cfg = write_config(
        d,
        "sheet.json",
        &json!({ "shape": { "type": "shell", "center": [0, 0], "radius": 1 }, "q": { "type": "ball", "center": [0, 0], "radius": 1 } }),
    );
    let o = mcontent(d, &["perimeter", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_edge_cases_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = write_config(d, "one.json", &json!({ "t_min": 1.0 }));
    ok(&mcontent(d, &["generate", "packing3", "--config", cfg.to_str().unwrap(), "--out", "e"]));
    let p = read_json(&d.join("e/packing.json"));
    assert_eq!(p["atoms"].as_array().unwrap().len(), 0);
    assert_eq!(read_json(&d.join("e/summary.json"))["summary"]["count"], 0);

    let cfg = write_config(d, "k3.json", &json!({ "law": { "type": "power", "k": 3 } }));
    let o = mcontent(d, &["generate", "packing3", "--config", cfg.to_str().unwrap(), "--out", "k"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.join("k").exists());

    let cfg = write_config(d, "exp.json", &json!({ "law": { "type": "exp", "delta0": 0.1 } }));
    let o = mcontent(d, &["generate", "packing3", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(d, "big.json", &json!({ "t_min": 0.2 }));
    let o = mcontent(d, &["generate", "packing3", "--config", cfg.to_str().unwrap(), "--out", "big"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!d.join("big").exists());

    let cfg = write_config(d, "ex1.json", &json!({ "k": 3, "n": 4 }));
    let o = mcontent(d, &["generate", "example1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn small_packing3(d: &Path) {
    let cfg = write_config(
        d,
        "gen.json",
        &json!({ "t_min": 0.97, "max_rejections": 5000, "audit_probes": 200 }),
    );
    ok(&mcontent(d, &["generate", "packing3", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", "pk"]));
}

#[test]
fn packing_summary_matches_the_written_atoms() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_packing3(d);
    let p = read_json(&d.join("pk/packing.json"));
    let s = read_json(&d.join("pk/summary.json"));
    let atoms = p["atoms"].as_array().unwrap();
    assert!(atoms.len() > 100);
    let sum_sq: f64 = atoms.iter().map(|a| a["rho"].as_f64().unwrap().powi(2)).sum();
    let p_disk = s["summary"]["p_disk"].as_f64().unwrap();
    assert!((p_disk / (PI * PI * sum_sq) - 1.0).abs() < 1e-12);
    assert_eq!(s["config"]["seed"], 4);
    assert_eq!(p["seed"], 4);
    // every centre in the shell, every radius on the law
    for a in atoms {
        let x: Vec<f64> = a["x"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let t = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((0.97..=1.0).contains(&t));
        let delta = t.powi(4) / 128.0;
        assert!((a["delta"].as_f64().unwrap() / delta - 1.0).abs() < 1e-12);
    }
}

#[test]
fn afp_and_planar_estimate_on_a_small_packing() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_packing3(d);
    let cfg = write_config(d, "afp.json", &json!({ "packing": "pk/packing.json", "points": 100 }));
    ok(&mcontent(d, &["afp", "--config", cfg.to_str().unwrap(), "--out", "afp"]));
    let r = read_json(&d.join("afp/afp.json"));
    assert_eq!(r["report"]["pass"], true);
    assert!(r["report"]["gamma_hat"].as_f64().unwrap() > 0.0);
    assert!(r["report"]["samples"].as_array().unwrap().len() >= 100);

    ok(&mcontent(d, &["afp", "--isotropic", "--config", cfg.to_str().unwrap(), "--out", "iso"]));
    let iso = read_json(&d.join("iso/iso_afp.json"));
    assert_eq!(iso["isotropic"]["points"].as_array().unwrap().len(), 8);

    let est = json!({
        "packing": "pk/packing.json",
        "q": { "type": "ball", "center": [0, 0, 0], "radius": 1, "basis": [[1, 0, 0], [0, 1, 0]] },
        "schedule": { "r_max": 1e-6, "r_min": 1e-8, "count": 6 }
    });
    let cfg = write_config(d, "est.json", &est);
    ok(&mcontent(d, &["estimate", "--config", cfg.to_str().unwrap(), "--out", "est"]));
    let p = read_json(&d.join("pk/packing.json"));
    let sum_sq: f64 = p["atoms"].as_array().unwrap().iter().map(|a| a["rho"].as_f64().unwrap().powi(2)).sum();
    let c0 = read_json(&d.join("est/report.json"))["report"]["c0"].as_f64().unwrap();
    assert!((c0 / (PI * PI * sum_sq) - 1.0).abs() < 0.05, "c0 = {c0}");
}

#[test]
fn afp_on_an_empty_packing_fails() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = write_config(d, "one.json", &json!({ "t_min": 1.0 }));
    ok(&mcontent(d, &["generate", "packing3", "--config", cfg.to_str().unwrap(), "--out", "e"]));
    let cfg = write_config(d, "afp.json", &json!({ "packing": "e/packing.json" }));
    let o = mcontent(d, &["afp", "--config", cfg.to_str().unwrap(), "--out", "afp"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no boundary"));
    assert!(!d.join("afp").exists());
}

#[test]
fn scene_estimate_diverges() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = write_config(d, "g.json", &json!({ "t_min": 0.8, "max_rejections": 5000, "audit_probes": 100 }));
    ok(&mcontent(d, &["generate", "example2", "--config", cfg.to_str().unwrap(), "--out", "x"]));
    assert_eq!(read_json(&d.join("x/summary.json"))["scene_min_gap"], 2.0);
    let est = json!({
        "scene": "x/scene.json",
        "q": { "type": "ball", "center": [0, 0, 0], "radius": 1 },
        "schedule": { "r_max": 0.25, "r_min": 0.015625, "count": 8 }
    });
    let cfg = write_config(d, "est.json", &est);
    ok(&mcontent(d, &["estimate", "--config", cfg.to_str().unwrap(), "--out", "est"]));
    let r = read_json(&d.join("est/report.json"));
    assert_eq!(r["report"]["trend"], "diverging");

    let mut far = est.clone();
    far["schedule"]["r_max"] = json!(1.5);
    let cfg = write_config(d, "far.json", &far);
    let o = mcontent(d, &["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn example1_slope_is_perimeter_times_volume() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        "g.json",
        &json!({ "t_min": 0.8, "max_rejections": 5000, "audit_probes": 100, "factor": { "type": "disk", "radius": 0.5 } }),
    );
    ok(&mcontent(d, &["generate", "example1", "--config", cfg.to_str().unwrap(), "--out", "x"]));
    let s = read_json(&d.join("x/summary.json"));
    let ex = &s["example1"];
    assert!((ex["c_perimeter"].as_f64().unwrap() - PI).abs() < 1e-12);
    let vol = s["summary"]["volume"].as_f64().unwrap();
    assert!((ex["slope"].as_f64().unwrap() - PI * vol).abs() < 1e-15);
}

#[test]
fn square_covariogram_slope() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for (name, u) in [("plus", json!([1, 0])), ("minus", json!([-1, 0]))] {
        let v = json!({
            "shape": { "type": "box", "min": [0, 0], "max": [1, 1] },
            "grid": { "h": 1.0 / 256.0 },
            "u": u
        });
        let cfg = write_config(d, "c.json", &v);
        ok(&mcontent(d, &["covariogram", "--config", cfg.to_str().unwrap(), "--out", name]));
        let r = read_json(&d.join(name).join("covariogram.json"));
        assert!((r["slope"].as_f64().unwrap() + 1.0).abs() < 0.02);
        let g = csv_column(&d.join(name).join("covariogram.csv"), "g");
        let t = csv_column(&d.join(name).join("covariogram.csv"), "t");
        assert_eq!((t[0], g[0]), (0.0, 1.0));
        assert_eq!(t.len(), 9);
    }
}
