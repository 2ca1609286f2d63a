use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn pdebs(args: &[&str], output_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pdebs"));
    cmd.args(args).env_remove("PDEBS_OUTPUT_DIR");
    if let Some(dir) = output_dir {
        cmd.env("PDEBS_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_square() -> Value {
    json!({
        "v": 1,
        "plant": { "epsilon": 1.0, "lambda": 5.0, "c": 1.0 },
        "geometry": { "kind": "square" },
        "grid": { "nx": 16, "ny": 16 },
        "time": { "dt": 0.001, "t_final": 20.0, "record_every": 20 }
    })
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn budget_reports_threshold_and_count() {
    let out = pdebs(
        &["budget", "--epsilon", "1", "--lambda", "25", "--c", "1"],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert!((v["n0"].as_f64().unwrap() - 1.623).abs() < 1e-3);
    assert_eq!(v["n"], 2);
    assert_eq!(v["geometry"], "square");
}

#[test]
fn budget_with_sector_dimensions() {
    let out = pdebs(
        &[
            "budget",
            "--epsilon",
            "1",
            "--lambda",
            "10",
            "--c",
            "2",
            "--theta1",
            "0",
            "--theta2",
            "1.5",
            "--radius",
            "1",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    let expected = 12f64.sqrt() * 1.5 / std::f64::consts::PI;
    assert!((v["n0"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(v["n"], 2);
    assert_eq!(v["geometry"], "sector");
}

#[test]
fn selfcheck_passes() {
    let out = pdebs(&["selfcheck"], None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 4);
}

#[test]
fn missing_config_is_a_config_error() {
    let out = pdebs(&["square", "--config", "definitely-missing.json"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(stderr(&out).contains("No such file"), "{}", stderr(&out));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut cases = Vec::new();

    let mut unknown = small_square();
    unknown["plant"]["lamda"] = json!(3.0);
    cases.push((unknown, "plant"));

    let mut version = small_square();
    version["v"] = json!(2);
    cases.push((version, "`v`"));

    let mut grid = small_square();
    grid["grid"] = json!({ "nx": 16 });
    cases.push((grid, "grid.ny"));

    let mut foreign = small_square();
    foreign["grid"]["nr"] = json!(8);
    cases.push((foreign, "grid.nr"));

    let mut negative = small_square();
    negative["plant"]["c"] = json!(-1.0);
    cases.push((negative, "plant.c"));

    let mut dt = small_square();
    dt["time"]["dt"] = json!(0.0);
    cases.push((dt, "time.dt"));

    for (i, (cfg, key)) in cases.into_iter().enumerate() {
        let path = write_config(dir.path(), &format!("bad{i}.json"), &cfg);
        let out = pdebs(&["square", "--config", &path], None);
        assert_eq!(out.status.code(), Some(1), "case {i}: {}", stderr(&out));
        assert!(stderr(&out).contains(key), "case {i}: {}", stderr(&out));
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn geometry_must_match_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "sq.json", &small_square());
    let out = pdebs(&["sector", "--config", &path], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("geometry.kind"));
}

#[test]
fn square_run_writes_outputs_to_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_square();
    cfg["output"] = json!({ "dir": dir.path().join("ignored") });
    let path = write_config(dir.path(), "small.json", &cfg);
    let target = dir.path().join("from-env");
    let out = pdebs(&["square", "--config", &path], Some(&target));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["scenario"], "small");
    assert_eq!(v["pass"], true);
    assert!(v["rate"].as_f64().unwrap() >= 0.9);
    for f in ["norms.csv", "profile.csv", "snapshot.csv", "report.json"] {
        assert!(target.join(f).is_file(), "{f} missing");
    }
    assert!(!dir.path().join("ignored").exists());
    let norms = std::fs::read_to_string(target.join("norms.csv")).unwrap();
    assert!(norms.starts_with("t,l2,h1\n"));
}

#[test]
fn several_configs_give_an_array() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (i, lambda) in [3.0, 6.0].into_iter().enumerate() {
        let mut cfg = small_square();
        cfg["name"] = json!(format!("run{i}"));
        cfg["plant"]["lambda"] = json!(lambda);
        paths.push(write_config(dir.path(), &format!("c{i}.json"), &cfg));
    }
    let out = pdebs(
        &[
            "square", "--config", &paths[0], "--config", &paths[1], "--jobs", "2",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    let names: Vec<_> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["scenario"].clone())
        .collect();
    assert_eq!(names, vec![json!("run0"), json!("run1")]);
}

#[test]
fn too_few_samples_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_square();
    cfg["time"]["record_every"] = json!(2000);
    let path = write_config(dir.path(), "sparse.json", &cfg);
    let out = pdebs(&["square", "--config", &path], None);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("sparse"));
}

#[test]
fn kernel_dump_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("k.csv");
    let out = pdebs(
        &[
            "kernel-dump",
            "--epsilon",
            "1",
            "--lambda",
            "7",
            "--c",
            "1",
            "--samples",
            "33",
            "--out",
            file.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["samples"], 33);
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("xi,value"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 33);
    assert_eq!(rows[0], (0.0, 0.0));
    // K(1, 1) = −λ₀/2 with λ₀ = 8
    assert!((rows[32].1 + 4.0).abs() < 1e-12);
}

#[test]
fn sector_kernel_needs_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("k.csv");
    let out = pdebs(
        &[
            "kernel-dump",
            "--epsilon",
            "1",
            "--lambda",
            "7",
            "--c",
            "1",
            "--geometry",
            "sector",
            "--out",
            file.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--alpha"));
}
