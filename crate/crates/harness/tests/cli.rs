use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use homproj_harness::config::ProjectionChoice;
use homproj_harness::registry::{build_method, build_problem, build_projection, resolve_projection};
use homproj_harness::ExperimentConfig;
use serde_json::Value;

fn homproj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homproj")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) -> String {
    let out = homproj(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

const KEPLER_RUN: &str = r#"
name = "k"
periods = 1
stride = 5
[problem]
id = "kepler"
eccentricity = 0.5
[method]
integrator = "dop853"
rtol = 1e-9
atol = 1e-9
projection = "lh"
"#;

#[test]
fn listings_name_every_problem_and_scheme() {
    let problems = run_ok(&["list-problems"]);
    for id in ["kepler", "double-pendulum", "oscillator", "kdv", "camassa-holm"] {
        assert!(problems.contains(id), "{problems}");
    }
    let methods = run_ok(&["list-methods"]);
    for id in ["rk4", "dop853", "gauss4", "suzuki8", "adaptive-", "homogeneous", "pseudo", "newton", "alternating"] {
        assert!(methods.contains(id), "{methods}");
    }
}

#[test]
fn run_writes_record_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k", KEPLER_RUN);
    let out = dir.path().join("out");
    let printed = run_ok(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(printed.lines().count(), 2);

    let record: Value = serde_json::from_str(&std::fs::read_to_string(out.join("k.json")).unwrap()).unwrap();
    assert_eq!(record["schema"], "homproj.run/1");
    assert_eq!(record["problem"], "kepler");
    assert_eq!(record["summary"]["runs"], 1);
    assert_eq!(record["summary"]["failures"], 0);
    let run = &record["runs"][0];
    assert_eq!(run["status"], "ok");
    assert!(run["final_error"].as_f64().unwrap() < 1e-5);
    let h = &run["invariants"][0];
    assert_eq!(h["label"], "H");
    assert!(h["max_relative_drift"].as_f64().unwrap() < 1e-7);

    let (header, rows) = read_csv(&out.join("k_traj0.csv"));
    assert_eq!(header, ["t", "x0", "x1", "x2", "x3", "dH_H", "dH_L", "dH_A1"]);
    assert_eq!(rows.len(), run["samples"].as_u64().unwrap() as usize);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.0);
    let t_last: f64 = rows.last().unwrap()[0].parse().unwrap();
    assert!((t_last - 2.0 * std::f64::consts::PI).abs() < 1e-12);
}

fn without_wall_time(mut v: Value) -> Value {
    match &mut v {
        Value::Object(map) => {
            map.remove("wall_time_s");
            for (_, x) in map.iter_mut() {
                *x = without_wall_time(x.take());
            }
        }
        Value::Array(items) => {
            for x in items.iter_mut() {
                *x = without_wall_time(x.take());
            }
        }
        _ => {}
    }
    v
}

#[test]
fn runs_are_deterministic_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dp",
        r#"
        name = "dp"
        t_end = 2
        stride = 10
        [problem]
        id = "double-pendulum"
        ensemble = 3
        [method]
        integrator = "rk4"
        h = 0.05
        projection = "ch"
        "#,
    );
    let record = |out: &str, seed: Option<&str>| -> Value {
        let out = dir.path().join(out);
        let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        run_ok(&args);
        without_wall_time(serde_json::from_str(&std::fs::read_to_string(out.join("dp.json")).unwrap()).unwrap())
    };
    let a = record("a", None);
    let b = record("b", None);
    assert_eq!(a, b);
    let c = record("c", Some("7"));
    assert_ne!(a["runs"][0]["initial_state"], c["runs"][0]["initial_state"]);
    assert_eq!(c["config"]["seed"], 7);
    assert_eq!(a["runs"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s",
        r#"
        name = "s"
        periods = 1
        stride = 1000
        [problem]
        id = "kepler"
        eccentricity = 0.5
        [[sweep]]
        label = "DOP853"
        integrator = "dop853"
        parameter = "tol"
        values = [1e-6, 1e-8, 1e-10]
        [[sweep]]
        integrator = "rk4"
        projection = "lh"
        parameter = "h"
        values = [0.02, 0.01]
        "#,
    );
    let out = dir.path().join("out");
    run_ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"]);
    let (header, rows) = read_csv(&out.join("s_sweep.csv"));
    assert_eq!(&header[..4], ["method", "parameter", "value", "status"]);
    assert!(header.contains(&"max_rel_drift_A1".to_string()) && header.contains(&"rhs_evals".to_string()));
    assert_eq!(rows.len(), 5);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(rows[0][col("method")], "DOP853");
    assert_eq!(rows[3][col("method")], "rk4+lh");
    assert_eq!(rows[3][col("parameter")], "h");
    let errors: Vec<f64> = rows[..3].iter().map(|r| r[col("final_error")].parse().unwrap()).collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    let evals: Vec<u64> = rows[..3].iter().map(|r| r[col("rhs_evals")].parse().unwrap()).collect();
    assert!(evals[0] < evals[2]);
    for r in &rows[3..] {
        assert_eq!(r[col("status")], "ok");
        assert!(r[col("max_rel_drift_H")].parse::<f64>().unwrap() < 1e-13);
    }
}

#[test]
fn empty_sweep_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "e", "name = 'e'\nt_end = 1\n[problem]\nid = 'oscillator'\n");
    let out = dir.path().join("out");
    run_ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let (header, rows) = read_csv(&out.join("e_sweep.csv"));
    assert!(rows.is_empty());
    assert!(header.contains(&"max_rel_drift_H".to_string()));
}

#[test]
fn converge_writes_samples_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c",
        r#"
        name = "c"
        t_end = 1
        [problem]
        id = "oscillator"
        [converge]
        combos = [[1, 1, 1], [2, 1, 0]]
        h_min = 1e-3
        h_max = 0.5
        points = 31
        "#,
    );
    let out = dir.path().join("out");
    run_ok(&["converge", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let (header, rows) = read_csv(&out.join("c_samples.csv"));
    assert_eq!(header, ["p", "q", "r", "h", "error"]);
    assert_eq!(rows.len(), 62);
    let (header, rows) = read_csv(&out.join("c_slopes.csv"));
    assert_eq!(header, ["p", "q", "r", "expected", "slope", "points", "h_lo", "h_hi", "status"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 4.0);
    assert_eq!(rows[1][3].parse::<f64>().unwrap(), 3.0);
    // the unprojected midpoint step is clean third order
    assert_eq!(rows[1][8], "ok");
    assert!((rows[1][4].parse::<f64>().unwrap() - 3.0).abs() < 0.3, "{:?}", rows[1]);
}

#[test]
fn config_errors_name_file_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad", "name = 'x'\nt_end = 1\nbogus = 3\n[problem]\nid = 'kepler'\n");
    let out = homproj(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml") && err.contains("bogus"), "{err}");

    let preset = write_config(dir.path(), "preset", &KEPLER_RUN.replace("\"lh\"", "\"nope\""));
    let out = homproj(&["run", "--config", preset.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope") && err.contains("pnh"), "{err}");

    let missing = homproj(&["run", "--config", "/nonexistent/x.toml"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/x.toml"));

    let no_method = write_config(dir.path(), "nm", "name = 'x'\nt_end = 1\n[problem]\nid = 'kepler'\n");
    let out = homproj(&["run", "--config", no_method.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("method"));
}

#[test]
fn shipped_configs_parse_and_build() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        count += 1;
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{e}"));
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), cfg.name);
        cfg.end_time().unwrap();
        let problem = build_problem(&cfg).unwrap();
        let mut methods: Vec<_> = cfg.method.iter().cloned().collect();
        methods.extend(cfg.sweep.iter().map(|s| s.method.clone()));
        assert!(!methods.is_empty() || cfg.converge.is_some(), "{} does nothing", cfg.name);
        for m in methods {
            let mut m = m;
            // sweep entries get their parameter from the value list
            if m.h.is_none() && m.rtol.is_none() && m.epsilon.is_none() {
                m.h = Some(0.01);
                m.epsilon = Some(0.01);
            }
            build_method(&cfg, &m).unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
            let spec = resolve_projection(&problem, &m.projection).unwrap();
            build_projection(&problem, &spec, &problem.initial_states[0]).unwrap();
            if let ProjectionChoice::Preset(p) = &m.projection {
                assert!(p == "none" || problem.preset_names().contains(&p.as_str()));
            }
        }
    }
    assert!(count >= 15, "only {count} configs");
}
