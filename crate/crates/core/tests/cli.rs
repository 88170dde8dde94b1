use std::fs;
use std::path::Path;
use std::process::Command;

fn qrc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qrc"))
}

fn small_config(dir: &Path, experiment: &str) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "experiment": experiment,
        "n_qubits": 3,
        "expressivity": { "r_max": 3, "axis_realizations": 2, "grid_points": 40 },
        "sweep": {
            "encodes": 3, "circuits": [1, 2, 6], "param_samples": 2,
            "tfim_samples": 2, "axis_realizations": 2, "shots": [500, 50]
        },
        "optimizer": { "budget": 20, "restarts": 2 },
        "dynamics": { "steps": 6 }
    });
    let path = dir.join(format!("{experiment}.json"));
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn every_experiment_runs_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    for exp in ["dynamics", "rec-vs-encodes", "eigentasks", "circuit-sweep", "optimize-sweep"] {
        let cfg = small_config(tmp.path(), exp);
        let out = tmp.path().join(exp);
        let run = |threads: &str| {
            let status = qrc()
                .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
                .output()
                .unwrap();
            assert!(status.status.success(), "{exp}: {}", String::from_utf8_lossy(&status.stderr));
            let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
                .unwrap()
                .map(|e| {
                    let p = e.unwrap().path();
                    (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
                })
                .collect();
            files.sort();
            files
        };
        let first = run("1");
        let second = run("2");
        assert_eq!(first.len(), second.len());
        for (a, b) in first.iter().zip(&second) {
            assert!(a == b, "{exp}: {} differs between runs", a.0);
        }
        let names: Vec<&str> = first.iter().map(|f| f.0.as_str()).collect();
        assert!(names.iter().any(|n| n.ends_with(".meta.json")), "{exp}: {names:?}");
    }
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "eigentasks");
    let out = tmp.path().join("o");
    let status = qrc()
        .args(["--config", cfg.to_str().unwrap(), "--n-qubits", "4", "--seed", "17", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(out.join("eigentasks.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["n_qubits"], 4);
    assert_eq!(meta["config"]["seed"], 17);
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["summary"]["rank"], 3);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["--experiment", "nope", "--out", o],
        vec!["--experiment", "eigentasks", "--n-qubits", "40", "--out", o],
        vec!["--experiment", "circuit-sweep", "--shots", "many", "--out", o],
        vec!["--experiment", "circuit-sweep", "--shots", "0", "--out", o],
        vec!["--config", "/nonexistent/config.json"],
        vec!["--out", o],
        vec!["--experiment", "dynamics", "--bogus"],
    ];
    for args in cases {
        let code = qrc().args(&args).output().unwrap().status.code();
        assert_eq!(code, Some(2), "{args:?}");
    }
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"experiment": "dynamics", "unknown_field": 1}"#).unwrap();
    assert_eq!(qrc().args(["--config", bad.to_str().unwrap()]).status().unwrap().code(), Some(2));
}

#[test]
fn infinite_shots_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "circuit-sweep");
    let out = tmp.path().join("o");
    let status =
        qrc().args(["--config", cfg.to_str().unwrap(), "--shots", "inf", "--out", out.to_str().unwrap()]).status().unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out.join("circuit_sweep.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1) == Some("inf")), "{text}");
}

#[test]
fn help_exits_cleanly() {
    let o = qrc().arg("--help").output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("--experiment"));
}
