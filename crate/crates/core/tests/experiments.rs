use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};

use phase_lattice::harness::{run_experiment_in, validate_config, RunStatus};

const BIN: &str = env!("CARGO_BIN_EXE_phase-lattice");

/// Small but complete configs, one per experiment.
const SMALL: [(&str, &str); 5] = [
    ("fig2", r#"{"experiment": "fig2", "params": {"n_sites": 120}, "mode_count": 20}"#),
    (
        "fig3",
        r#"{"experiment": "fig3", "panels": {
            "weak": {"params": {"n_sites": 60}, "time_grid": {"stop": 64, "steps": 320}},
            "strong": {"params": {"n_sites": 300}, "time_grid": {"stop": 20, "steps": 100}}}}"#,
    ),
    (
        "fig4",
        r#"{"experiment": "fig4", "panels": {
            "omega0_zero": {"params": {"n_sites": 120}, "time_grid": {"stop": 12.566370614359172, "steps": 100}},
            "omega0_resonant": {"params": {"n_sites": 120}, "time_grid": {"stop": 12.566370614359172, "steps": 100}}}}"#,
    ),
    ("spectrum_compare", r#"{"experiment": "spectrum_compare", "params": {"n_sites": 150}, "mode_count": 20}"#),
    ("mode_validate", r#"{"experiment": "mode_validate", "params": {"n_sites": 100}, "mode_count": 8}"#),
];

fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn reruns_are_byte_identical() {
    for (name, raw) in SMALL {
        let cfg = validate_config(raw).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment_in(&cfg, a.path()).unwrap();
        run_experiment_in(&cfg, b.path()).unwrap();
        let fa = data_files(a.path());
        assert!(!fa.is_empty(), "{name}");
        assert_eq!(fa, data_files(b.path()), "{name}");
    }
}

#[test]
fn manifest_lists_every_output_with_checksums() {
    for (name, raw) in SMALL {
        let cfg = validate_config(raw).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (manifest, status) = run_experiment_in(&cfg, dir.path()).unwrap();
        assert_eq!(status, RunStatus::Clean, "{name}: {:?}", manifest.taints);

        let on_disk = data_files(dir.path());
        let listed: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
        assert!(listed.contains(&"config.json"), "{name}");
        for path in on_disk.keys() {
            assert!(listed.contains(&path.as_str()), "{name}: {path} not in manifest");
        }
        for f in &manifest.files {
            let data = std::fs::read(dir.path().join(&f.path)).unwrap();
            assert_eq!(f.bytes, data.len());
            assert_eq!(f.sha256, hex::encode(Sha256::digest(&data)), "{name}: {}", f.path);
        }

        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["tool", "version", "experiment", "config", "started_at", "wall_clock_seconds", "taints", "files"] {
            assert!(json.get(key).is_some(), "{name}: manifest lacks {key}");
        }
        assert_eq!(json["experiment"], cfg.experiment.name());

        // The echoed config reproduces the run.
        let echo = std::fs::read_to_string(dir.path().join("config.json")).unwrap();
        let again = validate_config(&echo).unwrap();
        assert_eq!(again.to_json(), manifest.config.to_json());
    }
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let clean = write(dir.path(), "clean.json", SMALL[4].1);
    let out = Command::new(BIN)
        .args(["mode-validate", "--config"])
        .arg(&clean)
        .arg("--out")
        .arg(dir.path().join("clean"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("clean/manifest.json").exists());

    // Strong coupling on a short lattice reaches the far edge.
    let tainted = write(
        dir.path(),
        "tainted.json",
        r#"{"experiment": "fig3", "panels": {
            "weak": {"params": {"n_sites": 40}},
            "strong": {"params": {"n_sites": 6}, "window": {"start": 0, "end": 6}, "time_grid": {"stop": 20, "steps": 100}}}}"#,
    );
    let out = Command::new(BIN)
        .args(["fig3", "--config"])
        .arg(&tainted)
        .arg("--out")
        .arg(dir.path().join("tainted"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("boundary_leakage"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("tainted/manifest.json")).unwrap()).unwrap();
    assert!(!manifest["taints"].as_array().unwrap().is_empty());

    let bad = write(dir.path(), "bad.json", r#"{"experiment": "fig2", "params": {"coupling": -1, "n_sites": 1}}"#);
    let out = Command::new(BIN).args(["fig2", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("params.coupling") && err.contains("params.n_sites"), "{err}");

    // Wrong experiment for the subcommand.
    let out = Command::new(BIN).args(["fig4", "--config"]).arg(&clean).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let missing = dir.path().join("nope.json");
    let out = Command::new(BIN).args(["fig2", "--config"]).arg(&missing).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", SMALL[0].1);
    let out = Command::new(BIN).args(["validate", "--config"]).arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let echoed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echoed["params"]["n_sites"], 120);
    assert!(!dir.path().join("out").exists());

    let bad = write(dir.path(), "bad.json", "{\"experiment\": \"fig2\",\n \"mode_count\": }");
    let out = Command::new(BIN).args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn sweep_runs_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("sweep");
    let body = serde_json::json!({
        "base": {"experiment": "fig2", "params": {"n_sites": 60}, "mode_count": 10},
        "axes": [
            {"path": "params.coupling", "values": [0.005, 0.01]},
            {"path": "params.parity", "values": ["plus", "minus"]}
        ],
        "output_dir": root.to_string_lossy(),
    });
    let cfg = write(dir.path(), "sweep.json", &body.to_string());

    let out = Command::new(BIN).args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("4 points"));

    let out = Command::new(BIN).args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..4 {
        let point = root.join(format!("point_{i:04}"));
        assert!(point.join("dispersion.csv").exists());
        assert!(point.join("manifest.json").exists());
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("sweep.json")).unwrap()).unwrap();
    let points = report["points"].as_array().unwrap();
    assert_eq!(points.len(), 4);
    // Last axis varies fastest.
    assert_eq!(points[1]["assignments"]["params.parity"], "minus");
    assert_eq!(points[2]["assignments"]["params.coupling"], 0.01);

    let bad = write(
        dir.path(),
        "bad_sweep.json",
        r#"{"base": {"experiment": "fig2"}, "axes": [{"path": "params.n_sites", "values": [50, 0]}]}"#,
    );
    let out = Command::new(BIN).args(["sweep", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("points[1]"));
}
