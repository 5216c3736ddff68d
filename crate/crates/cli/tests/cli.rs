use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lorenz-pssp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn reference_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("condition (4)"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn large_amplitude_fails_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c22.json");
    std::fs::write(
        &cfg,
        r#"{"alpha":{"c":2.2,"rho":0.75},"beta":{"d":0.3,"e_plus":0.65,"e_minus":-0.65},"mu0":0.02}"#,
    )
    .unwrap();
    let o = run(&["check", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("condition (1): α(1)=1.2"), "{}", stdout(&o));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"alpha\": [").unwrap();
    for cmd in ["check", "shadow-map", "shadow-flow", "probe"] {
        let o = run(&[cmd, "--config", path(&cfg)]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
    }
    let o = run(&["shadow-map", "--seeds", "4,4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shadow_map_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "shadow-map".to_string(),
            "--seeds".into(),
            "0..3".into(),
            "--steps".into(),
            "2000".into(),
            "--out".into(),
            d.to_str().unwrap().into(),
        ]
    };
    for d in [a.path(), b.path()] {
        let args = args(d);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    let index = json(&a.path().join("records.json"));
    let records = index["records"].as_array().unwrap();
    // 2 epsilons x 2 modes x 3 seeds x (1D, 2D)
    assert_eq!(records.len(), 24);
    let mut csvs = 0;
    for rec in records {
        assert_eq!(rec["pass"], true);
        for f in rec["files"].as_array().unwrap() {
            let f = f.as_str().unwrap();
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f}");
            csvs += 1;
        }
    }
    assert_eq!(csvs, 24);
    assert_eq!(index["config_fingerprint"], json(&b.path().join("records.json"))["config_fingerprint"]);
}

#[test]
fn gamma_terminal_records_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["shadow-map", "--mode", "gamma-terminal", "--seeds", "5,6", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let index = json(&dir.path().join("records.json"));
    for rec in index["records"].as_array().unwrap() {
        assert_eq!(rec["gamma_exact"], true);
        assert_eq!(rec["n_steps"], 50);
    }
}

#[test]
fn finite_flow_chain_checks_the_terminal_ray() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let o = run(&["shadow-flow", "--mode", "finite", "--seeds", "11", "--steps", "600", "--out", path(d)]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    let index = json(&a.path().join("records.json"));
    let rec = &index["records"][0];
    assert_eq!(rec["terminal_ray"], true);
    assert_eq!(rec["pass"], true);
    let fa = json(&a.path().join("flow_eps0.6_constants.json"))["fingerprint"].clone();
    let fb = json(&b.path().join("flow_eps0.6_constants.json"))["fingerprint"].clone();
    assert_eq!(fa, fb);
    let report = json(&a.path().join("flow_eps0.6_seed11_finite_report.json"));
    assert_eq!(report["constants_fingerprint"], fa);
    for f in rec["files"].as_array().unwrap() {
        let f = f.as_str().unwrap();
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn probe_with_zero_delta_has_zero_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["probe", "--seeds", "3", "--delta", "0", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&dir.path().join("probe_seed3.json"));
    assert_eq!(r["bound"].as_f64(), Some(0.0));
    assert!(dir.path().join(r["orbit_file"].as_str().unwrap()).exists());
}

#[test]
fn probe_matches_stored_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["probe", "--seeds", "17", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let got = json(&dir.path().join("probe_seed17.json"));
    let want = json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/probe_seed17.json"));
    let (g, w) = (got["bound"].as_f64().unwrap(), want["bound"].as_f64().unwrap());
    assert!((g - w).abs() <= 1e-12, "bound {g} vs fixture {w}");
    assert_eq!(got["delta"], want["delta"]);
    assert_eq!(got["seed"], want["seed"]);
    assert_eq!(got["orbit_file"], want["orbit_file"]);
}
