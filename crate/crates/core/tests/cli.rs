use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_phonon-lattice"));
    c.env("PHONON_LATTICE_THREADS", "1");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn scatter_theory_writes_sweep_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = run(&["--scenario", "scatter_theory", "--sweep", "delta_MHz=-20:20:5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], "delta_MHz,phase_rad,distortion");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("-20"));
    assert!(lines[5].starts_with("20"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scenario"], "scatter_theory");
    assert_eq!(summary["config_echo"]["sweep"]["count"], 5);
    assert!(!out.join("trace.csv").exists());
    // No temporary files are left behind.
    let names: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn overrides_are_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = run(&[
        "--scenario",
        "hom",
        "--set",
        "pulse.sigma=15",
        "--set",
        "pulse.kappa_max=0.14",
        "--sweep",
        "tau_ns=-30:30:3",
        "--seed",
        "9",
        "--loss-mode",
        "jump",
        "--no-correct",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let echo = &s["config_echo"];
    assert_eq!(echo["pulse"]["sigma"], 15.0);
    assert_eq!(echo["seed"], 9);
    assert_eq!(echo["loss"]["mode"], "jump");
    assert_eq!(echo["readout"]["correct"], false);
    assert!(out.join("trace.csv").exists());
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 4);
    assert!(text(&o.stdout).contains("v_hom="));
}

#[test]
fn config_file_and_preset_load() {
    let o = run(&["validate", configs().join("calibrated.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(text(&o.stdout).trim(), "ok");
}

#[test]
fn validate_lists_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), r#"{"scenario": "hom", "pulse": {"sigma": -1.0}, "loss": {"eta": 1.5}}"#);
    let o = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let s = text(&o.stdout);
    assert!(s.contains("pulse.sigma"), "{s}");
    assert!(s.contains("loss.eta"), "{s}");
}

#[test]
fn unknown_keys_and_scenarios_are_config_errors() {
    let o = run(&["--scenario", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("two_phonon_phase"));

    let o = run(&["--scenario", "hom", "--set", "pulse.width=3"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["--scenario", "hom", "--sweep", "tau_ns=0:1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["--scenario", "hom", "--bogus-flag"]);
    assert_eq!(o.status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), r#"{"scenario": "hom", "pulse": {"sigma": 20.0, "extra": 1}}"#);
    let o = run(&["--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn infeasible_cap_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["--scenario", "single_split", "--set", "pulse.kappa_max=0.05", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("infeasible"));
}

#[test]
fn truncated_packet_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = run(&["--scenario", "single_split", "--set", "pulse.center=30", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o.stderr));
    assert!(!out.join("summary.json").exists());
}

#[test]
fn help_exits_cleanly() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stdout).contains("--loss-mode"));
}
