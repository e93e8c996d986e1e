//! End-to-end checks of the command-line surface: exit codes, config
//! handling and the file outputs.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aid"))
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("aid-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn print_config_round_trips() {
    let out = bin().arg("print-config").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["n_steps"], 4000);
    assert_eq!(parsed["design"]["gamma"], 1e-4);
    assert_eq!(parsed["model"]["theta_b"][0], 0.9);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tmpdir("badcfg");
    let path = dir.join("bad.json");
    std::fs::write(&path, "{\"not\": \"a config\"}").unwrap();
    let out = bin().arg("--config").arg(&path).arg("print-config").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unstable_model_config_exits_2() {
    let dir = tmpdir("unstable");
    let out = bin().arg("print-config").output().unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    cfg["model"]["theta_d"] = serde_json::json!([-2.0]);
    let path = dir.join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = bin().arg("--config").arg(&path).arg("check-stability").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn factorize_prints_taps() {
    let out = bin().args(["factorize", "--r", "4,0,0,0"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("m_tau = 0"), "{text}");
    assert!(text.contains("2.0"), "{text}");
}

#[test]
fn factorize_rejects_negative_spectrum_with_exit_2() {
    let out = bin().args(["factorize", "--r", "1,1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_csv() {
    let dir = tmpdir("sim");
    let out = bin()
        .args(["simulate", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.join("simulation.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,u,e,y");
    assert_eq!(lines.count(), 4000);
}

#[test]
fn design_reports_solution() {
    let out = bin().args(["design"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("fallback: false"), "{text}");
    assert!(text.contains("objective r0 = 0.867"), "{text}");
}

#[test]
fn check_stability_prints_certificates() {
    let out = bin().arg("check-stability").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("assumption 1: all model polynomials stable"), "{text}");
    assert!(text.contains("generator block: JSR bound 0.000e0"), "{text}");
    assert!(
        text.contains("joint stability certificate holds (block-triangular reduction)"),
        "{text}"
    );
    assert!(text.contains("frozen closed loop at the truth: JSR bound 0.69"), "{text}");
    assert!(text.contains("uniqueness condition min eig"), "{text}");
}

#[test]
fn design_dump_emits_blocks() {
    let out = bin().args(["design", "--dump-sdp"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("vars 10"), "{text}");
    assert!(text.contains("block 0 dim 5"), "{text}");
    assert!(text.contains("box 0"), "{text}");
}
