use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lipsub(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipsub"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LIPSUB_OUT")
        .env_remove("LIPSUB_CONFIG")
        .output()
        .unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn circle_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lipsub(&["embed", "circle", "--grid", "10000"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path());
    assert!(r["result"]["report"]["isometry_defect"].as_f64().unwrap() <= 1e-7);
    assert_eq!(r["passed"], Value::Bool(true));
    assert!(tmp.path().join("metadata.json").exists());
    assert!(tmp.path().join("embedding.json").exists());
}

#[test]
fn fan_szlenk_and_cascade_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lipsub(&["szlenk", "--model", "fan:8", "--eps", "1", "--delta", "0.05"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(tmp.path());
    assert_eq!(r["result"]["verdict"]["kind"], "finite");
    assert_eq!(r["result"]["verdict"]["index"], 2);
    let csv = fs::read_to_string(tmp.path().join("cascade.csv")).unwrap();
    assert!(csv.starts_with("model,eps,delta,level,size\r\n"));
    assert_eq!(csv.lines().count(), 4);
    assert!(fs::read_to_string(tmp.path().join("cascade.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn ell1_sup_norm() {
    let tmp = tempfile::tempdir().unwrap();
    let o =
        lipsub(&["ell1", "--model", "cantor:4", "--eps", "0.25", "--depth", "4", "--coeffs", "1,-2,0.5"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(tmp.path())["result"]["combination"]["sup_norm"].as_f64(), Some(3.5));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lipsub(&["no-such-command"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("report.json").exists());

    let o = lipsub(&["embed", "circle", "--grid", "100", "--tolerance", "1e-7"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("isometry defect"));
    assert_eq!(report(tmp.path())["passed"], Value::Bool(false));

    let o = lipsub(&["szlenk", "--model", "fan:8"], tmp.path());
    assert_eq!(o.status.code(), Some(2));

    // a library error is a failed check, not a usage error
    let o = lipsub(&["transfer", "--q", "1", "--q2", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["quotient-check"];
    assert_eq!(lipsub(&args, a.path()).status.code(), Some(0));
    assert_eq!(lipsub(&args, b.path()).status.code(), Some(0));
    for f in ["report.json", "quotient.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"command": "szlenk", "model": "fan:8", "eps": 2.0, "delta": 0.05}"#).unwrap();
    let out = tmp.path().join("run");
    let o = lipsub(&["--config", cfg.to_str().unwrap(), "--eps", "1"], &out);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["config"]["eps"].as_f64(), Some(1.0));
    assert_eq!(r["config"]["delta"].as_f64(), Some(0.05));
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lipsub"))
        .args(["faces", "--norm", "hexagon"])
        .env("LIPSUB_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(tmp.path())["result"]["face_count"], 6);
}

#[test]
fn list_covers_every_operation() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(lipsub(&["list"], tmp.path()).status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("commands.csv")).unwrap();
    assert_eq!(csv.lines().count(), 28);
    assert!(csv.contains("c0-construct,construct_c0,"));
    assert!(csv.contains("quotient-check,check_quotient_monotonicity,"));
}

#[test]
fn verify_reads_written_embedding() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    assert_eq!(lipsub(&["embed", "linf", "--norm", "hexagon", "--n", "3"], &a).status.code(), Some(0));
    let file = a.join("embedding.json");
    let v = tmp.path().join("v");
    assert_eq!(lipsub(&["verify", "--embedding-file", file.to_str().unwrap()], &v).status.code(), Some(0));
    let shrunk = lipsub(&["verify", "--embedding-file", file.to_str().unwrap(), "--scale", "0.9"], &v);
    assert_eq!(shrunk.status.code(), Some(1));
}
