use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dirpoly(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirpoly")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn records(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join("results.jsonl")).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn zero_beta_free_energy_is_exactly_zero() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "[run]\nreplicas = 50\n[grid]\nbetas = [0.0]\nsizes = [32]\n").unwrap();
    let o = dirpoly(&["free-energy", "--config", "c.toml", "--out", "o"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &records(&tmp.path().join("o"))[0];
    assert_eq!(r["estimate"].as_f64(), Some(0.0));
    assert_eq!(r["stderr"].as_f64(), Some(0.0));
    assert!(r["wall_time"].is_number());
    assert!(tmp.path().join("o/free_energy_n32.dat").exists());
    assert!(tmp.path().join("o/plot.py").exists());
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dirpoly(&["selftest", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(records(&tmp.path().join("o"))[0]["detail"]["pass"], Value::Bool(true));
}

#[test]
fn malformed_key_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "[grid]\nbetaz = [1.0]\n").unwrap();
    let o = dirpoly(&["free-energy", "--config", "c.toml", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("betaz"));

    fs::write(tmp.path().join("c.toml"), "[model]\ndimension = 4\n").unwrap();
    let o = dirpoly(&["free-energy", "--config", "c.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unsupported_request_exits_with_numerical_error() {
    // the replica check needs Gaussian disorder
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "[model]\ndisorder = \"rademacher\"\n").unwrap();
    let o = dirpoly(&["replica-check", "--config", "c.toml", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn output_is_byte_identical_without_timestamps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[run]\nreplicas = 64\n[grid]\nbetas = [0.3, 0.6]\nsizes = [16]\n";
    fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    for (out, workers) in [("a", "1"), ("b", "4")] {
        let o = dirpoly(
            &["fracmoment", "--config", "c.toml", "--out", out, "--workers", workers, "--no-timestamp"],
            tmp.path(),
        );
        assert!(o.status.success());
    }
    let data = |d: &str, f: &str| -> Vec<String> {
        let text = fs::read_to_string(tmp.path().join(d).join(f)).unwrap();
        text.lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
    };
    for f in ["summary.csv", "fracmoment_n16_theta0.5.dat"] {
        assert_eq!(data("a", f), data("b", f), "{f}");
    }
    // the echoed worker count differs, everything else matches
    let strip = |d: &str| -> Vec<Value> {
        records(&tmp.path().join(d))
            .into_iter()
            .map(|mut r| {
                r["config"]["run"]["workers"] = Value::Null;
                r["config"]["output"]["dir"] = Value::Null;
                r
            })
            .collect()
    };
    assert_eq!(strip("a"), strip("b"));
    fs::rename(tmp.path().join("a"), tmp.path().join("a_first")).unwrap();
    let rerun = dirpoly(&["fracmoment", "--config", "c.toml", "--out", "a", "--no-timestamp"], tmp.path());
    assert!(rerun.status.success());
    for f in ["results.jsonl", "summary.csv", "config.toml", "fracmoment_n16_theta0.5.dat"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("a_first").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[run]\nseed = 9\nreplicas = 40\n[grid]\nbetas = [0.8]\nsizes = [12]\n[model]\ndimension = 2\n";
    fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let o = dirpoly(&["variance-check", "--config", "c.toml", "--out", "first", "--no-timestamp"], tmp.path());
    assert!(o.status.success());
    let o =
        dirpoly(&["variance-check", "--config", "first/config.toml", "--out", "first", "--no-timestamp"], tmp.path());
    assert!(o.status.success());
    fs::rename(tmp.path().join("first"), tmp.path().join("second")).unwrap();
    let o = dirpoly(&["variance-check", "--config", "c.toml", "--out", "first", "--no-timestamp"], tmp.path());
    assert!(o.status.success());
    for f in ["results.jsonl", "summary.csv", "config.toml"] {
        assert_eq!(
            fs::read(tmp.path().join("first").join(f)).unwrap(),
            fs::read(tmp.path().join("second").join(f)).unwrap()
        );
    }
    let r = &records(&tmp.path().join("first"))[0];
    assert_eq!(r["seed"].as_u64(), Some(9));
    assert!(r["detail"]["exact"].as_f64().unwrap() > 0.0);
}

#[test]
fn certificate_commands_emit_certificates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[run]\nreplicas = 200\n[grid]\nbetas = [1.0]\nsizes = [64]\n";
    fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let o = dirpoly(&["cascade-cert", "--config", "c.toml", "--out", "o"], tmp.path());
    assert!(o.status.success());
    let r = &records(&tmp.path().join("o"))[0];
    let cert = &r["detail"]["certificate"];
    assert_eq!(cert["direction"], "upper");
    assert!(r["estimate"].as_f64().unwrap() < 0.0);
}
