use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::process::{Command, Output};

fn smoothwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothwave"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn critical_speed_for_exponential_jumps() {
    let o = smoothwave(&["critical-speed", "--model", "bs", "--lambda", "1", "--jumps", "exp:1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!((v["gamma_star"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    assert!((v["c_star"].as_f64().unwrap() - 4.0).abs() < 1e-8);
    assert_eq!(v["regime"], "Critical");
}

#[test]
fn power2_gamma_carries_the_closed_form_note() {
    let o = smoothwave(&["solve-gamma", "--model", "power2", "--jumps", "exp:1", "--sigma2", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!((v["gamma"].as_f64().unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-10);
    let note = v["diagnostics"]["note"].as_str().expect("note present");
    assert!(note.contains("0.618034"), "{note}");
}

#[test]
fn dispersion_from_gamma_for_pure_copying() {
    let o = smoothwave(&["dispersion", "--model", "bs", "--gamma", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!((stdout_json(&o)["c"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn validation_errors_exit_2_and_name_the_field() {
    let o = smoothwave(&["solve-gamma", "--model", "power2", "--jumps", "exp:2"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("jumps") && msg.contains("mean-1"), "{msg}");

    assert_eq!(smoothwave(&["solve-gamma", "--modle", "bs"]).status.code(), Some(2));
    assert_eq!(smoothwave(&["solve-gamma", "--model", "bs", "--jumps", "exp"]).status.code(), Some(2));
    assert_eq!(smoothwave(&["sample-pool", "--preset", "power2-exp"]).status.code(), Some(2));
    assert_eq!(smoothwave(&["pipeline", "--preset", "nope"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "model = \"bs\"\nlamda = 1.0\n").unwrap();
    let o = smoothwave(&["dispersion", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lamda"));
}

#[test]
fn speed_below_critical_exits_3() {
    let o = smoothwave(&["solve-gamma", "--model", "bs", "--lambda", "1", "--c", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("c* = 4"), "{}", stderr(&o));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(smoothwave(&["--help"]).status.code(), Some(0));
    assert_eq!(smoothwave(&["--version"]).status.code(), Some(0));
}

fn sha256_file(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn manifest_digests_match_and_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let args = [
        "wave-profile", "--preset", "bs-exp", "--pool-size", "10000", "--iterations", "5", "--seed", "17",
        "--grid", "-20:40:121",
    ];
    let o = smoothwave(&[&args[..], &["--out", first.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let m = manifest(&first);
    assert_eq!(m["command"], "wave-profile");
    assert_eq!(m["seed"], 17);
    assert_eq!(m["config"]["pool"]["size"], 10000);
    let outputs = m["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|f| f["file"] == "profile.csv"));
    for f in outputs {
        let path = first.join(f["file"].as_str().unwrap());
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_file(&path));
    }
    let header = std::fs::read_to_string(first.join("profile.csv")).unwrap();
    assert!(header.starts_with("x,h,stderr\n"));

    let second = tmp.path().join("second");
    let manifest_path = first.join("manifest.json");
    let o = smoothwave(&["wave-profile", "--config", manifest_path.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(first.join("profile.csv")).unwrap(),
        std::fs::read(second.join("profile.csv")).unwrap()
    );
}

#[test]
fn pool_does_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |workers: &str, name: &str| {
        let dir = tmp.path().join(name);
        let o = smoothwave(&[
            "sample-pool", "--preset", "power2-exp", "--pool-size", "20000", "--iterations", "4", "--workers", workers,
            "--out", dir.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(dir.join("pool.csv")).unwrap()
    };
    assert_eq!(run("1", "one"), run("3", "three"));
}

#[test]
fn simulate_then_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let prof = tmp.path().join("prof");
    let cmp = tmp.path().join("cmp");
    let o = smoothwave(&[
        "simulate", "--preset", "power2-exp", "--n", "500", "--horizon", "30", "--burn-in", "10",
        "--out", sim.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = stdout_json(&o);
    assert!(summary["speed"]["c_hat"].as_f64().unwrap() > 0.8);

    let o = smoothwave(&[
        "wave-profile", "--preset", "power2-exp", "--pool-size", "10000", "--iterations", "20",
        "--out", prof.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = smoothwave(&[
        "compare",
        "--empirical", sim.join("snapshots.csv").to_str().unwrap(),
        "--profile", prof.join("profile.csv").to_str().unwrap(),
        "--out", cmp.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!(v["w1_after_shift"].as_f64().unwrap() < 0.3, "{v}");
    assert!(cmp.join("overlay.csv").exists());
    assert_eq!(manifest(&cmp)["config"], Value::Null);
}

#[test]
fn pipeline_power2_passes_every_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let code = smoothwave::cli::run([
        "smoothwave", "pipeline", "--preset", "power2-exp", "--workers", "0", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let verify: Vec<Value> = serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert!(verify.len() >= 5);
    for r in &verify {
        assert_eq!(r["pass"], true, "{r}");
    }
    for file in ["dispersion.json", "pool.csv", "profile.csv", "snapshots.csv", "median_path.csv", "compare.json"] {
        assert!(out.join(file).exists(), "{file}");
    }
}
