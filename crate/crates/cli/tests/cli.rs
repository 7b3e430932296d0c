use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn pinmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinmix")).args(args).env_remove("PINMIX_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn assert_digests(dir: &Path) {
    let m = manifest(dir);
    let outputs = m["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for f in outputs {
        let data = fs::read(dir.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), data.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&data)));
    }
    assert!(!dir.join(".manifest.json.tmp").exists());
}

#[test]
fn sample_writes_paths_deterministically() {
    let args = ["sample", "--L", "8", "--lambda", "1", "--count", "3", "--seed", "7"];
    let a = pinmix(&args);
    assert!(a.status.success());
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    for line in lines {
        let h: Vec<i32> = line.split(' ').map(|t| t.parse().unwrap()).collect();
        assert_eq!(h.len(), 9);
        assert!(h[0] == 0 && h[8] == 0 && h.iter().all(|&v| v >= 0));
        assert!(h.windows(2).all(|w| (w[0] - w[1]).abs() == 1));
    }
    assert_eq!(pinmix(&args).stdout, a.stdout);
    let other = pinmix(&["sample", "--L", "8", "--count", "50", "--seed", "8"]);
    assert_ne!(stdout(&other).lines().take(3).collect::<Vec<_>>(), text.lines().collect::<Vec<_>>());
}

#[test]
fn sample_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("paths.txt");
    let o = pinmix(&["sample", "--L", "6", "--count", "4", "--seed", "1", "--out", p.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(p).unwrap().lines().count(), 4);
}

#[test]
fn odd_length_is_a_usage_error() {
    let o = pinmix(&["sample", "--L", "7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("L must be even and ≥ 2"));
    let o = pinmix(&["exact", "--L", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exact_two_state_chain() {
    // Ω_4 = {∧, ∨}; the flip rates are 1/(1+λ) and λ/(1+λ), so the gap is their sum.
    for lam in [0.5, 1.0, 3.0] {
        let o = pinmix(&["exact", "--L", "4", "--lambda", &lam.to_string(), "--times", "0,1,2"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert!((r["gap"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        let kappa = 1.0 - (std::f64::consts::PI / 4.0).cos();
        assert!((r["kappa"].as_f64().unwrap() - kappa).abs() < 1e-12);
        // d(t) = μ(∨) e^{−t} from ∧
        let mu_v = lam / (1.0 + lam);
        for p in r["tv_curve"].as_array().unwrap() {
            let (t, d) = (p[0].as_f64().unwrap(), p[1].as_f64().unwrap());
            assert!((d - mu_v * (-t).exp()).abs() < 1e-9, "λ={lam} t={t}");
        }
    }
}

#[test]
fn exact_above_cap_exits_3() {
    let o = pinmix(&["exact", "--L", "40"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("bytes"));
}

#[test]
fn exact_censoring_comparison() {
    let o = pinmix(&["exact", "--L", "12", "--lambda", "1.5", "--censor"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["censoring_inequality_ok"], Value::Bool(true));
    let free = r["tv_curve"].as_array().unwrap();
    let cens = r["censored_tv_curve"].as_array().unwrap();
    assert_eq!(free.len(), cens.len());
    for (a, b) in cens.iter().zip(free) {
        assert!(a[1].as_f64().unwrap() >= b[1].as_f64().unwrap() - 1e-10);
    }
}

#[test]
fn mix_minimal_config_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let cfg = write_config(
            dir.path(),
            &format!("L: [32]\nlambda: [1.0]\nreplicas: 10\nmaster_seed: 1\nout_dir: {}\n", out.display()),
        );
        let o = pinmix(&["mix", "--config", &cfg]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = run("a");
    let b = run("b");
    let tau = fs::read_to_string(a.join("tau_samples.csv")).unwrap();
    assert_eq!(tau.lines().next().unwrap(), "L,lambda,replica,tau,tau1,tau2,censored_flag");
    assert_eq!(tau.lines().count(), 11);
    for f in ["tau_samples.csv", "mixing_curve.csv", "cutoff_table.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_digests(&a);
    let m = manifest(&a);
    assert_eq!(m["complete"], Value::Bool(true));
    assert_eq!(m["master_seed"].as_u64(), Some(1));
    assert_eq!(m["outside_repulsive_phase"], Value::Bool(false));
    assert!(m["finished_unix"].as_f64().unwrap() >= m["started_unix"].as_f64().unwrap());
}

#[test]
fn mix_labels_lambda_outside_repulsive_phase() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = pinmix(&["mix", "--L", "16", "--lambda", "2.5", "--replicas", "4", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest(&out)["outside_repulsive_phase"], Value::Bool(true));
}

#[test]
fn malformed_config_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "L = 32\nlambda = abc\n");
    let o = pinmix(&["mix", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 2") && e.contains("lambda"), "{e}");

    let cfg = write_config(dir.path(), "L = 31\n");
    let o = pinmix(&["mix", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("L must be even and ≥ 2"));

    let cfg = write_config(dir.path(), "L = 32\n");
    let o = pinmix(&["mix", "--config", &cfg, "--epsilon", "0.2,x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--epsilon"));
}

#[test]
fn threads_env_is_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_pinmix"))
        .args(["mix", "--L", "8", "--replicas", "2", "--out-dir", out.to_str().unwrap()])
        .env("PINMIX_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("threads"));
}

#[test]
fn mix_protocols_and_sandwich() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = pinmix(&[
        "mix", "--L", "12", "--lambda", "1.5", "--replicas", "8", "--censor", "--sep", "--M", "2", "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let wedge: Value = serde_json::from_str(&fs::read_to_string(out.join("wedge.json")).unwrap()).unwrap();
    assert_eq!(wedge[0]["exact"]["inequality_ok"], Value::Bool(true));
    let sep: Value = serde_json::from_str(&fs::read_to_string(out.join("sep.json")).unwrap()).unwrap();
    assert_eq!(sep[0]["order_violations"].as_u64(), Some(0));
    assert!(out.join("vee.json").exists());
    assert_digests(&out);
}

#[cfg(unix)]
#[test]
fn interrupt_flushes_partial_results() {
    use std::time::Duration;
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let child = Command::new(env!("CARGO_BIN_EXE_pinmix"))
        .args(["mix", "--L", "128", "--replicas", "500", "--threads", "1", "--out-dir", out.to_str().unwrap()])
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    std::thread::sleep(Duration::from_millis(1500));
    Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(130), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["complete"], Value::Bool(false));
    let rows = fs::read_to_string(out.join("tau_samples.csv")).unwrap().lines().count() - 1;
    assert!(rows < 500);
    assert_digests(&out);
}
