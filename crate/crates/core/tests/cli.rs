use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], config: &str, out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_quadgrad"));
    cmd.args(args).arg("--config").arg(configs().join(config));
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.output().expect("binary runs")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn constants_report_has_critical_parameters() {
    let o = run(&["constants"], "bench_1d_tanh.json", None);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let c = &v["critical"];
    let (gamma, d0, d1) = (v["constants"]["gamma"].as_f64().unwrap(), c["delta0"].as_f64().unwrap(), c["delta1"].as_f64().unwrap());
    assert!(gamma <= d0 && d0 < d1);
    assert_eq!(v["c_n"]["source"]["kind"], "estimate");
}

#[test]
fn equality_config_gives_delta0_at_gamma() {
    let v = json(&run(&["constants"], "equality_a3.json", None));
    let d0 = v["critical"]["delta0"].as_f64().unwrap();
    assert!((d0 - 1.0).abs() < 1e-9, "{d0}");
}

#[test]
fn zero_f_is_a_config_error_for_constants() {
    let o = run(&["constants"], "zero_f.json", None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_f_solve_returns_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve"], "zero_f.json", Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["max_abs_w"].as_f64(), Some(0.0));
}

#[test]
fn check_verdicts_and_exit_codes() {
    assert_eq!(run(&["check"], "bench_2d_mu.json", None).status.code(), Some(0));
    let o = run(&["check"], "violate_a3.json", None);
    assert_eq!(o.status.code(), Some(3));
    let v = json(&o);
    assert_eq!(v["a1"]["holds"], true);
    assert_eq!(v["a3"]["holds"], false);
}

#[test]
fn solve_writes_artifacts_and_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["solve", "--seed", "11"], "bench_1d_mu.json", Some(d.path()));
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["w.csv", "u.csv", "trace.jsonl", "tail_energy.csv", "increments.csv", "residuals.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep"], "bench_1d_tanh.json", Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["sign_changes"], 1);
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("delta,z_delta,phi_min,y_minus,y_plus,error"));
    assert_eq!(text.lines().count(), 42);
}

#[test]
fn verify_flags_corrupted_inputs() {
    assert_eq!(run(&["verify"], "bench_1d_tanh.json", None).status.code(), Some(0));
    for cfg in ["corrupted_a.json", "bad_certificate.json"] {
        let o = run(&["verify"], cfg, None);
        assert_eq!(o.status.code(), Some(5), "{cfg}");
        assert_eq!(json(&o)["passed"], false);
    }
}

#[test]
fn invalid_inputs_map_to_exit_codes() {
    assert_eq!(run(&["solve"], "corrupted_a.json", None).status.code(), Some(5));
    assert_eq!(run(&["solve"], "bad_certificate.json", None).status.code(), Some(5));
    assert_eq!(run(&["check"], "does_not_exist.json", None).status.code(), Some(2));
}
