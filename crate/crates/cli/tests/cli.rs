use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fwlab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fwlab"));
    cmd.args(args).env_remove("FWLAB_THREADS");
    if let Some(t) = threads {
        cmd.env("FWLAB_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn run_config(config: &Path, out: &Path, threads: Option<&str>) -> Output {
    fwlab(&["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()], threads)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

#[test]
fn ou_run_writes_trajectory_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("ou.json"), tmp.path(), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(tmp.path().join("trajectory.csv")).unwrap();
    assert!(rdr.records().count() > 100);
    let r = report(tmp.path());
    assert_eq!(r["kind"], "simulate");
    assert_eq!(r["seed"], 7);
    assert_eq!(r["passed"], true);
    assert!(r["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert!(r["versions"]["fwlab-core"].is_string());
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 2);
    for c in checks {
        for key in ["measured", "expected", "tolerance", "pass"] {
            assert!(!c[key].is_null(), "{key} missing in {c}");
        }
    }
}

#[test]
fn missing_seed_is_reported_by_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", &serde_json::json!({"kind": "simulate", "params": {}}));
    let out = run_config(&cfg, &tmp.path().join("out"), None);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seed"), "{err}");
}

#[test]
fn bad_params_and_fields_name_their_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let base = serde_json::json!({
        "kind": "simulate", "seed": 1,
        "fields": {"b": {"vars": ["x"], "components": ["-x"]}},
        "params": {"drift": "b", "x0": [0.0], "dt": 0.1, "t_end": 1.0}
    });
    let mut cases = Vec::new();
    let mut v = base.clone();
    v["params"]["drift"] = "missing".into();
    cases.push((v, "params.drift"));
    let mut v = base.clone();
    v["params"]["x0"] = serde_json::json!([0.0, 1.0]);
    cases.push((v, "params.drift"));
    let mut v = base.clone();
    v["params"].as_object_mut().unwrap().remove("dt");
    cases.push((v, "dt"));
    let mut v = base.clone();
    v["fields"]["b"]["components"] = serde_json::json!(["-q"]);
    cases.push((v, "fields.b"));
    let mut v = base;
    v["expect"] = serde_json::json!([{"metric": "nope", "value": 1}]);
    cases.push((v, "config.expect[0].metric"));
    for (k, (v, key)) in cases.into_iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{k}.json"), &v);
        let out = run_config(&cfg, &tmp.path().join(format!("o{k}")), None);
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(!out.status.success() && err.contains(key), "case {k}: {err}");
    }
}

#[test]
fn failing_expectation_gives_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(configs().join("ou.json")).unwrap()).unwrap();
    v["expect"] = serde_json::json!([{"metric": "var_x0", "value": 10.0, "tol": 0.1}]);
    let cfg = write_config(tmp.path(), "ou.json", &v);
    let out = run_config(&cfg, &tmp.path().join("out"), None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&tmp.path().join("out"))["passed"], false);
}

#[test]
fn rerun_is_bit_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("ou.json");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert!(run_config(&cfg, &a, Some("1")).status.success());
    assert!(run_config(&cfg, &b, Some("1")).status.success());
    assert!(run_config(&cfg, &c, Some("3")).status.success());
    let hash = |d: &Path| report(d)["report_hash"].clone();
    assert_eq!(hash(&a), hash(&b));
    assert_eq!(hash(&a), hash(&c));
    for f in ["trajectory.csv", "terminal.csv"] {
        let bytes = |d: &Path| std::fs::read(d.join(f)).unwrap();
        assert_eq!(bytes(&a), bytes(&b), "{f}");
        assert_eq!(bytes(&a), bytes(&c), "{f}");
    }
}

#[test]
fn seed_override_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("ou.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_config(&cfg, &a, None).status.success());
    let out = fwlab(&["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "8"], None);
    assert!(out.status.code().is_some());
    assert_eq!(report(&b)["seed"], 8);
    assert_ne!(report(&a)["config_hash"], report(&b)["config_hash"]);
    assert_ne!(std::fs::read(a.join("terminal.csv")).unwrap(), std::fs::read(b.join("terminal.csv")).unwrap());
}

#[test]
fn two_well_example_with_fewer_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v: Value =
        serde_json::from_str(&std::fs::read_to_string(configs().join("two-well-averaging.json")).unwrap()).unwrap();
    v["params"]["averaging"]["paths"] = 200.into();
    v["expect"] = serde_json::json!([{"metric": "w1", "value": 0.0, "tol": 1.0}]);
    let cfg = write_config(tmp.path(), "two-well.json", &v);
    let out_dir = tmp.path().join("out");
    let out = run_config(&cfg, &out_dir, None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out_dir);
    assert_eq!(r["metrics"]["edges"], 3.0);
    assert!(r["metrics"]["w1"].as_f64().unwrap() < 0.2);
    let reeb: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("reeb.json")).unwrap()).unwrap();
    assert!(reeb.is_object());
    for k in 0..3 {
        assert!(out_dir.join(format!("coefficients_edge{k}.csv")).exists());
    }
    assert_eq!(csv::Reader::from_path(out_dir.join("marginals.csv")).unwrap().records().count(), 200);
}

#[test]
fn verify_filter_runs_one_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fwlab(&["verify", "--filter", "c8", "--out", tmp.path().to_str().unwrap()], None);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("criterion")).count(), 1, "{stdout}");
    assert!(stdout.contains("cauchy-predictors"));
    let again = tempfile::tempdir().unwrap();
    fwlab(&["verify", "--filter", "c8", "--out", again.path().to_str().unwrap()], None);
    assert_eq!(report(tmp.path())["report_hash"], report(again.path())["report_hash"]);
    let none = fwlab(&["verify", "--filter", "no-such-check"], None);
    assert!(!none.status.success());
}

#[test]
fn bundled_configs_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = fwlab::config::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
        cfg.compile_fields().unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
        n += 1;
    }
    assert!(n >= 8);
}
