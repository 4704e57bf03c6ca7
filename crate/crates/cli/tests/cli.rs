use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn ssf_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssf-lab"))
        .args(args)
        .env_remove("SSF_LAB_JOBS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn records(text: &str) -> Vec<Value> {
    text.lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn config_arg(name: &str) -> String {
    fixture(name).to_str().unwrap().to_string()
}

#[test]
fn dense_oracle_matches_rounded_determinant() {
    let cfg = config_arg("dense_diagonal.json");
    let out = ssf_lab(&["ssf", "--config", &cfg]);
    assert!(out.status.success());
    let recs = records(&stdout(&out));
    assert_eq!(recs.len(), 10);
    for r in &recs {
        let oracle = r["xi_oracle"].as_i64().expect("integer oracle");
        let det = r["xi_det"].as_f64().unwrap();
        assert_eq!(det.round() as i64, oracle, "{r}");
        assert!((r["xi_mu"].as_f64().unwrap() - oracle as f64).abs() < 1e-12);
        assert!((r["xi_index"].as_f64().unwrap() - oracle as f64).abs() < 1e-12);
        assert!(r["flags"].as_array().unwrap().is_empty());
    }
}

#[test]
fn lattice_sweep_birman_krein() {
    let cfg = config_arg("lattice_scalar.json");
    let out = ssf_lab(&["ssf", "--config", &cfg]);
    assert!(out.status.success());
    let recs = records(&stdout(&out));
    assert_eq!(recs.len(), 101);
    let worst = recs
        .iter()
        .map(|r| r["bk_defect"].as_f64().unwrap())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn eigenvalue_point_is_flagged_not_fatal() {
    let cfg = config_arg("dense_on_eigenvalue.json");
    let out = ssf_lab(&["ssf", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&stdout(&out));
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["flags"], serde_json::json!(["BoundaryUndefined"]));
    assert!(recs[0]["xi_det"].is_null());
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_arg("lattice_rank_two.json");
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let out = ssf_lab(&["ssf", "--config", &cfg, "--out", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn parallel_sweep_equals_serial() {
    let cfg = config_arg("lattice_rank_two.json");
    let serial = ssf_lab(&["ssf", "--config", &cfg, "--jobs", "1"]);
    let parallel = ssf_lab(&["ssf", "--config", &cfg, "--jobs", "4"]);
    assert_eq!(serial.stdout, parallel.stdout);

    let from_env = Command::new(env!("CARGO_BIN_EXE_ssf-lab"))
        .args(["ssf", "--config", &cfg])
        .env("SSF_LAB_JOBS", "3")
        .output()
        .unwrap();
    assert_eq!(serial.stdout, from_env.stdout);
}

#[test]
fn transformed_determinant_agrees_with_untransformed_ssf() {
    let cfg = config_arg("lattice_rank_two.json");
    let recs = records(&stdout(&ssf_lab(&["ssf", "--config", &cfg])));
    for r in &recs {
        assert!(r["flags"].as_array().unwrap().is_empty(), "{r}");
        let det = r["xi_det"].as_f64().unwrap();
        let index = r["xi_index"].as_f64().unwrap();
        assert!((det - index).abs() < 1e-6, "{r}");
    }
}

#[test]
fn csv_projection() {
    let cfg = config_arg("dense_on_eigenvalue.json");
    let out = ssf_lab(&["ssf", "--config", &cfg, "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("lambda,xi_det,xi_mu,xi_index,xi_oracle,bk_defect")
    );
    assert_eq!(lines.next(), Some("0.0,,,,,"));
    assert_eq!(lines.next(), None);

    let cfg = config_arg("dense_diagonal.json");
    let text = stdout(&ssf_lab(&["ssf", "--config", &cfg, "--format", "csv"]));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(&rows[2][4], "1");
}

#[test]
fn scalar_mu_document() {
    let cfg = config_arg("lattice_scalar.json");
    let out = ssf_lab(&["mu", "--config", &cfg, "--lambda", "0", "--method", "index"]);
    assert!(out.status.success());
    let mu: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(mu["lambda"], 0.0);
    assert_eq!(mu["tail"], -1);
    let jumps = mu["jumps"].as_array().unwrap();
    assert_eq!(jumps.len(), 1);
    assert!((jumps[0]["theta"].as_f64().unwrap() - 1.5 * PI).abs() < 1e-12);
    assert_eq!(jumps[0]["m"], 1);
}

#[test]
fn mu_methods_agree() {
    let cfg = config_arg("lattice_rank_two.json");
    for lambda in ["-1.3", "0.2", "1.1"] {
        let out = ssf_lab(&[
            "mu", "--config", &cfg, "--lambda", lambda, "--method", "both",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
        assert_eq!(v["equal"], true);
        assert_eq!(v["max_defect"], 0);
    }
}

#[test]
fn mu_for_zero_coupling_and_in_a_gap() {
    let cfg = config_arg("dense_zero_coupling.json");
    let v: Value =
        serde_json::from_str(stdout(&ssf_lab(&["mu", "--config", &cfg, "--lambda", "0.5"])).trim())
            .unwrap();
    assert_eq!(v["tail"], 0);
    assert!(v["jumps"].as_array().unwrap().is_empty());

    // between eigenvalues μ is constant, equal to −ξ
    let cfg = config_arg("dense_diagonal.json");
    let v: Value =
        serde_json::from_str(stdout(&ssf_lab(&["mu", "--config", &cfg, "--lambda", "0.5"])).trim())
            .unwrap();
    assert_eq!(v["tail"], -1);
    assert!(v["jumps"].as_array().unwrap().is_empty());
}

#[test]
fn determinant_trace_rows() {
    let cfg = config_arg("dense_zero_coupling.json");
    let v: Value = serde_json::from_str(
        stdout(&ssf_lab(&["det", "--config", &cfg, "--lambda", "0.5"])).trim(),
    )
    .unwrap();
    for row in v["rows"].as_array().unwrap() {
        assert_eq!(row["arg"].as_f64().unwrap(), 0.0);
    }

    let cfg = config_arg("lattice_scalar.json");
    let out = ssf_lab(&["det", "--config", &cfg, "--lambda", "0.3"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let anchor = &rows[0];
    let defect = (anchor["re"].as_f64().unwrap() - 1.0).hypot(anchor["im"].as_f64().unwrap());
    assert!(defect < 1e-6);
    let last = rows.last().unwrap();
    assert_eq!(last["y"], 0.0);
    let xi = last["arg"].as_f64().unwrap() / PI;
    assert_eq!(v["xi"].as_f64().unwrap(), xi);

    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single.json");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace(r#"{"start": -1.9, "stop": 1.9, "count": 101}"#, "[0.3]");
    std::fs::write(&single, text).unwrap();
    let recs = records(&stdout(&ssf_lab(&[
        "ssf",
        "--config",
        single.to_str().unwrap(),
    ])));
    assert_eq!(recs[0]["xi_det"].as_f64().unwrap(), xi);
}

#[test]
fn exit_codes() {
    let bad = config_arg("bad_grid.json");
    assert_eq!(ssf_lab(&["ssf", "--config", &bad]).status.code(), Some(2));
    assert_eq!(
        ssf_lab(&["ssf", "--config", "/nonexistent/cfg.json"])
            .status
            .code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, "{\"model\": ").unwrap();
    assert_eq!(
        ssf_lab(&["ssf", "--config", garbled.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let non_hermitian = dir.path().join("non_hermitian.json");
    let text = std::fs::read_to_string(fixture("dense_diagonal.json"))
        .unwrap()
        .replace(
            r#""h0": [[{"re": 0, "im": 0}, {"re": 0, "im": 0}]"#,
            r#""h0": [[{"re": 0, "im": 0}, {"re": 5, "im": 0}]"#,
        );
    std::fs::write(&non_hermitian, text).unwrap();
    assert_eq!(
        ssf_lab(&["ssf", "--config", non_hermitian.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    assert_eq!(
        ssf_lab(&["check", "--suite", "nope", "--seed", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn index_check_suite_passes() {
    let out = ssf_lab(&["check", "--suite", "index", "--seed", "1"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["suite"], "index");
    assert_eq!(report["cases_run"], report["cases_passed"]);
    assert!(report["cases_run"].as_u64().unwrap() > 0);
}
