use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cwcu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwcu"))
        .args(args)
        .output()
        .expect("failed to launch cwcu")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn identity_rows(n: usize, scale: f64) -> String {
    let rows: Vec<String> = (0..n)
        .map(|i| {
            let cells: Vec<String> = (0..n)
                .map(|j| {
                    if i == j {
                        format!("[{scale}, 0]")
                    } else {
                        "[0, 0]".into()
                    }
                })
                .collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn write_identity_model(dir: &Path) -> String {
    let text = format!(
        r#"{{
  "version": "cwcu-model-v1",
  "kind": "linear",
  "n": 2,
  "m": 2,
  "H": {h},
  "mean_x": [[0, 0], [0, 0]],
  "C_xx": {h},
  "C_nn": {h}
}}
"#,
        h = identity_rows(2, 1.0)
    );
    let path = dir.join("identity.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn validate_passes_and_lists_every_identity() {
    let o = cwcu(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["n_models"], 100);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    for c in checks {
        for key in ["name", "max_dev", "tol", "pass"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
        assert_eq!(c["pass"], true, "{}", c["name"]);
    }
}

#[test]
fn validate_perturbation_fails_factorization() {
    let o = cwcu(&["validate", "--perturb", "1e-3", "--models", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"factorization_moments"));
    assert!(failed.contains(&"factorization_linear_gaussian"));
}

#[test]
fn compare_identity_model_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_identity_model(dir.path());
    let o = cwcu(&["compare", "--model", &model, "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let est = report["estimators"].as_array().unwrap();
    let bmse = |k: usize| -> Vec<f64> {
        est[k]["bmse"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect()
    };
    assert_eq!(est[0]["kind"], "LMMSE");
    assert_eq!(est[2]["kind"], "B1");
    for i in 0..2 {
        assert!((bmse(0)[i] - 0.5).abs() < 1e-12);
        assert!((bmse(1)[i] - 1.0).abs() < 1e-12);
        assert!((bmse(2)[i] - 1.0).abs() < 1e-12);
    }
    assert_eq!(report["ordering_holds"], true);
}

#[test]
fn compare_csv_rows_are_ordered() {
    for prior in ["gaussian", "independent"] {
        let o = cwcu(&[
            "compare", "--seed", "4", "--n", "4", "--m", "6", "--prior", prior,
        ]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("component,d,bmse_lmmse,bmse_cwcu_"));
        assert!(header.ends_with(",bmse_b1"));
        let rows: Vec<Vec<f64>> = lines
            .map(|l| l.split(',').skip(1).map(|c| c.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert!(r[0] >= 1.0);
            assert!(r[1] <= r[2] + 1e-9 && r[2] <= r[3] + 1e-9);
        }
    }
}

#[test]
fn independent_prior_on_correlated_model_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corr.json");
    fs::write(
        &path,
        r#"{"version": "cwcu-model-v1", "kind": "linear", "n": 2, "m": 2,
  "H": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
  "mean_x": [[0, 0], [0, 0]],
  "C_xx": [[[1, 0], [0.5, 0]], [[0.5, 0], [1, 0]]],
  "C_nn": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}"#,
    )
    .unwrap();
    let o = cwcu(&[
        "compare",
        "--model",
        path.to_str().unwrap(),
        "--prior",
        "independent",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[NOT_DIAGONAL_PRIOR]"), "{err}");
    assert!(err.contains("(0, 1)") || err.contains("(1, 0)"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn malformed_model_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        "{\n  \"version\": \"cwcu-model-v1\",\n  \"kind\": \"linear\",\n  \"n\": 2,,\n}",
    )
    .unwrap();
    let o = cwcu(&["compare", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[MODEL_PARSE]"), "{err}");
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn missing_model_file_is_an_io_error() {
    let o = cwcu(&["compare", "--model", "/nonexistent/model.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[IO]"));
}

#[test]
fn mc_is_byte_identical_across_runs_and_workers() {
    let base = ["mc", "--seed", "11", "--trials", "20000"];
    let run = |workers: &str| {
        let mut args = base.to_vec();
        args.extend(["--workers", workers]);
        let o = cwcu(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        o.stdout
    };
    let first = run("1");
    assert_eq!(first, run("1"));
    assert_eq!(first, run("4"));
    let text = String::from_utf8(first).unwrap();
    assert!(!text.contains("worker"));
}

#[test]
fn mc_reports_lmmse_slopes_and_cwcu_checks() {
    let o = cwcu(&["mc", "--seed", "2", "--trials", "50000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["pass"], true);
    let d: Vec<f64> = report["d"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let ests = report["estimators"].as_array().unwrap();
    let kinds: Vec<&str> = ests.iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["LMMSE", "CWCU_LINEAR_GAUSSIAN", "B1"]);
    let lmmse_slopes = ests[0]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["quantity"] == "slope");
    for (i, c) in lmmse_slopes.enumerate() {
        let expected = c["expected"][0].as_f64().unwrap();
        assert!((expected - 1.0 / d[i]).abs() < 1e-12);
        assert_eq!(c["pass"], true);
    }
}

#[test]
fn mc_non_gaussian_priors_pass() {
    for prior in [
        "independent:qpsk",
        "independent:uniform",
        "independent:gaussian",
    ] {
        let o = cwcu(&["mc", "--seed", "3", "--trials", "30000", "--prior", prior]);
        assert_eq!(o.status.code(), Some(0), "{prior}: {}", stderr(&o));
        let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(report["prior"], prior);
        assert_eq!(report["estimators"][1]["kind"], "CWCU_INDEPENDENT");
    }
}

#[test]
fn mc_dumps_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cwcu(&[
        "mc",
        "--trials",
        "2000",
        "--n",
        "2",
        "--m",
        "3",
        "--out",
        out,
        "--dump-pairs",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("mc.json").exists());
    let pairs = fs::read_to_string(dir.path().join("pairs_cwcu_linear_gaussian.csv")).unwrap();
    assert_eq!(pairs.lines().count(), 1 + 2 * 2000);
    assert!(dir.path().join("pairs_lmmse.csv").exists());
    assert!(dir.path().join("pairs_b1.csv").exists());
}

#[test]
fn mc_rejects_joint_models() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("joint.json");
    fs::write(
        &path,
        r#"{"version": "cwcu-model-v1", "kind": "joint_gaussian", "n": 1, "m": 1,
  "mean_x": [[0, 0]], "mean_y": [[0, 0]],
  "C_xx": [[[1, 0]]], "C_xy": [[[0.5, 0]]], "C_yy": [[[1, 0]]]}"#,
    )
    .unwrap();
    let o = cwcu(&["mc", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[INVALID_SETUP]"));

    let o = cwcu(&["compare", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(
        text.lines().next().unwrap(),
        "component,d,bmse_lmmse,bmse_cwcu_moments"
    );
    // D = 1/0.25 = 4, CWCU MSE = 3
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "0,4.00000000e0,7.50000000e-1,3.00000000e0"
    );
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn chanest_writes_figures_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cwcu(&["chanest", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["argmax_subcarrier"], 32);
    let peak = summary["max_blue_freq_bmse"].as_f64().unwrap();
    assert!((32.4..=39.6).contains(&peak));
    for label in ["blue", "lmmse", "cwcu"] {
        assert!(summary["mean_bmse_time"][label].is_number());
    }
    assert!(summary["mean_bmse_frequency"]["trivial"].is_number());

    let fig2 = read_csv(&dir.path().join("fig2.csv"));
    assert_eq!(fig2.len(), 17);
    let fig3 = read_csv(&dir.path().join("fig3.csv"));
    assert_eq!(fig3.len(), 65);
    for row in &fig3[1..] {
        let k: usize = row[0].parse().unwrap();
        let unused = k == 0 || (27..=37).contains(&k);
        assert_eq!(row[4].is_empty(), unused, "subcarrier {k}");
    }
}

#[test]
fn chanest_golden_time_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = cwcu(&["chanest", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let actual = fs::read_to_string(dir.path().join("fig2.csv")).unwrap();
    let golden = include_str!("golden/fig2.csv");
    assert_eq!(actual, golden);
}

#[test]
fn chanest_lower_noise_lowers_every_curve() {
    let loud = tempfile::tempdir().unwrap();
    let quiet = tempfile::tempdir().unwrap();
    cwcu(&["chanest", "--out", loud.path().to_str().unwrap()]);
    let o = cwcu(&[
        "chanest",
        "--out",
        quiet.path().to_str().unwrap(),
        "--sigma-n2",
        "0.0001",
    ]);
    assert_eq!(o.status.code(), Some(0));
    for file in ["fig2.csv", "fig3.csv"] {
        let a = read_csv(&loud.path().join(file));
        let b = read_csv(&quiet.path().join(file));
        for (ra, rb) in a[1..].iter().zip(&b[1..]) {
            for (x, y) in ra[1..].iter().zip(&rb[1..]) {
                if x.is_empty() {
                    assert!(y.is_empty());
                    continue;
                }
                let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
                assert!(y < x, "{file} row {}: {y} !< {x}", ra[0]);
            }
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cwcu(&["bogus"]).status.code(), Some(2));
    assert_eq!(cwcu(&["mc", "--prior", "laplace"]).status.code(), Some(2));
}
