use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn nklr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nklr"))
        .args(args)
        .output()
        .expect("spawn nklr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("error JSON on stderr");
    serde_json::from_str(line).expect("valid error JSON")
}

fn synth_csv(dir: &Path, name: &str, n: usize, classes: usize, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let n = n.to_string();
    let classes = classes.to_string();
    let mut args = vec![
        "synth", "--n", &n, "--m", "3", "--classes", &classes, "--seed", "7", "--output",
    ];
    let p = path.to_str().unwrap();
    args.push(p);
    args.extend_from_slice(extra);
    let out = nklr(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn train_writes_model_trace_and_report() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 500, 3, &[]);
    let out_dir = tmp.path().join("run");
    let out = nklr(&[
        "train", "--seed", "1", "--train", s(&data), "--landmarks", "50", "--method", "lbfgs", "--out-dir",
        s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.json", "trace.csv", "report.json"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    let (header, rows) = read_csv(&out_dir.join("trace.csv"));
    assert_eq!(header, ["iter", "loss", "grad_norm", "step", "seconds"]);
    assert!(!rows.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(report.to_string().contains("gmpca"));
}

#[test]
fn repeated_training_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 300, 3, &[]);
    let mut models = Vec::new();
    for tag in ["a", "b"] {
        let dir = tmp.path().join(tag);
        let out = nklr(&[
            "train", "--seed", "9", "--train", s(&data), "--landmarks", "25", "--strategy", "rls_leverage",
            "--mu", "1", "--out-dir", s(&dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        models.push(std::fs::read(dir.join("model.json")).unwrap());
    }
    assert_eq!(models[0], models[1]);
}

#[test]
fn too_many_landmarks_is_an_argument_error() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 100, 3, &[]);
    let out = nklr(&[
        "train", "--seed", "1", "--train", s(&data), "--landmarks", "500", "--out-dir", s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr_error(&out);
    assert_eq!(err["error"]["exit_code"], 2);
    assert!(err["error"]["kind"].is_string());
}

#[test]
fn missing_dataset_exits_nonzero() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.csv");
    for cmd in ["train", "bounds"] {
        let out = nklr(&[cmd, "--seed", "1", "--train", s(&missing), "--out-dir", s(&tmp.path().join("o"))]);
        assert_eq!(code(&out), 2, "{cmd}");
    }
}

#[test]
fn missing_seed_is_a_schema_error() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 50, 2, &[]);
    let out = nklr(&["train", "--train", s(&data)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn divergence_exits_with_numeric_code() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 100, 3, &[]);
    let out = nklr(&[
        "train", "--seed", "1", "--train", s(&data), "--landmarks", "10", "--method", "gd", "--delta0", "1e200",
        "--max-iters", "20", "--lambda", "1", "--out-dir", s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_error(&out)["error"]["kind"], "diverged");
}

#[test]
fn predict_and_evaluate_use_the_saved_model() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 200, 3, &[]);
    let dir = tmp.path().join("run");
    let out = nklr(&["train", "--seed", "3", "--train", s(&data), "--landmarks", "20", "--out-dir", s(&dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = dir.join("model.json");

    let pred = tmp.path().join("pred.csv");
    let out = nklr(&["predict", "--model", s(&model), "--input", s(&data), "--output", s(&pred)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&pred);
    assert_eq!(header.last().unwrap(), "predicted");
    assert_eq!(rows.len(), 200);
    for row in &rows {
        let total: f64 = row[..row.len() - 1].iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    let eval = tmp.path().join("eval.json");
    let out = nklr(&["evaluate", "--model", s(&model), "--data", s(&data), "--output", s(&eval)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(eval).unwrap()).unwrap();
    let gm = report["gmpca"].as_f64().unwrap();
    let cel = report["cel"].as_f64().unwrap();
    assert!((gm - (-cel).exp()).abs() < 1e-12);
}

#[test]
fn landmarks_command_writes_selection() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 120, 3, &[]);
    let dir = tmp.path().join("lm");
    let out = nklr(&[
        "landmarks", "--seed", "2", "--train", s(&data), "--strategy", "kmeans", "--landmarks", "8", "--out-dir",
        s(&dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.join("landmarks.csv"));
    assert_eq!(rows.len(), 8);
}

#[test]
fn bounds_sweep_has_one_row_per_c() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 300, 3, &[]);
    let dir = tmp.path().join("b");
    let out = nklr(&[
        "bounds", "--seed", "4", "--train", s(&data), "--test", s(&data), "--lambda", "1e-3", "--kernel-c",
        "0.25", "--strategy", "kmeans", "--c-grid", "5,10,20,40", "--out-dir", s(&dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.join("bounds.csv"));
    assert_eq!(
        header[..6],
        ["C", "sigma_{C+1}", "operator_term", "bound", "observed_error", "projection_residual"]
    );
    assert_eq!(rows.len(), 4);
    let observed: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    let inversions = observed.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "observed errors {observed:?}");
    assert!(dir.join("spectrum.csv").is_file());
    assert!(dir.join("bounds.json").is_file());
}

#[test]
fn bounds_with_every_point_as_landmark_has_no_operator_term() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 60, 2, &[]);
    let dir = tmp.path().join("b");
    let out = nklr(&[
        "bounds", "--seed", "4", "--train", s(&data), "--test", s(&data), "--lambda", "1e-2", "--strategy",
        "kmeans", "--c-grid", "60", "--out-dir", s(&dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.join("bounds.csv"));
    let op: f64 = rows[0][2].parse().unwrap();
    assert!(op < 1e-6, "operator term {op}");
}

#[test]
fn bounds_refuse_large_inputs() {
    let tmp = TempDir::new().unwrap();
    let out = nklr(&[
        "bounds",
        "--seed",
        "1",
        "--set",
        r#"data.synth={"n":2600,"m":2,"classes":2,"nonlinearity":"linear","seed":1}"#,
        "--c-grid",
        "5",
        "--out-dir",
        s(&tmp.path().join("b")),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn compare_needs_two_methods() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 100, 3, &[]);
    let out = nklr(&[
        "compare-optimizers", "--seed", "1", "--train", s(&data), "--methods", "adam", "--out-dir",
        s(&tmp.path().join("c")),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn compare_with_zero_budget_reports_log_classes() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 100, 4, &[]);
    let dir = tmp.path().join("c");
    let out = nklr(&[
        "compare-optimizers", "--seed", "1", "--train", s(&data), "--landmarks", "10", "--budget", "0", "--out-dir",
        s(&dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.join("summary.csv"));
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let loss: f64 = row[1].parse().unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn compare_ranks_lbfgs_first() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 400, 3, &[]);
    let dir = tmp.path().join("c");
    let out = nklr(&[
        "compare-optimizers", "--seed", "5", "--train", s(&data), "--landmarks", "30", "--budget", "500", "--delta0",
        "1", "--lambda", "1e-4", "--out-dir", s(&dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.join("summary.csv"));
    assert_eq!(rows[0][0], "lbfgs");
    let losses: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(losses.windows(2).all(|w| w[0] <= w[1]));
    for m in ["gd", "momentum", "adam", "lbfgs"] {
        assert!(dir.join(format!("trace_{m}.csv")).is_file());
    }
}

fn constrained(tmp: &TempDir, data: &Path, lambda: &str) -> Value {
    let dir = tmp.path().join(format!("x{lambda}"));
    let out = nklr(&[
        "constrained-experiment", "--seed", "6", "--train", s(data), "--landmarks", "10", "--lambda", lambda,
        "--path", "full", "--max-iters", "20000", "--tol", "1e-12", "--set", "optimizer.rel_tol=0", "--out-dir",
        s(&dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&std::fs::read_to_string(dir.join("constrained.json")).unwrap()).unwrap()
}

#[test]
fn pinning_the_last_alternative_costs_loss_under_a_penalty() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 300, 3, &[]);
    let with_penalty = constrained(&tmp, &data, "1e-4");
    assert!(with_penalty["gap"].as_f64().unwrap() > 0.0, "{with_penalty}");
    assert_eq!(with_penalty["holds"], true);
    let without = constrained(&tmp, &data, "0");
    assert!(without["gap"].as_f64().unwrap().abs() < 1e-6, "{without}");
}

#[test]
fn pinning_with_two_symmetric_classes_has_small_nonnegative_gap() {
    let tmp = TempDir::new().unwrap();
    let data = synth_csv(tmp.path(), "d.csv", 300, 2, &["--nonlinearity", "linear", "--signal", "0"]);
    let summary = constrained(&tmp, &data, "1e-4");
    let gap = summary["gap"].as_f64().unwrap();
    assert!(gap >= -1e-9 && gap < 1e-2, "{summary}");
}
