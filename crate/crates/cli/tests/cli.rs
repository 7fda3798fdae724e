use std::path::Path;
use std::process::{Command, Output};

fn orffkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orffkit"))
        .args(args)
        .env_remove("ORFFKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_rows(path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn synth_fit_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("curl.csv");
    let model = dir.path().join("model.json");
    let pred = dir.path().join("pred.csv");

    let out = orffkit(&[
        "synth",
        "--which",
        "curl-field",
        "--n",
        "200",
        "--seed",
        "3",
        "--out",
        s(&data),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let header = std::fs::read_to_string(&data).unwrap();
    assert!(header.starts_with("x1,x2,y1,y2\n"));

    let out = orffkit(&[
        "fit",
        "--data",
        s(&data),
        "--kernel",
        "curl",
        "--sigma",
        "0.3",
        "--features",
        "300",
        "--lambda",
        "1e-4",
        "--seed",
        "5",
        "--model",
        s(&model),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(doc["D"], 300);
    assert_eq!(doc["seed"], 5);
    assert_eq!(doc["theta"].as_array().unwrap().len(), 600);

    let out = orffkit(&[
        "predict",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--out",
        s(&pred),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let truth = read_rows(&data);
    let got = read_rows(&pred);
    assert_eq!(truth.len(), got.len());
    let (mut se, mut ss) = (0.0, 0.0);
    for (t, g) in truth.iter().zip(&got) {
        assert_eq!(t[..2], g[..2]);
        for k in 2..4 {
            se += (t[k] - g[k]).powi(2);
            ss += t[k].powi(2);
        }
    }
    // Training fit on a smooth field should explain almost all of the signal.
    assert!(se / ss < 0.05, "relative training error {}", se / ss);
}

#[test]
fn tampered_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let model = dir.path().join("m.json");
    orffkit(&[
        "synth",
        "--which",
        "div-field",
        "--n",
        "50",
        "--out",
        s(&data),
    ]);
    let out = orffkit(&[
        "fit",
        "--data",
        s(&data),
        "--kernel",
        "div",
        "--features",
        "20",
        "--lambda",
        "1e-3",
        "--model",
        s(&model),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&model).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["seed"] = serde_json::json!(1);
    std::fs::write(&model, doc.to_string()).unwrap();
    let out = orffkit(&[
        "predict",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--out",
        s(&data),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn bound_prints_json() {
    let out = orffkit(&[
        "bound",
        "--kernel",
        "curl",
        "--dim",
        "2",
        "--eps",
        "0.5",
        "--features",
        "1000",
        "--diameter",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc.is_object());
    assert!(!doc.as_object().unwrap().is_empty());
}

#[test]
fn invalid_arguments_exit_2() {
    let out = orffkit(&[
        "bound",
        "--kernel",
        "curl",
        "--dim",
        "2",
        "--eps",
        "-1",
        "--features",
        "10",
        "--diameter",
        "1",
    ]);
    assert_eq!(code(&out), 2);
    let out = orffkit(&["bound", "--kernel", "nope", "--dim", "2"]);
    assert_eq!(code(&out), 2);

    // Stein needs a decomposable kernel.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    orffkit(&[
        "synth",
        "--which",
        "curl-field",
        "--n",
        "20",
        "--out",
        s(&data),
    ]);
    let out = orffkit(&[
        "fit",
        "--data",
        s(&data),
        "--kernel",
        "curl",
        "--features",
        "10",
        "--lambda",
        "1e-3",
        "--solver",
        "stein",
        "--model",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = orffkit(&[
        "fit",
        "--data",
        s(&dir.path().join("absent.csv")),
        "--kernel",
        "curl",
        "--features",
        "10",
        "--lambda",
        "1e-3",
        "--model",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn convergence_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    orffkit(&[
        "synth",
        "--which",
        "curl-field",
        "--n",
        "100",
        "--out",
        s(&data),
    ]);
    let out = orffkit(&[
        "fit",
        "--data",
        s(&data),
        "--kernel",
        "curl",
        "--features",
        "50",
        "--lambda",
        "1e-6",
        "--max-iter",
        "2",
        "--model",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn oversized_dense_solve_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    orffkit(&[
        "synth",
        "--which",
        "curl-field",
        "--n",
        "3000",
        "--out",
        s(&data),
    ]);
    let out = orffkit(&[
        "fit",
        "--data",
        s(&data),
        "--kernel",
        "curl",
        "--features",
        "5000",
        "--lambda",
        "1e-3",
        "--solver",
        "dense",
        "--model",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("a.csv");
    let args = [
        "approx-error",
        "--kernel",
        "curl",
        "--dim",
        "2",
        "--dmin",
        "16",
        "--dmax",
        "32",
        "--pairs",
        "10",
        "--seeds",
        "2",
        "--out",
        s(&out_path),
    ];
    let bad = Command::new(env!("CARGO_BIN_EXE_orffkit"))
        .args(args)
        .env("ORFFKIT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
    let good = Command::new(env!("CARGO_BIN_EXE_orffkit"))
        .args(args)
        .env("ORFFKIT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&good), 0);
    let single = std::fs::read(&out_path).unwrap();
    assert_eq!(code(&orffkit(&args)), 0);
    // Results do not depend on the pool size.
    assert_eq!(single, std::fs::read(&out_path).unwrap());
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, args: &[&str]| {
        let path = dir.path().join(name);
        let mut full: Vec<&str> = args.to_vec();
        let p = path.to_str().unwrap().to_string();
        full.push("--out");
        full.push(&p);
        assert_eq!(code(&orffkit(&full)), 0);
        std::fs::read(&path).unwrap()
    };
    let synth = [
        "synth", "--which", "dec", "--n", "50", "--dgen", "200", "--noisy", "--seed", "9",
    ];
    assert_eq!(run("a.csv", &synth), run("b.csv", &synth));
    let approx = [
        "approx-error",
        "--kernel",
        "div",
        "--dim",
        "3",
        "--dmin",
        "16",
        "--dmax",
        "64",
        "--pairs",
        "20",
        "--seeds",
        "3",
        "--seed",
        "4",
    ];
    let first = run("c.csv", &approx);
    assert_eq!(first, run("d.csv", &approx));
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("sweep,metric,value,seconds,seed\n"));
    assert_eq!(text.lines().count(), 4);
    let variance = [
        "variance", "--kernel", "dec", "--dim", "2", "--deltas", "5", "--mc", "200",
    ];
    assert_eq!(run("e.csv", &variance), run("f.csv", &variance));
}
