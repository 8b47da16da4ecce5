//! End-to-end runs of the `uhlmann-kit` binary.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uhlmann-kit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

const BAD_MODEL: &str = r#"{
  "kind": "parallel_exp", "n": 2, "m": 1,
  "generators": [{"re": [[1, 0], [0, -1]], "im": [[0, 0], [0, 0]]}],
  "base_state": {"re": [[1.2, 0], [0, -0.2]], "im": [[0, 0], [0, 0]]}
}"#;

#[test]
fn non_psd_model_file_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, BAD_MODEL).unwrap();
    let o = run(&["classify", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("positivity_floor") && err.contains("base_state"),
        "{err}"
    );
}

#[test]
fn user_model_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("good.json");
    std::fs::write(
        &path,
        BAD_MODEL.replace("1.2, 0], [0, -0.2", "0.7, 0], [0, 0.3"),
    )
    .unwrap();
    let v = stdout(&run(&[
        "classify",
        "--model",
        path.to_str().unwrap(),
        "--grid",
        "3",
        "--loops",
        "2",
    ]));
    assert_eq!(v["verdict"], "quasi_classical");
    assert_eq!(v["loops_agree"], true);
}

#[test]
fn exit_codes_follow_error_kinds() {
    assert_eq!(
        run(&["fisher", "--zoo", "bloch_full", "--theta", "1.2,0,0"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(&["estimate", "--zoo", "bloch_full", "--theta", "0.1,0.2,0.3"])
            .status
            .code(),
        Some(5)
    );
    assert_eq!(
        run(&[
            "holonomy",
            "--zoo",
            "bloch_full",
            "--path",
            "0,0,0;0.5,0,0",
            "--steps",
            "2"
        ])
        .status
        .code(),
        Some(2)
    );
    let o = run(&["fisher", "--zoo", "nope", "--theta", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("classical_simplex"));
    assert_eq!(
        run(&["fisher", "--zoo", "bloch_full", "--theta", "0,0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn classify_verdicts() {
    let v = stdout(&run(&["classify", "--zoo", "classical_simplex"]));
    assert_eq!(v["verdict"], "quasi_classical");
    let v = stdout(&run(&["classify", "--zoo", "bloch_full", "--grid", "3"]));
    assert_eq!(v["verdict"], "not_locally_quasi_classical");
    assert!(
        v["classification"]["worst_local_commutator"]["norm"]
            .as_f64()
            .unwrap()
            > 0.1
    );
    assert_eq!(v["flatness_consistent"], true);
}

#[test]
fn fisher_at_bloch_center_is_identity() {
    let v = stdout(&run(&["fisher", "--zoo", "bloch_full", "--theta", "0,0,0"]));
    for i in 0..3 {
        for j in 0..3 {
            let x = v["fisher"][i][j].as_f64().unwrap();
            assert!((x - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-12);
        }
    }
    assert_eq!(v["config"]["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn holonomy_on_classical_path_is_trivial() {
    let v = stdout(&run(&[
        "holonomy",
        "--zoo",
        "classical_simplex",
        "--path",
        "0.2,0.8,0.2",
    ]));
    assert!(v["transport"]["rpf_distance"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn estimate_writes_report_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est.json");
    let csv = dir.path().join("counts.csv");
    let args = [
        "estimate",
        "--zoo",
        "classical_simplex",
        "--theta",
        "0.3",
        "--samples",
        "100000",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
        "--counts",
        csv.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["max_mc_deviation_in_std_errors"].as_f64().unwrap() <= 5.0);
    assert!((v["exact"]["cov"][0][0].as_f64().unwrap() - 0.21).abs() <= 1e-10);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("outcome,count"));
    let total: u64 = lines
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 100_000);
}

#[test]
fn reports_are_byte_identical_across_worker_counts() {
    let args = [
        "estimate",
        "--zoo",
        "parallel_exp",
        "--theta",
        "0.1,-0.2",
        "--samples",
        "200000",
        "--seed",
        "3",
    ];
    let one = bin()
        .args(args)
        .env("UHLMANN_KIT_THREADS", "1")
        .output()
        .unwrap();
    let eight = bin()
        .args(args)
        .env("UHLMANN_KIT_THREADS", "8")
        .output()
        .unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, eight.stdout);
    assert!(!String::from_utf8_lossy(&one.stdout).contains("THREADS"));
    assert_eq!(
        bin()
            .args(args)
            .env("UHLMANN_KIT_THREADS", "0")
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn zoo_lists_every_model() {
    let v = stdout(&run(&["zoo"]));
    let names: Vec<&str> = v["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "bloch_full",
            "bloch_equator2",
            "classical_simplex",
            "parallel_exp",
            "user_file"
        ]
    );
}
