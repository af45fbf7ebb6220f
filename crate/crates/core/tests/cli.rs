use std::path::Path;
use std::process::{Command, Output};

use mipart::cli::{rescore, ResultRecord};
use mipart::distributions::{awgn_binary_channel, load_joint, ChannelSpec};
use mipart::{ConstraintSpec, ImpurityLoss, ObjectiveSpec};
use serde_json::Value;

const TINY: &str = r#"{"matrix": [[0.2, 0.15, 0.05, 0.1], [0.05, 0.15, 0.25, 0.05]]}"#;

fn mipart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mipart"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny(dir: &Path) -> String {
    let path = dir.join("tiny.json");
    std::fs::write(&path, TINY).unwrap();
    path.display().to_string()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn result(report: &Value) -> ResultRecord {
    serde_json::from_value(report["result"].clone()).unwrap()
}

#[test]
fn solve_with_single_cluster_labels_everything_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny(dir.path());
    let report = stdout_json(&mipart(&["solve", "--input", &input, "--k", "1", "--beta", "2", "--seed", "4"]));
    assert_eq!(report["schema"], 1);
    assert_eq!(report["seed"], 4);
    assert_eq!(report["instance"]["n_inputs"], 2);
    assert_eq!(report["instance"]["n_observations"], 4);
    assert_eq!(result(&report).labels, vec![1, 1, 1, 1]);
}

#[test]
fn report_labels_rescore_to_reported_objective() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny(dir.path());
    let out = dir.path().join("report.json");
    let status = mipart(&[
        "solve", "--input", &input, "--k", "2", "--loss", "gini", "--constraint", "linear",
        "--costs", "0.1,0.3", "--beta", "1.5", "--restarts", "5", "--output",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let r = result(&report);
    assert_eq!(report["objective_spec"]["costs"], serde_json::json!([0.1, 0.3]));
    let jd = load_joint(Path::new(&input)).unwrap().unwrap();
    let obj = ObjectiveSpec::new(ImpurityLoss::Gini, ConstraintSpec::Linear(vec![0.1, 0.3]), 1.5).unwrap();
    let value = rescore(&jd, &r.labels, 2, &obj).unwrap();
    assert!((value - r.objective).abs() < 1e-12);
    assert!((r.objective - (1.5 * r.impurity + r.constraint)).abs() < 1e-9);
}

#[test]
fn oracle_dominates_solver() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny(dir.path());
    let common = ["--input", input.as_str(), "--k", "2", "--beta", "1"];
    let solve = stdout_json(&mipart(&[&["solve"], &common[..], &["--restarts", "3"]].concat()));
    for method in ["brute-force", "contiguous"] {
        let oracle = stdout_json(&mipart(&[&["oracle"], &common[..], &["--method", method]].concat()));
        let exact = oracle["result"]["objective"].as_f64().unwrap();
        assert!(exact <= result(&solve).objective + 1e-9, "{method}");
    }
}

#[test]
fn csv_input_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.csv");
    std::fs::write(&path, "0.2,0.15,0.05,0.1\n0.05,0.15,0.25,0.05\n").unwrap();
    let report = stdout_json(&mipart(&["solve", "--input", path.to_str().unwrap(), "--k", "2", "--beta", "1"]));
    assert_eq!(report["instance"]["n_observations"], 4);
}

#[test]
fn sweep_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny(dir.path());
    let run = |name: &str| {
        let csv = dir.path().join(name);
        let out = mipart(&[
            "sweep", "--input", &input, "--k", "2", "--betas", "0:3:0.5", "--restarts", "4",
            "--seed", "11", "--csv", csv.to_str().unwrap(),
        ]);
        let report = stdout_json(&out);
        assert_eq!(report["results"].as_array().unwrap().len(), 7);
        std::fs::read(csv).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("beta,F,C,I_bits,HZ_bits\n"));
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn sweep_writes_csv_next_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny(dir.path());
    let out = dir.path().join("sweep.json");
    let status = mipart(&[
        "sweep", "--input", &input, "--k", "2", "--betas", "0,1,6", "--budget", "0.9",
        "--output", out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    assert!(dir.path().join("sweep.csv").exists());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["selected"]["index"].is_u64());
}

#[test]
fn channel_example_command() {
    let out = mipart(&[
        "channel", "--prior", "0.2,0.8", "--means", "-1,1", "--sigma", "1", "--range", "-10,10",
        "--bins", "200", "solve", "--k", "2", "--loss", "entropy", "--constraint", "entropy",
        "--beta", "6", "--restarts", "20", "--seed", "1",
    ]);
    let report = stdout_json(&out);
    let r = result(&report);
    assert_eq!(r.labels.len(), 200);
    assert_eq!(report["instance"]["source"]["channel"]["bins"], 200);
    // the beta = 6 optimum on this grid is the threshold at y = -0.6
    assert!((r.mutual_info_bits - 0.237_863_327_087_098_45).abs() < 1e-9, "{}", r.mutual_info_bits);
    assert!((r.output_entropy_bits - 0.668_845_302_662_736_7).abs() < 1e-9);
}

#[test]
fn channel_without_command_writes_joint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("joint.json");
    let status = mipart(&["channel", "--bins", "20", "--output", out.to_str().unwrap()]);
    assert!(status.status.success());
    let jd = load_joint(&out).unwrap().unwrap();
    let spec = ChannelSpec {
        prior: [0.2, 0.8],
        means: [-1.0, 1.0],
        sigma: 1.0,
        range: (-10.0, 10.0),
        bins: 20,
    };
    assert_eq!(jd, awgn_binary_channel(&spec).unwrap());
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny(dir.path());
    let cases: [(&[&str], &str); 5] = [
        (&["solve", "--input", &input, "--k", "2", "--beta", "-1"], "beta"),
        (&["solve", "--input", &input, "--k", "2", "--beta", "1", "--loss", "hinge"], "loss"),
        (&["solve", "--input", &input, "--k", "2", "--beta", "1", "--constraint", "linear", "--costs", "1"], "costs"),
        (&["sweep", "--input", &input, "--k", "2", "--betas", "1:0:1"], "betas"),
        (&["channel", "--sigma", "0", "solve", "--k", "2", "--beta", "1"], "sigma"),
    ];
    for (args, field) in cases {
        let out = mipart(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(field), "{args:?}: {stderr}");
    }
    // clap usage errors share the config exit status
    assert_eq!(mipart(&["solve", "--k", "2"]).status.code(), Some(2));
    let out = mipart(&["channel", "solve", "--input", &input, "--k", "2", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn downstream_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"matrix": [[0.6, 0.6]]}"#).unwrap();
    let out = mipart(&["solve", "--input", bad.to_str().unwrap(), "--k", "1", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sums to"));

    let big = dir.path().join("big.csv");
    let row = vec!["0.025"; 40].join(",");
    std::fs::write(&big, &row).unwrap();
    let out = mipart(&["oracle", "--input", big.to_str().unwrap(), "--k", "3", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("too large"));
}
