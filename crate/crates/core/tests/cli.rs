use std::path::Path;
use std::process::{Command, Output};

use auxspline::basis::IntervalPartition;
use auxspline::bundle::{read_samples, read_xy, write_xy};
use auxspline::conjugate::{BasisChoice, ConjugateModel};
use auxspline::data::Dataset;
use auxspline::priors::PriorConfig;
use auxspline::simulate::{simulate_example, Example};

fn auxspline(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_auxspline"));
    cmd.args(args).env_remove("AUXSPLINE_OUTPUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn sample_data(dir: &Path) -> String {
    let sim = simulate_example(Example::Dms2, 60, None, 9).unwrap();
    let path = dir.join("data.csv");
    write_xy(&path, &sim.data, "x", "y").unwrap();
    path.to_string_lossy().into_owned()
}

const SHORT: [&str; 4] = ["--iterations", "120", "--burnin", "30"];

#[test]
fn missing_column_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.csv");
    std::fs::write(&path, "x,z\n0.1,1\n0.2,2\n").unwrap();
    let out = auxspline(&["fit", "--data", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("column 'y' not found"));
}

#[test]
fn bad_flags_and_help() {
    assert_eq!(
        auxspline(&["fit", "--no-such-flag"], &[]).status.code(),
        Some(2)
    );
    assert_eq!(auxspline(&["--help"], &[]).status.code(), Some(0));
    let out = auxspline(
        &["simulate", "--example", "sk1", "--n", "10", "--sigma", "-1"],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_to_stdout() {
    let out = auxspline(
        &[
            "simulate",
            "--example",
            "poisson",
            "--n",
            "25",
            "--seed",
            "4",
        ],
        &[],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y"));
    assert_eq!(lines.count(), 25);
}

#[test]
fn fit_writes_a_complete_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let data = sample_data(tmp.path());
    let dir = tmp.path().join("run");
    let mut args = vec![
        "fit",
        "--data",
        &data,
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "3",
    ];
    args.extend(SHORT);
    let out = auxspline(&args, &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "samples.csv",
        "curve.csv",
        "summary.json",
        "diagnostics.csv",
    ] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["n"], 60);
    assert_eq!(summary["samples"], 120);
    let curve = std::fs::read_to_string(dir.join("curve.csv")).unwrap();
    assert!(curve
        .lines()
        .next()
        .unwrap()
        .starts_with("grid_x,map,bma,lower,upper"));
    assert_eq!(
        std::fs::read_to_string(dir.join("diagnostics.csv"))
            .unwrap()
            .lines()
            .count(),
        151
    );
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let data = sample_data(tmp.path());
    let dir = tmp.path().join("from-env");
    let mut args = vec!["fit", "--data", data.as_str()];
    args.extend(SHORT);
    let out = auxspline(&args, &[("AUXSPLINE_OUTPUT_DIR", &dir)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("samples.csv").is_file());
}

/// Every recorded log posterior can be recomputed from the bundle alone.
#[test]
fn bundle_round_trip_recomputes_log_posterior() {
    let tmp = tempfile::tempdir().unwrap();
    let data_path = sample_data(tmp.path());
    let dir = tmp.path().join("run");
    let mut args = vec!["fit", "--data", &data_path, "--out", dir.to_str().unwrap()];
    args.extend(SHORT);
    assert!(auxspline(&args, &[]).status.success());

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    let bounds: Vec<f64> = serde_json::from_value(summary["interval_bounds"].clone()).unwrap();
    let prior = &summary["prior"];
    let priors = PriorConfig {
        c: prior["c"].as_f64().unwrap(),
        lambda: prior["lambda"].as_f64().unwrap(),
        max_knots: prior["max_knots"].as_u64().unwrap() as usize,
    };
    let degree = summary["config"]["model"]["degree"].as_u64().unwrap() as usize;
    let data: Dataset = read_xy(Path::new(&data_path), "x", "y").unwrap();
    let part = IntervalPartition::from_bounds(&bounds).unwrap();
    let model =
        ConjugateModel::new(&data, &part, priors, BasisChoice::TruncatedPower, degree).unwrap();
    let samples = read_samples(&dir.join("samples.csv")).unwrap();
    assert_eq!(samples.len(), 120);
    for s in &samples {
        let lp = model.log_marginal_posterior(&s.state).log_value;
        assert!(
            (lp - s.log_post).abs() < 1e-8,
            "iteration {}: {lp} vs {}",
            s.iteration,
            s.log_post
        );
    }
}

#[test]
fn replicate_study_reports_both_estimators() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("study");
    let out = auxspline(
        &[
            "replicate-study",
            "--example",
            "sk1",
            "--n",
            "40",
            "--replicates",
            "3",
            "--out",
            dir.to_str().unwrap(),
            "--iterations",
            "60",
            "--burnin",
            "20",
        ],
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let study: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("study.json")).unwrap()).unwrap();
    assert_eq!(study["results"].as_array().unwrap().len(), 3);
    assert!(study["map"]["mean"].as_f64().unwrap() > 0.0);
    assert!(study["bma"]["mean"].as_f64().unwrap() > 0.0);
}
