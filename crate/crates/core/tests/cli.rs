use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cdfdr::legendre::basis_row;
use cdfdr::special::{beta_cdf, beta_pdf};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

fn cdfdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdfdr"))
        .args(args)
        .env("CDFDR_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_stats(path: &Path, n: usize, n_signal: usize, shift: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("id,stat\n");
    for i in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let s = if i < n_signal { shift } else { 0.0 };
        csv.push_str(&format!("case{i},{}\n", z + s));
    }
    fs::write(path, csv).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn null_inputs_give_no_discoveries() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("null.csv");
    let out = dir.path().join("r.json");
    let mut clean = 0;
    for seed in 0..50 {
        write_stats(&input, 5000, 0, 0.0, 500 + seed);
        let o = cdfdr(&["fdr", "--input", s(&input), "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        if read_json(&out)["discoveries"]["n_discoveries"] == 0 {
            clean += 1;
        }
    }
    assert!(clean >= 45, "{clean}/50");
}

#[test]
fn out_of_range_pvalue_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    fs::write(&input, "pvalue\n0.5\n0.25\n1.2\n").unwrap();
    let out = dir.path().join("r.json");
    let o = cdfdr(&["fdr", "--input", s(&input), "--column", "pvalue", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("1.2"), "{err}");
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(cdfdr(&["fdr", "--bogus"]).status.code(), Some(2));
    assert_eq!(cdfdr(&["simulate", "--design", "mixunif", "--pi0", "1.5", "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(cdfdr(&["simulate", "--design", "mixunif", "--a", "0", "--out", s(&out)]).status.code(), Some(2));
    let input = dir.path().join("in.csv");
    write_stats(&input, 500, 0, 0.0, 1);
    assert_eq!(
        cdfdr(&["fdr", "--input", s(&input), "--null", "normal:0,-1", "--out", s(&out)]).status.code(),
        Some(2)
    );
    assert_eq!(cdfdr(&["fdr", "--input", "/nonexistent.csv", "--out", s(&out)]).status.code(), Some(2));
    // too few cases for a large-scale fit
    fs::write(&input, "stat\n1\n2\n3\n").unwrap();
    assert_eq!(cdfdr(&["fdr", "--input", s(&input), "--out", s(&out)]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn numerical_failure_exits_3_with_step() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("const.csv");
    let mut csv = String::from("pvalue\n");
    for _ in 0..200 {
        csv.push_str("0.5\n");
    }
    fs::write(&input, csv).unwrap();
    let out = dir.path().join("r.json");
    let o = cdfdr(&["fdr", "--input", s(&input), "--column", "pvalue", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta-fit"));
    assert!(!out.exists());
}

#[test]
fn curves_round_trip_to_reported_fdr() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    write_stats(&input, 4000, 400, 3.0, 21);
    let (out, curves) = (dir.path().join("r.json"), dir.path().join("c.csv"));
    let o = cdfdr(&["fdr", "--input", s(&input), "--out", s(&out), "--curves", s(&curves)]);
    assert!(o.status.success());
    let report = read_json(&out);
    let alpha = report["beta_fit"]["alpha"].as_f64().unwrap();
    let beta = report["beta_fit"]["beta"].as_f64().unwrap();
    let theta: Vec<f64> = report["coefficients"]["theta_hat"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let pi0 = report["pi0"]["pi0_hat"].as_f64().unwrap();
    let floor = report["floor"].as_f64().unwrap();

    let text = fs::read_to_string(&curves).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,u,v,d_hat,fdr"));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let u = cols[1].clamp(1e-10, 1.0 - 1e-10);
        let v = beta_cdf(u, alpha, beta).unwrap();
        let series = 1.0 + basis_row(theta.len(), v).unwrap().iter().zip(&theta).map(|(s, t)| s * t).sum::<f64>();
        let d = (beta_pdf(u, alpha, beta).unwrap() * series).max(floor);
        let fdr = (pi0 / d).min(1.0);
        assert!((fdr - cols[4]).abs() <= 1e-9, "{line}: {fdr}");
        assert!((v - cols[2]).abs() <= 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 4000 + 201);

    // per-case rows in the report agree too
    for case in report["cases"].as_array().unwrap().iter().take(50) {
        let fdr = case["fdr"].as_f64().unwrap();
        let d = case["d_hat"].as_f64().unwrap();
        assert!((fdr - (pi0 / d).min(1.0)).abs() <= 1e-12);
    }
    let n_disc = report["discoveries"]["n_discoveries"].as_u64().unwrap();
    let left = report["discoveries"]["n_left"].as_u64().unwrap();
    let right = report["discoveries"]["n_right"].as_u64().unwrap();
    assert_eq!(n_disc, left + right);
    assert!(n_disc > 0);
}

#[test]
fn pi0_command_on_uniform_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("u.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut csv = String::from("pvalue\n");
    for _ in 0..5000 {
        csv.push_str(&format!("{}\n", rand::Rng::random::<f64>(&mut rng)));
    }
    fs::write(&input, csv).unwrap();
    let (out, path) = (dir.path().join("p.json"), dir.path().join("path.csv"));
    let o = cdfdr(&["pi0", "--input", s(&input), "--column", "pvalue", "--out", s(&out), "--path", s(&path)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out);
    assert!(report["pi0_hat"].as_f64().unwrap() >= 0.98);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,D_lambda,n_lambda"));
    let lambdas: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    let skipped = report["skipped"].as_array().unwrap().len();
    assert_eq!(lambdas.len() + skipped, 251);
    assert!(lambdas.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn t_statistics_with_df() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.csv");
    write_stats(&input, 2000, 100, 4.0, 8);
    let out = dir.path().join("r.json");
    let o = cdfdr(&["fdr", "--input", s(&input), "--df", "100", "--out", s(&out)]);
    assert!(o.status.success());
    let report = read_json(&out);
    assert_eq!(report["config"]["t_to_z_df"], 100.0);
    let case = &report["cases"][0];
    assert_ne!(case["input"], case["stat"]);
    assert!(case["input"].as_f64().unwrap().abs() > case["stat"].as_f64().unwrap().abs());
}

#[test]
fn simulate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (out, curves) = (dir.path().join("s.json"), dir.path().join("s.csv"));
    let o = cdfdr(&[
        "simulate", "--design", "mixunif", "--pi0", "0.9", "--a", "0.02", "--replicates", "3", "--out", s(&out),
        "--curves", s(&curves),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out);
    assert!(report["tail_mise"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["pi0_estimates"].as_array().unwrap().len(), 3);
    let text = fs::read_to_string(&curves).unwrap();
    assert!(text.starts_with("grid,true_fdr,mean_fdr,sd_fdr\n"));
    assert_eq!(text.lines().count(), 401);

    let o = cdfdr(&["simulate", "--design", "mixnorm", "--mu", "2", "--replicates", "1", "--seed", "7", "--out", s(&out)]);
    assert!(o.status.success());
    let report = read_json(&out);
    assert!(report["tail_mise"].is_null());
    assert!(report["sd_fdr"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
}

#[test]
fn thread_setting_is_validated_and_irrelevant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let args = ["simulate", "--design", "mixunif", "--replicates", "4", "--n", "1000", "--out", s(&out)];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_cdfdr"))
            .args(args)
            .env("CDFDR_THREADS", threads)
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    let one = fs::read(&out).unwrap();
    assert!(run("0").status.success());
    assert_eq!(one, fs::read(&out).unwrap());
    assert_eq!(run("many").status.code(), Some(2));
}
