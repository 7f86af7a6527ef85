use std::fs;
use std::path::Path;
use std::process::Command;

fn fsreg(out: &Path, args: &[&str]) -> (i32, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_fsreg"))
        .args(args)
        .env("FSREG_OUTPUT_DIR", out)
        .output()
        .unwrap();
    (
        output.status.code().unwrap(),
        String::from_utf8(output.stdout).unwrap(),
        String::from_utf8(output.stderr).unwrap(),
    )
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn series_check_writes_the_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, stdout, _) = fsreg(tmp.path(), &["series-check", "--run-name", "a"]);
    assert_eq!(code, 0, "{stdout}");
    let dir = tmp.path().join("series-check/a");
    let csv = read(dir.join("series.csv"));
    assert_eq!(csv.lines().next().unwrap(), "lambda,A,Aprime,B,B1,pred_A,pred_B,branch");
    assert_eq!(csv.lines().count(), 42);
    assert!(read(dir.join("summary.txt")).contains("status: pass"));
    for f in ["config_resolved.toml", "meta.txt", "slopes.csv"] {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn inverted_lambda_grid_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, stderr) = fsreg(tmp.path(), &["oracle-rates", "--lambda-lo", "1", "--lambda-hi", "0.1"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("fsreg::selection"), "{stderr}");
    assert!(stderr.contains("lo < hi"), "{stderr}");
    // nothing is written for an invalid config
    assert!(!tmp.path().join("oracle-rates").exists());
}

#[test]
fn unknown_flags_and_config_keys_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(fsreg(tmp.path(), &["spectrum", "--bogus"]).0, 2);
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[spectrum]\nthetta = 2.0\n").unwrap();
    let (code, _, stderr) = fsreg(tmp.path(), &["--config", cfg.to_str().unwrap(), "spectrum"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("thetta"), "{stderr}");
}

#[test]
fn out_of_range_values_name_the_module() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, stderr) = fsreg(tmp.path(), &["spectrum", "--theta=-1"]);
    assert_eq!(code, 2);
    assert!(
        stderr.contains("fsreg::spectrum") && stderr.contains("theta"),
        "{stderr}"
    );
    let (code, _, stderr) = fsreg(tmp.path(), &["spectrum", "--r=-0.5"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("r > (beta - 1)/2"), "{stderr}");
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "master_seed = 9\n[spectrum]\ntheta = 2.0\nn = 7\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let (code, _, _) = fsreg(
        tmp.path(),
        &["--config", cfg, "--run-name", "a", "spectrum", "--n", "5"],
    );
    assert_eq!(code, 0);
    let resolved = read(tmp.path().join("spectrum/a/config_resolved.toml"));
    assert!(resolved.contains("master_seed = 9"), "{resolved}");
    assert!(resolved.contains("theta = 2.0"), "{resolved}");
    assert!(resolved.contains("n = 5"), "{resolved}");
    assert_eq!(read(tmp.path().join("spectrum/a/spectrum.csv")).lines().count(), 6);
}

#[test]
fn resolved_config_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[oracle_rates]\nr = [1.2]\ns = [1.0]\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    for name in ["a", "b"] {
        let args = [
            "--config",
            cfg,
            "--run-name",
            name,
            "oracle-rates",
            "--theta",
            "1.5",
            "--family",
            "exp",
        ];
        assert_eq!(fsreg(tmp.path(), &args).0, 0);
    }
    let dir = tmp.path().join("oracle-rates");
    for f in ["config_resolved.toml", "oracle_rates.csv", "oracle_points.csv"] {
        assert_eq!(
            fs::read(dir.join("a").join(f)).unwrap(),
            fs::read(dir.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let resolved = read(dir.join("a/config_resolved.toml"));
    assert!(resolved.contains("sigma_count = 91"), "defaults filled: {resolved}");
}

#[test]
fn finite_rank_reports_the_l2_floor_and_vanishing_hs_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, stdout, _) = fsreg(
        tmp.path(),
        &["finite-rank", "--K", "1", "--eps-norm", "0.1", "--run-name", "a"],
    );
    // the stated L² bound of 0.2 is not attained, so the run reports a failed check
    assert_eq!(code, 1, "{stdout}");
    let summary = read(tmp.path().join("finite-rank/a/summary.txt"));
    assert!(summary.contains("FAIL L2 minimal error >= 2 sqrt(K)"), "{summary}");
    assert!(
        summary.contains("PASS L2 minimal error >= sigma-independent floor"),
        "{summary}"
    );
    assert!(summary.contains("PASS H^s error at lambda=sigma <= bound"), "{summary}");
    let csv = read(tmp.path().join("finite-rank/a/finite_rank.csv"));
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        let (sigma, l2, stated, hs) = (r[0], r[1], r[3], r[7]);
        assert_eq!(stated, 0.2);
        assert!(l2 > 0.14 && l2 < 0.2, "{l2}");
        assert!(hs <= 2.0 * sigma * sigma * (1.0 + 1e-12));
    }
}

#[test]
fn rate_fit_recovers_an_exact_power_law() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("p.csv");
    let mut text = String::from("sigma,value\n");
    for k in 0..6 {
        let sigma = 10f64.powi(-k);
        text.push_str(&format!("{sigma},{}\n", 3.0 * sigma.powf(1.5)));
    }
    text.push_str("1e-9,1\n");
    fs::write(&input, text).unwrap();
    let input = input.to_str().unwrap();
    let args = [
        "--run-name",
        "a",
        "rate-fit",
        "--input",
        input,
        "--exclude",
        "6",
        "--expected-slope",
        "1.5",
    ];
    let (code, stdout, _) = fsreg(tmp.path(), &args);
    assert_eq!(code, 0, "{stdout}");
    let csv = read(tmp.path().join("rate-fit/a/rate_fit.csv"));
    let row: Vec<f64> = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((row[0] - 1.5).abs() < 1e-12);
    assert!((row[1] - 3f64.ln()).abs() < 1e-12);
    assert_eq!((row[3], row[4]), (6.0, 1.0));

    let (code, _, _) = fsreg(
        tmp.path(),
        &[
            "--run-name",
            "b",
            "rate-fit",
            "--input",
            input,
            "--expected-slope",
            "1.5",
        ],
    );
    assert_eq!(code, 1, "the outlier spoils the fit");
    assert_eq!(fsreg(tmp.path(), &["rate-fit"]).0, 2);
}

#[test]
fn a_non_empty_run_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(fsreg(tmp.path(), &["--run-name", "a", "spectrum"]).0, 0);
    let (code, _, stderr) = fsreg(tmp.path(), &["--run-name", "a", "spectrum"]);
    assert_eq!(code, 3);
    assert!(stderr.contains("not empty"), "{stderr}");
}

#[test]
fn fredholm_small_run_writes_all_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "--run-name",
        "a",
        "--jobs",
        "2",
        "fredholm",
        "--m",
        "60",
        "--replicates",
        "2",
        "--sigma-count",
        "4",
        "--selector-count",
        "40",
        "--export-eigenvectors",
    ];
    let (code, stdout, stderr) = fsreg(tmp.path(), &args);
    assert!(code == 0 || code == 1, "{stdout}{stderr}");
    let dir = tmp.path().join("fredholm/a");
    let practical = read(dir.join("practical.csv"));
    assert_eq!(
        practical.lines().next().unwrap(),
        "s,sigma,method,replicate,lambda,error,at_boundary"
    );
    let failures = read(dir.join("failures.csv")).lines().count() - 1;
    // 3 values of s, 4 of σ, 2 replicates, 3 methods
    assert_eq!(practical.lines().count() - 1 + failures, 72);
    let traces = read(dir.join("traces.csv"));
    assert_eq!(
        traces.lines().next().unwrap(),
        "s,sigma,method,lambda,criterion,residual,solution_norm"
    );
    assert_eq!(read(dir.join("eigenvectors.csv")).lines().count(), 1 + 60 * 60);
    assert_eq!(read(dir.join("eigen.csv")).lines().count(), 11);
    assert!(read(dir.join("meta.txt")).contains("jobs = 2"));
}
