//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Reference values come from closed forms written out here, independently of
//! the library code under test. A FAIL does not fail `cargo test` unless
//! `FSREG_ACCEPTANCE_STRICT=1` is set.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::Instant;

use clap::Parser;

use fsreg::estimators::{expected_error, finite_rank_bias_demo, realized_error, sample_noise, FiniteRankConfig};
use fsreg::fredholm::build_problem;
use fsreg::math::logspace;
use fsreg::rates::{
    lambda_spread, median_error_ratio, median_lambda, run_oracle_rate_experiment, run_practical_experiment,
    OracleRateCell, OracleRateConfig, PracticalConfig,
};
use fsreg::rng::{derive_seed, label};
use fsreg::selection::{critical_point_residual, oracle_lambda, LambdaGrid, Method};
use fsreg::series::{series_a, series_b};
use fsreg::spectrum::{
    build_spectrum, build_true_function, CoefficientLaw, DecayFamily, PerturbationBounds, Spectrum, TrueFunction,
};

struct Outcome {
    id: &'static str,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(id: &'static str, title: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome {
        id,
        title,
        passed,
        detail,
    }
}

/// Uniform on [0, 1) from a keyed seed.
fn unit(master: u64, key: &[u64]) -> f64 {
    (derive_seed(master, key) >> 11) as f64 / (1u64 << 53) as f64
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn exp_spectrum(n: usize) -> Spectrum {
    build_spectrum(DecayFamily::Exponential { theta: 1.5 }, n, PerturbationBounds::UNIT, 0).unwrap()
}

fn truth(spectrum: &Spectrum, r: f64) -> TrueFunction {
    build_true_function(
        spectrum,
        r,
        PerturbationBounds::UNIT,
        0,
        Vec::new(),
        CoefficientLaw::Rademacher,
    )
    .unwrap()
}

fn oracle_cells(r: f64, s_values: &[f64]) -> Vec<OracleRateCell> {
    let cfg = OracleRateConfig {
        r_values: vec![r],
        s_values: s_values.to_vec(),
        sigmas: logspace(1e-7, 1e-3, 20),
        ..OracleRateConfig::default()
    };
    run_oracle_rate_experiment(&cfg).unwrap()
}

fn criterion_1(cells: &[OracleRateCell]) -> Outcome {
    let r = 1.2;
    let err_theory = 2.0 - 2.0 / (2.0 * r + 1.0);
    let mut passed = true;
    let mut parts = Vec::new();
    for c in cells {
        let lam_theory = (2.0 * c.s + 2.0) / 3.4;
        let de = (c.error_fit.slope - err_theory).abs();
        let dl = (c.lambda_fit.slope - lam_theory).abs();
        passed &= de <= 0.05 && dl <= 0.05 && c.error_fit.points_used == 20;
        parts.push(format!(
            "s={}: err {:.4} (|d| {de:.4}), lambda {:.4} vs {lam_theory:.4} (|d| {dl:.4}), {} pts",
            c.s, c.error_fit.slope, c.lambda_fit.slope, c.error_fit.points_used
        ));
    }
    outcome(
        "1",
        "oracle rate, over-smoothing",
        passed,
        format!("target err {err_theory:.4}, tol 0.05; {}", parts.join("; ")),
    )
}

fn criterion_2() -> Outcome {
    let cells = oracle_cells(1.7, &[0.0]);
    let c = &cells[0];
    let de = (c.error_fit.slope - 4.0 / 3.0).abs();
    let dl = (c.lambda_fit.slope - 2.0 / 3.0).abs();
    outcome(
        "2",
        "oracle rate, under-smoothing",
        de <= 0.05 && dl <= 0.05 && c.error_fit.points_used == 20,
        format!(
            "err {:.4} vs 4/3 (|d| {de:.4}), lambda {:.4} vs 2/3 (|d| {dl:.4}), tol 0.05",
            c.error_fit.slope, c.lambda_fit.slope
        ),
    )
}

fn criterion_3(cells: &[OracleRateCell]) -> Outcome {
    let rates: Vec<f64> = cells.iter().map(|c| c.error_fit.slope).collect();
    let mut spread = 0.0f64;
    for a in &rates {
        for b in &rates {
            spread = spread.max((a - b).abs());
        }
    }
    outcome(
        "3",
        "over-smoothing rate flatness",
        spread <= 0.05,
        format!("error rates {rates:.4?}, max pairwise difference {spread:.4} (tol 0.05)"),
    )
}

fn criterion_4() -> Outcome {
    let spectrum = Spectrum::explicit(vec![1.0]).unwrap();
    let truth = TrueFunction::from_coefficients(vec![1.0], Vec::new(), 1.0).unwrap();
    let grid = LambdaGrid::new(1e-12, 1e2, 141).unwrap();
    let mut passed = true;
    let mut parts = Vec::new();
    for sigma in [1e-1, 1e-2, 1e-3] {
        let target = sigma * sigma;
        let sel = oracle_lambda(&spectrum, &truth, sigma, 0.0, &grid).unwrap();
        let rel = (sel.lambda_star.ln() - target.ln()).abs() / target.ln().abs();
        let residual = critical_point_residual(&spectrum, &truth, sigma, 0.0, target)
            .unwrap()
            .abs();
        passed &= rel <= 1e-3 && residual <= 1e-10;
        parts.push(format!(
            "sigma {sigma:e}: lambda* {:.6e} (rel log err {rel:.1e}), residual {residual:.1e}",
            sel.lambda_star
        ));
    }
    outcome("4", "single-mode closed form", passed, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let spectrum = exp_spectrum(50);
    let truth = truth(&spectrum, 1.2);
    let (s, sigma, lambda) = (1.0, 1e-2, 1e-4);
    let draws = 2000;
    let errors: Vec<f64> = (0..draws)
        .map(|i| {
            let noise = sample_noise(sigma, 50, derive_seed(5, &[label("acceptance-mc"), i as u64])).unwrap();
            realized_error(&spectrum, &truth, &noise, s, lambda).unwrap()
        })
        .collect();
    let n = draws as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let expected = expected_error(&spectrum, &truth, sigma, s, lambda).unwrap();
    let z = (mean - expected).abs() / se;

    // e(λ; s) against σ²A + λ²B summed term by term here
    let lams = spectrum.eigenvalues();
    let c = truth.coefficients();
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let l = 10f64.powf(-10.0 + 10.0 * unit(55, &[k, 0]));
        let s = 3.0 * unit(55, &[k, 1]);
        let mut a = 0.0;
        let mut b = 0.0;
        for (li, ci) in lams.iter().zip(c) {
            let d = li.powf(s + 1.0) + l;
            a += li.powf(2.0 * s + 1.0) / (d * d);
            b += ci * ci / (d * d);
        }
        let direct = sigma * sigma * a + l * l * b;
        let e = expected_error(&spectrum, &truth, sigma, s, l).unwrap();
        worst = worst.max((e - direct).abs() / direct);
    }
    outcome(
        "5",
        "expectation identity",
        z <= 3.0 && worst <= 1e-12,
        format!(
            "MC mean {mean:.6e} vs expected {expected:.6e}, {z:.2} standard errors (limit 3); \
             identity max relative deviation {worst:.1e} (tol 1e-12)"
        ),
    )
}

fn log_slope(lambdas: &[f64], values: impl Fn(f64) -> f64) -> f64 {
    let x: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = lambdas.iter().map(|l| values(*l).ln()).collect();
    slope(&x, &y)
}

fn criterion_6() -> Outcome {
    let spectrum = exp_spectrum(200);
    let lambdas = logspace(1e-10, 1e-6, 41);
    let beta = 1.0;

    let (s, r) = (1.0, 1.2);
    let over = truth(&spectrum, r);
    let a_slope = log_slope(&lambdas, |l| series_a(&spectrum, s, l).unwrap());
    let a_pred = -beta / (s + 1.0);
    let eta_b = 2.0 - (2.0 * r + 1.0 - beta) / (s + 1.0);
    let b_slope = log_slope(&lambdas, |l| series_b(&spectrum, &over, s, l).unwrap());

    let under = truth(&spectrum, 2.5);
    let b0_slope = log_slope(&lambdas, |l| series_b(&spectrum, &under, 0.0, l).unwrap());

    let da = (a_slope - a_pred).abs();
    let db = (b_slope + eta_b).abs();
    let d0 = b0_slope.abs();
    outcome(
        "6",
        "series asymptotics",
        da <= 0.02 && db <= 0.05 && d0 <= 0.05,
        format!(
            "A slope {a_slope:.4} vs {a_pred:.4} (|d| {da:.4}, tol 0.02); over-smoothing B slope {b_slope:.4} \
             vs {:.4} (|d| {db:.4}, tol 0.05); under-smoothing B slope {b0_slope:.4} vs 0 (tol 0.05)",
            -eta_b
        ),
    )
}

fn criterion_7() -> Outcome {
    let theta = 1.5;
    let spectrum = exp_spectrum(200);
    // k = 2, α = 3, β = 1, s = 1: γ = 3/2 and J = B(3/2, 1/2) λ^(−1/2) / 2 = π / (4 √λ)
    let ratios: Vec<f64> = logspace(1e-10, 1e-6, 41)
        .iter()
        .map(|l| series_a(&spectrum, 1.0, *l).unwrap() * theta / (PI / (4.0 * l.sqrt())))
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        "7",
        "Riemann-integral constant",
        lo >= 0.9 && hi <= 1.1,
        format!("F*theta/J in [{lo:.4}, {hi:.4}] over lambda in [1e-10, 1e-6] (band [0.9, 1.1])"),
    )
}

fn criterion_8() -> Outcome {
    let problem = build_problem(500, 1e-13).unwrap();
    let mut worst = 0.0f64;
    let mut worst_half = 0.0f64;
    for n in 1..=10 {
        let d = 4.0 - (n * n) as f64 * PI * PI;
        let quoted = 2.0 / (d * d);
        let num = problem.eigenvalues()[n - 1];
        worst = worst.max((num - quoted).abs() / quoted);
        worst_half = worst_half.max((num - quoted / 2.0).abs() / (quoted / 2.0));
    }
    let defect = problem.orthonormality_defect();
    outcome(
        "8",
        "Fredholm eigensystem",
        worst < 1e-3 && defect < 1e-8,
        format!(
            "max relative error vs 2(4 - n^2 pi^2)^-2 {worst:.3e} (tol 1e-3); orthonormality defect {defect:.1e} \
             (tol 1e-8); for reference, vs (4 - n^2 pi^2)^-2 {worst_half:.3e}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let sigmas = vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
    let report = finite_rank_bias_demo(&FiniteRankConfig {
        eigenvalues: vec![1.0],
        coefficients: vec![1.0],
        perturbation: vec![0.1],
        sigmas: sigmas.clone(),
        s: 1.0,
        lambda_grid: logspace(1e-12, 1e2, 281),
    })
    .unwrap();
    let l2: Vec<f64> = report.rows.iter().map(|r| r.l2_min_error).collect();
    let hs: Vec<f64> = report.rows.iter().map(|r| r.hs_error_at_sigma).collect();
    let l2_ok = l2.iter().all(|e| *e >= 0.2);
    let hs_ok = hs.iter().zip(&sigmas).all(|(e, s)| *e <= 2.0 * s * s);
    outcome(
        "9",
        "finite-rank bias",
        l2_ok && hs_ok,
        format!(
            "L2 minimal errors {l2:.4?} (need >= 0.2: {}); H^s errors at lambda=sigma [{}] (need <= 2 sigma^2: {})",
            if l2_ok { "yes" } else { "no" },
            hs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "),
            if hs_ok { "yes" } else { "no" }
        ),
    )
}

fn criterion_10() -> Vec<Outcome> {
    let cfg = PracticalConfig::default();
    let rows = run_practical_experiment(&cfg).unwrap();
    let count = cfg.sigmas.len();

    let mut bad = Vec::new();
    for gi in 0..count {
        let q = median_error_ratio(&rows, 1.0, gi, Method::LCurve, Method::Oracle);
        if !q.is_some_and(|q| q <= 10.0) {
            bad.push(format!("{:.2e} ({:.1})", cfg.sigmas[gi], q.unwrap_or(f64::NAN)));
        }
    }
    let a = outcome(
        "10a",
        "practical, s=1 median lcurve/oracle error ratio <= 10",
        bad.is_empty(),
        if bad.is_empty() {
            format!("holds at all {count} sigma values")
        } else {
            format!("fails at {} of {count} sigma values: {}", bad.len(), bad.join(", "))
        },
    );

    let s1 = lambda_spread(&rows, 1.0, count, Method::LCurve);
    let s2 = lambda_spread(&rows, 2.0, count, Method::LCurve);
    let b = outcome(
        "10b",
        "practical, lcurve lambda spread s=2 > s=1",
        matches!((s1, s2), (Some(a), Some(b)) if b > a),
        format!(
            "spread s=2 {:.3e}, s=1 {:.3e}",
            s2.unwrap_or(f64::NAN),
            s1.unwrap_or(f64::NAN)
        ),
    );

    let mut bad = Vec::new();
    for gi in 0..count {
        let l = median_lambda(&rows, 0.0, gi, Method::LCurve);
        let o = median_lambda(&rows, 0.0, gi, Method::Oracle);
        if !matches!((l, o), (Some(l), Some(o)) if l <= o) {
            bad.push(format!("{:.2e}", cfg.sigmas[gi]));
        }
    }
    let c = outcome(
        "10c",
        "practical, s=0 median lcurve lambda <= oracle lambda",
        bad.is_empty(),
        if bad.is_empty() {
            format!("holds at all {count} sigma values")
        } else {
            format!("fails at {}", bad.join(", "))
        },
    );
    vec![a, b, c]
}

fn csv_payloads(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "toml"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("points.csv");
    fs::write(&input, "sigma,value\n1e-3,2e-6\n1e-2,2e-4\n1e-1,2.1e-2\n1e0,1.9e0\n").unwrap();
    let input = input.to_string_lossy().into_owned();
    let subcommands: Vec<(&str, Vec<&str>)> = vec![
        (
            "spectrum",
            vec!["spectrum", "--perturbation", "0.9,1.1", "--null-components", "0.1"],
        ),
        (
            "oracle-rates",
            vec!["oracle-rates", "--perturbation", "0.9,1.1", "--r", "1.2", "--s", "1"],
        ),
        ("series-check", vec!["series-check"]),
        (
            "fredholm",
            vec![
                "fredholm",
                "--m",
                "80",
                "--replicates",
                "2",
                "--sigma-count",
                "5",
                "--selector-count",
                "60",
            ],
        ),
        ("finite-rank", vec!["finite-rank", "--K", "3"]),
        ("rate-fit", vec!["rate-fit", "--input", &input]),
    ];
    let out = tmp.path().to_string_lossy().into_owned();
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, args) in &subcommands {
        let run = |seed: &str, run_name: &str| {
            let mut argv = vec![
                "fsreg",
                "--output-dir",
                &out,
                "--master-seed",
                seed,
                "--run-name",
                run_name,
            ];
            argv.extend(args.iter().copied());
            let cli = fsreg_cli::cli::Cli::try_parse_from(argv).unwrap();
            fsreg_cli::run(cli).unwrap_or_else(|e| panic!("{name} failed: {e}"));
            csv_payloads(&tmp.path().join(name).join(run_name))
        };
        let first = run("42", "first");
        let second = run("42", "second");
        let same = !first.is_empty() && first == second;
        passed &= same;
        parts.push(format!(
            "{name}: {} files {}",
            first.len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    // the seed must reach the payload, or identical reruns prove nothing
    let mut argv = vec![
        "fsreg",
        "--output-dir",
        &out,
        "--master-seed",
        "43",
        "--run-name",
        "other",
    ];
    argv.extend(["spectrum", "--perturbation", "0.9,1.1", "--null-components", "0.1"]);
    fsreg_cli::run(fsreg_cli::cli::Cli::try_parse_from(argv).unwrap()).unwrap();
    let a = fs::read(tmp.path().join("spectrum/first/spectrum.csv")).unwrap();
    let b = fs::read(tmp.path().join("spectrum/other/spectrum.csv")).unwrap();
    let seed_matters = a != b;
    passed &= seed_matters;
    parts.push(format!(
        "another seed changes spectrum.csv: {}",
        if seed_matters { "yes" } else { "no" }
    ));
    outcome("11", "determinism", passed, parts.join("; "))
}

fn main() {
    let strict = std::env::var("FSREG_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let start = Instant::now();
    let over = oracle_cells(1.2, &[1.0, 2.0, 3.0]);
    let mut outcomes = vec![
        criterion_1(&over),
        criterion_2(),
        criterion_3(&over),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ];
    outcomes.extend(criterion_10());
    outcomes.push(criterion_11());

    println!();
    for o in &outcomes {
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {} ({}): {}", o.id, o.title, o.detail);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!(
        "acceptance: {} of {} criteria pass ({:.1} s){}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {}", failed.join(", "))
        }
    );
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
