//! Subcommand drivers.
//!
//! Each subcommand is split into `plan`, which checks every parameter against
//! the library preconditions and computes nothing expensive, and `execute`,
//! which runs the cells (in parallel on the current rayon pool) and returns
//! the tables and checks.

use std::path::PathBuf;

use rayon::prelude::*;

use fsreg::estimators::{finite_rank_bias_demo, FiniteRankConfig};
use fsreg::fredholm::{analytic_eigensystem, FREDHOLM_BETA};
use fsreg::math::logspace;
use fsreg::rates::{
    fit_rate, lambda_spread, median_error_ratio, median_lambda, oracle_spectrum, oracle_truth, oracle_truth_seed,
    practical_keys, practical_observation, practical_setup, run_oracle_rate_cell, run_practical_cell, selector_grid,
    Exclusion, NoiseScale, OracleRateConfig, PracticalConfig, PracticalRow,
};
use fsreg::selection::{gcv_lambda, lcurve_lambda_with, LambdaGrid, Method, SolutionNorm};
use fsreg::series::{dominating_terms, verify_dominating_order, Regime};
use fsreg::spectrum::{build_true_function, CoefficientLaw, DecayFamily, PerturbationBounds, Spectrum, TrueFunction};

use crate::config::{
    Family, FiniteRankSection, FredholmSection, MethodName, NoiseScaleName, NormName, OracleRatesSection,
    RateFitSection, Section, SeriesCheckSection, SpectrumSection,
};
use crate::error::{in_cell, invalid, usage, CliError};
use crate::output::{Cell, Check, Table};

const SPECTRUM: &str = "fsreg::spectrum";
const SELECTION: &str = "fsreg::selection";
const SERIES: &str = "fsreg::series";
const RATES: &str = "fsreg::rates";
const FREDHOLM: &str = "fsreg::fredholm";
const ESTIMATORS: &str = "fsreg::estimators";

/// Tables, checks and free-form notes produced by one run.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

/// A validated subcommand, ready to run.
#[derive(Debug)]
pub enum Plan {
    Spectrum(SpectrumPlan),
    OracleRates(OraclePlan),
    SeriesCheck(SeriesPlan),
    Fredholm(FredholmPlan),
    FiniteRank(FiniteRankConfig),
    RateFit(RateFitPlan),
}

pub fn plan(section: &Section, master_seed: u64) -> Result<Plan, CliError> {
    Ok(match section {
        Section::Spectrum(s) => Plan::Spectrum(plan_spectrum(s, master_seed)?),
        Section::OracleRates(s) => Plan::OracleRates(plan_oracle(s, master_seed)?),
        Section::SeriesCheck(s) => Plan::SeriesCheck(plan_series(s, master_seed)?),
        Section::Fredholm(s) => Plan::Fredholm(plan_fredholm(s, master_seed)?),
        Section::FiniteRank(s) => Plan::FiniteRank(plan_finite_rank(s)?),
        Section::RateFit(s) => Plan::RateFit(plan_rate_fit(s)?),
    })
}

pub fn execute(plan: Plan) -> Result<Report, CliError> {
    match plan {
        Plan::Spectrum(p) => run_spectrum(p),
        Plan::OracleRates(p) => run_oracle(p),
        Plan::SeriesCheck(p) => run_series(p),
        Plan::Fredholm(p) => run_fredholm(p),
        Plan::FiniteRank(p) => run_finite_rank(p),
        Plan::RateFit(p) => run_rate_fit(p),
    }
}

fn decay_family(family: Family, theta: f64) -> Result<DecayFamily, CliError> {
    let f = match family {
        Family::Exp => DecayFamily::Exponential { theta },
        Family::Poly => DecayFamily::Polynomial { theta },
    };
    f.validate().map_err(invalid(SPECTRUM))?;
    Ok(f)
}

fn band(b: [f64; 2]) -> Result<PerturbationBounds, CliError> {
    PerturbationBounds::new(b[0], b[1]).map_err(invalid(SPECTRUM))
}

fn log_grid(module: &'static str, what: &str, lo: f64, hi: f64, count: usize) -> Result<Vec<f64>, CliError> {
    if !(lo > 0.0 && lo.is_finite()) {
        return Err(usage(module, &format!("{what}_lo"), format!("must be > 0, got {lo}")));
    }
    if !(hi.is_finite() && lo < hi) {
        return Err(usage(
            module,
            &format!("{what}_hi"),
            format!("need lo < hi, got lo = {lo}, hi = {hi}"),
        ));
    }
    if count < 3 {
        return Err(usage(
            module,
            &format!("{what}_count"),
            format!("need at least 3 points, got {count}"),
        ));
    }
    Ok(logspace(lo, hi, count))
}

fn check_s(module: &'static str, s: f64) -> Result<(), CliError> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(usage(module, "s", format!("must be >= 0, got {s}")))
    }
}

fn check_tolerance(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage("fsreg-cli", field, format!("must be > 0, got {v}")))
    }
}

/// Config of the oracle experiment, which also fixes the seeds of the
/// spectrum and true function exported by `spectrum` and `series-check`.
fn parametric_config(
    family: Family,
    theta: f64,
    n: usize,
    perturbation: [f64; 2],
    coefficient_perturbation: [f64; 2],
    master_seed: u64,
) -> Result<OracleRateConfig, CliError> {
    Ok(OracleRateConfig {
        family: decay_family(family, theta)?,
        n,
        spectrum_bounds: band(perturbation)?,
        coefficient_bounds: band(coefficient_perturbation)?,
        seed: master_seed,
        ..OracleRateConfig::default()
    })
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
}

// ---- spectrum ----

#[derive(Debug)]
pub struct SpectrumPlan {
    spectrum: Spectrum,
    truth: TrueFunction,
}

fn plan_spectrum(s: &SpectrumSection, master_seed: u64) -> Result<SpectrumPlan, CliError> {
    let cfg = parametric_config(
        s.family,
        s.theta,
        s.n,
        s.perturbation,
        s.coefficient_perturbation,
        master_seed,
    )?;
    let spectrum = oracle_spectrum(&cfg).map_err(invalid(SPECTRUM))?;
    let truth = build_true_function(
        &spectrum,
        s.r,
        cfg.coefficient_bounds,
        oracle_truth_seed(&cfg, s.r),
        s.null_components.clone(),
        CoefficientLaw::Rademacher,
    )
    .map_err(invalid(SPECTRUM))?;
    Ok(SpectrumPlan { spectrum, truth })
}

fn spectrum_tables(spectrum: &Spectrum, truth: &TrueFunction) -> (Table, Table) {
    let mut modes = Table::new("spectrum.csv", &["i", "lambda_i", "p_inv_i", "c_i"]);
    for (i, ((l, p), c)) in spectrum
        .eigenvalues()
        .iter()
        .zip(spectrum.perturbations())
        .zip(truth.coefficients())
        .enumerate()
    {
        modes.push(vec![(i + 1).into(), (*l).into(), (*p).into(), (*c).into()]);
    }
    let mut null = Table::new("null_components.csv", &["j", "d_j"]);
    for (j, d) in truth.null_components().iter().enumerate() {
        null.push(vec![(j + 1).into(), (*d).into()]);
    }
    (modes, null)
}

fn run_spectrum(p: SpectrumPlan) -> Result<Report, CliError> {
    let (modes, null) = spectrum_tables(&p.spectrum, &p.truth);
    let beta = p.spectrum.beta().map(|b| b.value()).map_err(in_cell("spectrum"))?;
    Ok(Report {
        tables: vec![modes, null],
        checks: Vec::new(),
        notes: vec![format!(
            "beta = {beta:e}, smoothness r = {:e}, squared norm = {:e}",
            p.truth.smoothness(),
            p.truth.norm_sq()
        )],
    })
}

// ---- oracle-rates ----

#[derive(Debug)]
pub struct OraclePlan {
    cfg: OracleRateConfig,
    spectrum: Spectrum,
    truths: Vec<TrueFunction>,
    tolerance: f64,
}

fn plan_oracle(s: &OracleRatesSection, master_seed: u64) -> Result<OraclePlan, CliError> {
    let mut cfg = parametric_config(
        s.family,
        s.theta,
        s.n,
        s.perturbation,
        s.coefficient_perturbation,
        master_seed,
    )?;
    if s.r.is_empty() || s.s.is_empty() {
        return Err(usage(RATES, "r, s", "need at least one value of each"));
    }
    for &v in &s.s {
        check_s(RATES, v)?;
    }
    check_tolerance("tolerance", s.tolerance)?;
    cfg.r_values = s.r.clone();
    cfg.s_values = s.s.clone();
    cfg.sigmas = log_grid(RATES, "sigma", s.sigma_lo, s.sigma_hi, s.sigma_count)?;
    cfg.lambda_grid = LambdaGrid::new(s.lambda_lo, s.lambda_hi, s.lambda_count).map_err(invalid(SELECTION))?;
    let spectrum = oracle_spectrum(&cfg).map_err(invalid(SPECTRUM))?;
    let truths = cfg
        .r_values
        .iter()
        .map(|&r| oracle_truth(&cfg, &spectrum, r))
        .collect::<Result<Vec<_>, _>>()
        .map_err(invalid(SPECTRUM))?;
    Ok(OraclePlan {
        cfg,
        spectrum,
        truths,
        tolerance: s.tolerance,
    })
}

fn run_oracle(p: OraclePlan) -> Result<Report, CliError> {
    let jobs: Vec<(usize, f64)> = (0..p.truths.len())
        .flat_map(|ri| p.cfg.s_values.iter().map(move |&s| (ri, s)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(ri, s)| {
            run_oracle_rate_cell(&p.cfg, &p.spectrum, &p.truths[ri], s).map_err(in_cell(format!(
                "oracle-rates cell r = {}, s = {s}",
                p.cfg.r_values[ri]
            )))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rates = Table::new(
        "oracle_rates.csv",
        &[
            "r",
            "s",
            "lambda_rate_fit",
            "lambda_rate_theory",
            "err_rate_fit",
            "err_rate_theory",
            "r2",
            "n_points",
            "lambda_r2",
            "regime",
        ],
    );
    let mut points = Table::new("oracle_points.csv", &["r", "s", "sigma", "lambda", "error", "excluded"]);
    let mut report = Report::default();
    let tol = p.tolerance;
    for c in &cells {
        rates.push(vec![
            c.r.into(),
            c.s.into(),
            c.lambda_fit.slope.into(),
            c.theory.lambda_exponent.into(),
            c.error_fit.slope.into(),
            c.theory.error_exponent.into(),
            c.error_fit.r_squared.into(),
            c.error_fit.points_used.into(),
            c.lambda_fit.r_squared.into(),
            c.theory.regime.name().into(),
        ]);
        for (i, sigma) in c.sigmas.iter().enumerate() {
            let excluded = c.error_fit.excluded.iter().any(|e| e.index == i);
            points.push(vec![
                c.r.into(),
                c.s.into(),
                (*sigma).into(),
                c.lambdas[i].into(),
                c.errors[i].into(),
                excluded.into(),
            ]);
        }
        let (Some(lt), Some(et)) = (c.theory.lambda_exponent, c.theory.error_exponent) else {
            report.notes.push(format!(
                "r = {}, s = {}: within the threshold guard band, rates not compared",
                c.r, c.s
            ));
            continue;
        };
        let ld = (c.lambda_fit.slope - lt).abs();
        report.checks.push(Check::new(
            format!("oracle lambda rate r={} s={}", c.r, c.s),
            ld <= tol,
            format!(
                "fitted {:.4} vs predicted {lt:.4}, |diff| {ld:.4} (tol {tol})",
                c.lambda_fit.slope
            ),
        ));
        let ed = (c.error_fit.slope - et).abs();
        report.checks.push(Check::new(
            format!("oracle error rate r={} s={}", c.r, c.s),
            ed <= tol,
            format!(
                "fitted {:.4} vs predicted {et:.4}, |diff| {ed:.4} (tol {tol})",
                c.error_fit.slope
            ),
        ));
    }
    for &r in &p.cfg.r_values {
        let over: Vec<f64> = cells
            .iter()
            .filter(|c| c.r == r && c.theory.regime == Regime::OverSmoothing)
            .map(|c| c.error_fit.slope)
            .collect();
        if over.len() < 2 {
            continue;
        }
        let spread =
            over.iter().copied().fold(f64::NEG_INFINITY, f64::max) - over.iter().copied().fold(f64::INFINITY, f64::min);
        report.checks.push(Check::new(
            format!("over-smoothing error rate flatness r={r}"),
            spread <= tol,
            format!(
                "max pairwise difference {spread:.4} over {} cells (tol {tol})",
                over.len()
            ),
        ));
    }
    report.tables = vec![rates, points];
    Ok(report)
}

// ---- series-check ----

#[derive(Debug)]
pub struct SeriesPlan {
    spectrum: Spectrum,
    truth: TrueFunction,
    s: f64,
    lambdas: Vec<f64>,
    tol_a: f64,
    tol_b: f64,
    constant_band: [f64; 2],
}

fn plan_series(s: &SeriesCheckSection, master_seed: u64) -> Result<SeriesPlan, CliError> {
    let cfg = parametric_config(
        s.family,
        s.theta,
        s.n,
        s.perturbation,
        s.coefficient_perturbation,
        master_seed,
    )?;
    check_s(SERIES, s.s)?;
    check_tolerance("slope_tolerance_a", s.slope_tolerance_a)?;
    check_tolerance("slope_tolerance_b", s.slope_tolerance_b)?;
    if s.constant_band.iter().any(|v| !v.is_finite()) || s.constant_band[0] >= s.constant_band[1] {
        return Err(usage("fsreg-cli", "constant_band", "need lo < hi"));
    }
    let lambdas = log_grid(SERIES, "lambda", s.lambda_lo, s.lambda_hi, s.lambda_count)?;
    if s.lambda_hi >= 1.0 {
        return Err(usage(
            SERIES,
            "lambda_hi",
            format!("the series expansions need λ < 1, got {}", s.lambda_hi),
        ));
    }
    let spectrum = oracle_spectrum(&cfg).map_err(invalid(SPECTRUM))?;
    let truth = oracle_truth(&cfg, &spectrum, s.r).map_err(invalid(SPECTRUM))?;
    Ok(SeriesPlan {
        spectrum,
        truth,
        s: s.s,
        lambdas,
        tol_a: s.slope_tolerance_a,
        tol_b: s.slope_tolerance_b,
        constant_band: s.constant_band,
    })
}

fn run_series(p: SeriesPlan) -> Result<Report, CliError> {
    let rows = p
        .lambdas
        .par_iter()
        .map(|&l| dominating_terms(&p.spectrum, &p.truth, p.s, l).map_err(in_cell(format!("series-check λ = {l:e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(
        "series.csv",
        &["lambda", "A", "Aprime", "B", "B1", "pred_A", "pred_B", "branch"],
    );
    for d in &rows {
        table.push(vec![
            d.lambda.into(),
            d.a.direct_sum.into(),
            d.a_prime().into(),
            d.b.direct_sum.into(),
            d.b1.direct_sum.into(),
            d.a.asymptotic.into(),
            d.b.asymptotic.into(),
            d.b.branch.map_or(Cell::Empty, |b| b.name().into()),
        ]);
    }

    let mut report = Report::default();
    let mut slopes = Table::new("slopes.csv", &["series", "fitted", "predicted", "r2"]);
    match verify_dominating_order(&p.spectrum, &p.truth, p.s, &p.lambdas) {
        Ok(order) => {
            for c in &order.checks {
                let predicted = if c.predicted.is_finite() {
                    Cell::Num(c.predicted)
                } else {
                    Cell::Empty
                };
                slopes.push(vec![c.series.into(), c.fitted.into(), predicted, c.r_squared.into()]);
            }
            for (name, tol) in [("A", p.tol_a), ("B", p.tol_b)] {
                if let Some(c) = order.check(name) {
                    report.checks.push(Check::new(
                        format!("{name} log-log slope ({})", order.regime.name()),
                        c.deviation() <= tol,
                        format!(
                            "fitted {:.4} vs predicted {:.4}, |diff| {:.4} (tol {tol})",
                            c.fitted,
                            c.predicted,
                            c.deviation()
                        ),
                    ));
                }
            }
            report.notes.push(format!(
                "regime {}, eta_A = {:e}, eta_B = {:e}, truncation sensitivity {:e}",
                order.regime.name(),
                order.eta_a,
                order.eta_b,
                order.truncation_sensitivity
            ));
        }
        Err(e @ fsreg::Error::ThresholdRegime { .. }) => {
            report.notes.push(format!("slopes not compared: {e}"));
        }
        Err(e) => return Err(in_cell("series-check slope fit")(e)),
    }

    let ratios: Option<Vec<f64>> = rows
        .iter()
        .map(|d| d.a.asymptotic.map(|j| d.a.direct_sum / j))
        .collect();
    match (rows.iter().all(|d| d.unperturbed), ratios) {
        (true, Some(ratios)) if !ratios.is_empty() => {
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let [blo, bhi] = p.constant_band;
            report.checks.push(Check::new(
                "A leading constant",
                lo >= blo && hi <= bhi,
                format!("direct sum / (J/theta) in [{lo:.4}, {hi:.4}] (band [{blo}, {bhi}])"),
            ));
        }
        _ => report
            .notes
            .push("leading constant not compared: it is exact only for unperturbed spectra and coefficients".into()),
    }
    report.tables = vec![table, slopes];
    Ok(report)
}

// ---- fredholm ----

#[derive(Debug)]
pub struct FredholmPlan {
    cfg: PracticalConfig,
    eigen_check_count: usize,
    eigen_tolerance: f64,
    orthonormality_tolerance: f64,
    ratio_limit: f64,
    trace_replicate: usize,
    export_eigenvectors: bool,
}

fn method(m: MethodName) -> Method {
    match m {
        MethodName::Oracle => Method::Oracle,
        MethodName::Lcurve => Method::LCurve,
        MethodName::Gcv => Method::Gcv,
    }
}

fn plan_fredholm(s: &FredholmSection, master_seed: u64) -> Result<FredholmPlan, CliError> {
    if s.m < 2 {
        return Err(usage(
            FREDHOLM,
            "m",
            format!("need at least 2 mesh points, got {}", s.m),
        ));
    }
    if !(s.tau >= 0.0 && s.tau < 1.0) {
        return Err(usage(
            FREDHOLM,
            "tau",
            format!("relative rank threshold must lie in [0, 1), got {}", s.tau),
        ));
    }
    let floor = (FREDHOLM_BETA - 1.0) / 2.0;
    if !(s.r > floor && s.r.is_finite()) {
        return Err(usage(
            SPECTRUM,
            "r",
            format!("smoothness must satisfy r > (beta - 1)/2 = {floor}, got {}", s.r),
        ));
    }
    if s.s.is_empty() {
        return Err(usage(RATES, "s", "need at least one value"));
    }
    for &v in &s.s {
        check_s(RATES, v)?;
    }
    if s.methods.is_empty() {
        return Err(usage(SELECTION, "methods", "need at least one method"));
    }
    let mut methods: Vec<Method> = s.methods.iter().map(|m| method(*m)).collect();
    methods.dedup();
    if s.replicates == 0 {
        return Err(usage(RATES, "replicates", "need at least one replicate"));
    }
    if s.trace_replicate >= s.replicates {
        return Err(usage(
            "fsreg-cli",
            "trace_replicate",
            format!("must be below replicates = {}", s.replicates),
        ));
    }
    if s.selector_count < 3 {
        return Err(usage(SELECTION, "selector_count", "need at least 3 points"));
    }
    let [lo, hi] = s.coefficient_band;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(usage(
            SPECTRUM,
            "coefficient_band",
            format!("need 0 < lo <= hi, got [{lo}, {hi}]"),
        ));
    }
    check_tolerance("eigen_tolerance", s.eigen_tolerance)?;
    check_tolerance("orthonormality_tolerance", s.orthonormality_tolerance)?;
    check_tolerance("ratio_limit", s.ratio_limit)?;
    let cfg = PracticalConfig {
        m: s.m,
        rank_threshold: s.tau,
        r: s.r,
        s_values: s.s.clone(),
        sigmas: log_grid(RATES, "sigma", s.sigma_lo, s.sigma_hi, s.sigma_count)?,
        methods,
        replicates: s.replicates,
        noise_scale: match s.noise_scale {
            NoiseScaleName::White => NoiseScale::WhiteNoise,
            NoiseScaleName::PerMeshPoint => NoiseScale::PerMeshPoint,
        },
        coefficient_band: (lo, hi),
        oracle_grid: LambdaGrid::new(s.lambda_lo, s.lambda_hi, s.lambda_count).map_err(invalid(SELECTION))?,
        selector_grid_count: s.selector_count,
        solution_norm: match s.solution_norm {
            NormName::Penalty => SolutionNorm::Penalty,
            NormName::L2 => SolutionNorm::L2,
        },
        seed: master_seed,
    };
    Ok(FredholmPlan {
        cfg,
        eigen_check_count: s.eigen_check_count,
        eigen_tolerance: s.eigen_tolerance,
        orthonormality_tolerance: s.orthonormality_tolerance,
        ratio_limit: s.ratio_limit,
        trace_replicate: s.trace_replicate,
        export_eigenvectors: s.export_eigenvectors,
    })
}

fn run_fredholm(p: FredholmPlan) -> Result<Report, CliError> {
    let cfg = &p.cfg;
    let setup = practical_setup(cfg).map_err(in_cell("fredholm setup"))?;
    let problem = &setup.problem;
    let mut report = Report::default();

    // eigensystem
    let analytic = analytic_eigensystem(problem.rank()).map_err(in_cell("fredholm eigensystem"))?;
    let shown = p.eigen_check_count.min(problem.rank());
    let mut eigen = Table::new(
        "eigen.csv",
        &[
            "n",
            "numerical",
            "quoted",
            "operator",
            "rel_err_quoted",
            "rel_err_operator",
        ],
    );
    let (mut worst_quoted, mut worst_operator) = (0.0f64, 0.0f64);
    for n in 1..=shown {
        let num = problem.eigenvalues()[n - 1];
        let quoted = analytic.eigenvalue(n);
        let operator = analytic.operator_eigenvalue(n);
        let eq = (num - quoted).abs() / quoted;
        let eo = (num - operator).abs() / operator;
        worst_quoted = worst_quoted.max(eq);
        worst_operator = worst_operator.max(eo);
        eigen.push(vec![
            n.into(),
            num.into(),
            quoted.into(),
            operator.into(),
            eq.into(),
            eo.into(),
        ]);
    }
    if shown > 0 {
        report.checks.push(Check::new(
            format!("first {shown} eigenvalues vs 2(4 - n^2 pi^2)^-2"),
            worst_quoted < p.eigen_tolerance,
            format!("max relative error {worst_quoted:.3e} (tol {:e})", p.eigen_tolerance),
        ));
        report.notes.push(format!(
            "max relative error of the first {shown} eigenvalues vs (4 - n^2 pi^2)^-2: {worst_operator:.3e}"
        ));
    }
    let defect = problem.orthonormality_defect();
    report.checks.push(Check::new(
        "eigenvector orthonormality",
        defect < p.orthonormality_tolerance,
        format!("defect {defect:.3e} (tol {:e})", p.orthonormality_tolerance),
    ));
    report.notes.push(format!(
        "rank {} of {} (relative threshold {:e}), kernel asymmetry {:.3e}",
        problem.rank(),
        problem.mesh().len(),
        problem.rank_threshold(),
        problem.max_asymmetry()
    ));
    let (modes, _) = spectrum_tables(&setup.spectrum, &setup.truth);
    let mut tables = vec![eigen, modes];
    if p.export_eigenvectors {
        let mut vectors = Table::new("eigenvectors.csv", &["i", "x", "value"]);
        for i in 0..problem.rank() {
            for (x, v) in problem.mesh().points().iter().zip(problem.eigenfunction(i)) {
                vectors.push(vec![(i + 1).into(), (*x).into(), (*v).into()]);
            }
        }
        tables.push(vectors);
    }

    // practical experiment
    let keys = practical_keys(cfg);
    let rows: Vec<PracticalRow> = keys
        .par_iter()
        .map(|&key| {
            run_practical_cell(cfg, &setup, key).map_err(in_cell(format!(
                "fredholm cell s = {}, sigma = {:e}, replicate {}",
                cfg.s_values[key.s_index], cfg.sigmas[key.sigma_index], key.replicate
            )))
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut practical = Table::new(
        "practical.csv",
        &["s", "sigma", "method", "replicate", "lambda", "error", "at_boundary"],
    );
    let mut failures = Table::new("failures.csv", &["s", "sigma", "method", "replicate", "reason"]);
    for r in &rows {
        match &r.failure {
            None => practical.push(vec![
                r.s.into(),
                r.sigma.into(),
                r.method.name().into(),
                r.replicate.into(),
                r.lambda.into(),
                r.error.into(),
                r.at_boundary.into(),
            ]),
            Some(reason) => failures.push(vec![
                r.s.into(),
                r.sigma.into(),
                r.method.name().into(),
                r.replicate.into(),
                reason.clone().into(),
            ]),
        }
    }
    if !failures.rows.is_empty() {
        report
            .notes
            .push(format!("{} selector failures, see failures.csv", failures.rows.len()));
    }
    tables.push(practical);
    tables.push(failures);
    tables.push(selection_traces(cfg, &setup, p.trace_replicate)?);
    report.checks.extend(practical_checks(cfg, &rows, p.ratio_limit));
    report.tables = tables;
    Ok(report)
}

/// Criterion, residual and solution norm along the selector grid for one replicate.
fn selection_traces(
    cfg: &PracticalConfig,
    setup: &fsreg::rates::PracticalSetup,
    replicate: usize,
) -> Result<Table, CliError> {
    let data_driven: Vec<Method> = cfg.methods.iter().copied().filter(|m| *m != Method::Oracle).collect();
    let cells: Vec<(usize, usize)> = (0..cfg.s_values.len())
        .flat_map(|si| (0..cfg.sigmas.len()).map(move |gi| (si, gi)))
        .collect();
    let blocks = cells
        .par_iter()
        .map(|&(si, gi)| -> Result<Vec<Vec<Cell>>, CliError> {
            let s = cfg.s_values[si];
            let sigma = cfg.sigmas[gi];
            let context = format!("fredholm trace s = {s}, sigma = {sigma:e}");
            let (_, obs) = practical_observation(cfg, setup, gi, replicate).map_err(in_cell(context.clone()))?;
            let grid = selector_grid(&setup.spectrum, s, cfg.selector_grid_count).map_err(in_cell(context))?;
            let mut out = Vec::new();
            for &m in &data_driven {
                let result = match m {
                    Method::LCurve => lcurve_lambda_with(&setup.spectrum, &obs, s, &grid, cfg.solution_norm),
                    _ => gcv_lambda(&setup.spectrum, &obs, s, &grid),
                };
                // failures are already listed in failures.csv
                let Ok(sel) = result else { continue };
                for (i, l) in sel.grid.iter().enumerate() {
                    let c = sel.criterion_values[i];
                    out.push(vec![
                        s.into(),
                        sigma.into(),
                        m.name().into(),
                        (*l).into(),
                        if c.is_finite() { Cell::Num(c) } else { Cell::Empty },
                        sel.residual_norms[i].into(),
                        sel.solution_norms[i].into(),
                    ]);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(
        "traces.csv",
        &[
            "s",
            "sigma",
            "method",
            "lambda",
            "criterion",
            "residual",
            "solution_norm",
        ],
    );
    for row in blocks.into_iter().flatten() {
        table.push(row);
    }
    Ok(table)
}

fn practical_checks(cfg: &PracticalConfig, rows: &[PracticalRow], ratio_limit: f64) -> Vec<Check> {
    let mut checks = Vec::new();
    let has = |m: Method| cfg.methods.contains(&m);
    let has_s = |s: f64| cfg.s_values.contains(&s);
    if !(has(Method::Oracle) && has(Method::LCurve)) {
        return checks;
    }
    let count = cfg.sigmas.len();
    if has_s(1.0) {
        let mut bad = Vec::new();
        let mut worst = 0.0f64;
        for gi in 0..count {
            match median_error_ratio(rows, 1.0, gi, Method::LCurve, Method::Oracle) {
                Some(q) if q <= ratio_limit => worst = worst.max(q),
                Some(q) => {
                    worst = worst.max(q);
                    bad.push(format!("{:.3e} ({q:.3})", cfg.sigmas[gi]));
                }
                None => bad.push(format!("{:.3e} (undefined)", cfg.sigmas[gi])),
            }
        }
        let detail = if bad.is_empty() {
            format!("largest median ratio {worst:.3} over {count} sigma values")
        } else {
            format!(
                "{} of {count} sigma values exceed the limit: {}",
                bad.len(),
                bad.join(", ")
            )
        };
        checks.push(Check::new(
            format!("s=1 median lcurve/oracle error ratio <= {ratio_limit}"),
            bad.is_empty(),
            detail,
        ));
    }
    if has_s(1.0) && has_s(2.0) {
        let s1 = lambda_spread(rows, 1.0, count, Method::LCurve);
        let s2 = lambda_spread(rows, 2.0, count, Method::LCurve);
        let (passed, detail) = match (s1, s2) {
            (Some(a), Some(b)) => (b > a, format!("spread s=2 {b:.3e} vs s=1 {a:.3e}")),
            _ => (false, "spread undefined".to_string()),
        };
        checks.push(Check::new("lcurve lambda spread s=2 exceeds s=1", passed, detail));
    }
    if has_s(0.0) {
        let mut bad = Vec::new();
        for gi in 0..count {
            let l = median_lambda(rows, 0.0, gi, Method::LCurve);
            let o = median_lambda(rows, 0.0, gi, Method::Oracle);
            match (l, o) {
                (Some(l), Some(o)) if l <= o => {}
                (Some(l), Some(o)) => bad.push(format!("{:.3e} ({l:.3e} > {o:.3e})", cfg.sigmas[gi])),
                _ => bad.push(format!("{:.3e} (undefined)", cfg.sigmas[gi])),
            }
        }
        let detail = if bad.is_empty() {
            format!("holds at all {count} sigma values")
        } else {
            format!("violated at {}", bad.join(", "))
        };
        checks.push(Check::new(
            "s=0 median lcurve lambda <= oracle lambda",
            bad.is_empty(),
            detail,
        ));
    }
    checks
}

// ---- finite-rank ----

fn plan_finite_rank(s: &FiniteRankSection) -> Result<FiniteRankConfig, CliError> {
    if s.k == 0 {
        return Err(usage(ESTIMATORS, "K", "need at least one positive eigenvalue"));
    }
    let eigenvalues = if s.eigenvalues.is_empty() {
        (1..=s.k).map(|i| 1.0 / i as f64).collect()
    } else if s.eigenvalues.len() == s.k {
        s.eigenvalues.clone()
    } else {
        return Err(usage(
            ESTIMATORS,
            "eigenvalues",
            format!("expected K = {} values, got {}", s.k, s.eigenvalues.len()),
        ));
    };
    if !(s.truth_norm >= 0.0 && s.truth_norm.is_finite()) {
        return Err(usage(
            ESTIMATORS,
            "truth_norm",
            format!("must be >= 0, got {}", s.truth_norm),
        ));
    }
    if !(s.eps_norm >= 0.0 && s.eps_norm.is_finite()) {
        return Err(usage(
            ESTIMATORS,
            "eps_norm",
            format!("must be >= 0, got {}", s.eps_norm),
        ));
    }
    check_s(ESTIMATORS, s.s)?;
    if s.sigmas.is_empty() || s.sigmas.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(usage(ESTIMATORS, "sigmas", "need finite sigma values >= 0"));
    }
    Spectrum::explicit(eigenvalues.clone()).map_err(invalid(SPECTRUM))?;
    let c = s.truth_norm / (s.k as f64).sqrt();
    Ok(FiniteRankConfig {
        eigenvalues,
        coefficients: vec![c; s.k],
        perturbation: vec![s.eps_norm],
        sigmas: s.sigmas.clone(),
        s: s.s,
        lambda_grid: log_grid(ESTIMATORS, "lambda", s.lambda_lo, s.lambda_hi, s.lambda_count)?,
    })
}

fn run_finite_rank(cfg: FiniteRankConfig) -> Result<Report, CliError> {
    let rep = finite_rank_bias_demo(&cfg).map_err(in_cell("finite-rank"))?;
    let mut table = Table::new(
        "finite_rank.csv",
        &[
            "sigma",
            "l2_min_error",
            "l2_argmin",
            "l2_stated_bound",
            "l2_floor",
            "hs_min_error",
            "hs_argmin",
            "hs_error_at_sigma",
            "hs_upper_bound",
        ],
    );
    for r in &rep.rows {
        table.push(vec![
            r.sigma.into(),
            r.l2_min_error.into(),
            r.l2_argmin.into(),
            r.l2_stated_bound.into(),
            r.l2_floor.into(),
            r.hs_min_error.into(),
            r.hs_argmin.into(),
            r.hs_error_at_sigma.into(),
            r.hs_upper_bound.into(),
        ]);
    }
    let list =
        |pick: fn(&fsreg::estimators::FiniteRankRow) -> f64| fmt_list(&rep.rows.iter().map(pick).collect::<Vec<_>>());
    let stated = rep.rows.first().map_or(0.0, |r| r.l2_stated_bound);
    let floor = rep.rows.first().map_or(0.0, |r| r.l2_floor);
    let checks = vec![
        Check::new(
            "L2 minimal error >= 2 sqrt(K) |phi*| |phi_eps| / lambda_K",
            rep.rows.iter().all(|r| r.l2_stated_bound_holds()),
            format!("bound {stated:.4e}, minimal errors {}", list(|r| r.l2_min_error)),
        ),
        Check::new(
            "L2 minimal error >= sigma-independent floor",
            rep.rows.iter().all(|r| r.l2_floor_holds()),
            format!("floor {floor:.4e}, minimal errors {}", list(|r| r.l2_min_error)),
        ),
        Check::new(
            format!("H^s error at lambda=sigma <= bound (s={})", cfg.s),
            rep.rows.iter().all(|r| r.hs_bound_holds()),
            format!(
                "errors {}, bounds {}",
                list(|r| r.hs_error_at_sigma),
                list(|r| r.hs_upper_bound)
            ),
        ),
    ];
    Ok(Report {
        tables: vec![table],
        checks,
        notes: vec![format!(
            "K = {}, |phi*| = {:e}, |phi_eps| = {:e}",
            rep.k, rep.truth_norm, rep.perturbation_norm
        )],
    })
}

// ---- rate-fit ----

#[derive(Debug)]
pub struct RateFitPlan {
    input: PathBuf,
    sigmas: Vec<f64>,
    values: Vec<f64>,
    exclude: Vec<usize>,
    expected: Option<(f64, f64)>,
}

fn plan_rate_fit(s: &RateFitSection) -> Result<RateFitPlan, CliError> {
    let input = s
        .input
        .clone()
        .ok_or_else(|| usage(RATES, "input", "a CSV file with columns sigma,value is required"))?;
    let mut reader =
        csv::Reader::from_path(&input).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", input.display())))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Usage(format!("{}: missing column `{name}`", input.display())))
    };
    let (si, vi) = (col("sigma")?, col("value")?);
    let mut sigmas = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Usage(format!("{}: {e}", input.display())))?;
        let parse = |i: usize, name: &str| -> Result<f64, CliError> {
            record
                .get(i)
                .and_then(|t| t.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Usage(format!("{}: row {row}: bad `{name}` value", input.display())))
        };
        sigmas.push(parse(si, "sigma")?);
        values.push(parse(vi, "value")?);
    }
    if let Some(i) = s.exclude.iter().find(|i| **i >= sigmas.len()) {
        return Err(usage(
            RATES,
            "exclude",
            format!("row {i} is out of range ({} rows)", sigmas.len()),
        ));
    }
    let expected = match s.expected_slope {
        Some(slope) => {
            let tol = s.tolerance.unwrap_or(0.05);
            check_tolerance("tolerance", tol)?;
            Some((slope, tol))
        }
        None => None,
    };
    Ok(RateFitPlan {
        input,
        sigmas,
        values,
        exclude: s.exclude.clone(),
        expected,
    })
}

fn run_rate_fit(p: RateFitPlan) -> Result<Report, CliError> {
    let exclusions: Vec<Exclusion> = p
        .exclude
        .iter()
        .map(|&index| Exclusion {
            index,
            reason: "excluded by request".into(),
        })
        .collect();
    let fit =
        fit_rate(&p.sigmas, &p.values, &exclusions).map_err(in_cell(format!("rate-fit {}", p.input.display())))?;
    let mut table = Table::new("rate_fit.csv", &["slope", "intercept", "r2", "points_used", "excluded"]);
    table.push(vec![
        fit.slope.into(),
        fit.intercept.into(),
        fit.r_squared.into(),
        fit.points_used.into(),
        fit.excluded.len().into(),
    ]);
    let checks = p
        .expected
        .map(|(slope, tol)| {
            let d = (fit.slope - slope).abs();
            vec![Check::new(
                "fitted slope",
                d <= tol,
                format!(
                    "fitted {:.4} vs expected {slope:.4}, |diff| {d:.4} (tol {tol})",
                    fit.slope
                ),
            )]
        })
        .unwrap_or_default();
    Ok(Report {
        tables: vec![table],
        checks,
        notes: Vec::new(),
    })
}
