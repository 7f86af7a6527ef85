//! Convergence-rate experiments in the small-noise limit: oracle rates on
//! synthetic spectra and the practical comparison of selectors on the
//! Fredholm problem.
//!
//! Every experiment is split into independent cells that the caller may run
//! in any order or in parallel; results depend only on the cell key.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::estimators::{expected_error, realized_error, sample_noise, NoiseDraw};
use crate::estimators::{observe, ObservationCoefficients};
use crate::fredholm::{build_problem, FredholmProblem, DEFAULT_RANK_THRESHOLD};
use crate::math::{logspace, median, ols};
use crate::rng::{derive_seed, label};
use crate::selection::{
    gcv_lambda, lcurve_lambda_with, oracle_lambda, oracle_lambda_realized, LambdaGrid, Method, SolutionNorm,
};
use crate::series::{classify_regime, Regime};
use crate::spectrum::{
    build_spectrum, build_true_function, CoefficientLaw, DecayFamily, PerturbationBounds, Spectrum, TrueFunction,
};

/// Rates predicted by the small-noise theory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalRates {
    pub regime: Regime,
    /// Exponent of σ in `λ* ≃ σ^e`; `None` at the threshold.
    pub lambda_exponent: Option<f64>,
    /// Exponent of σ in `e(λ*; s) ≃ σ^e`; `None` at the threshold.
    pub error_exponent: Option<f64>,
}

pub fn theoretical_rates(s: f64, r: f64, beta: f64) -> Result<TheoreticalRates> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid("s", alloc::format!("must be >= 0, got {s}")));
    }
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(invalid("beta", alloc::format!("must be >= 1, got {beta}")));
    }
    if !(r > 0.5 * (beta - 1.0) && r.is_finite()) {
        return Err(invalid(
            "r",
            alloc::format!("must exceed (beta - 1)/2 = {}, got {r}", 0.5 * (beta - 1.0)),
        ));
    }
    let regime = classify_regime(s, r, beta);
    let (lambda_exponent, error_exponent) = match regime {
        Regime::OverSmoothing => (
            Some((2.0 * s + 2.0) / (2.0 * r + 1.0)),
            Some(2.0 - 2.0 * beta / (2.0 * r + 1.0)),
        ),
        Regime::UnderSmoothing => (
            Some((2.0 * s + 2.0) / (2.0 * s + 2.0 + beta)),
            Some(2.0 - 2.0 * beta / (2.0 * s + 2.0 + beta)),
        ),
        Regime::Threshold => (None, None),
    };
    Ok(TheoreticalRates {
        regime,
        lambda_exponent,
        error_exponent,
    })
}

/// A σ point left out of a rate fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub excluded: Vec<Exclusion>,
}

/// Least-squares slope of `ln value` against `ln σ`, skipping the excluded points.
pub fn fit_rate(sigmas: &[f64], values: &[f64], exclusions: &[Exclusion]) -> Result<RateFit> {
    check_len("rate values", sigmas.len(), values.len())?;
    let mut x = Vec::with_capacity(sigmas.len());
    let mut y = Vec::with_capacity(sigmas.len());
    for (i, (s, v)) in sigmas.iter().zip(values).enumerate() {
        if exclusions.iter().any(|e| e.index == i) {
            continue;
        }
        if !(*s > 0.0) {
            return Err(Error::NonPositive { index: i, value: *s });
        }
        if !(*v > 0.0) {
            return Err(Error::NonPositive { index: i, value: *v });
        }
        x.push(libm::log(*s));
        y.push(libm::log(*v));
    }
    if x.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            have: x.len(),
        });
    }
    let fit = ols(&x, &y)?;
    if !fit.slope.is_finite() {
        return Err(invalid("values", "fitted slope is not finite"));
    }
    let mut excluded = exclusions.to_vec();
    excluded.sort_by_key(|e| e.index);
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        points_used: x.len(),
        excluded,
    })
}

/// Log-uniform σ grid with `per_decade` points per decade, endpoints included.
pub fn sigma_grid(lo: f64, hi: f64, per_decade: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(invalid(
            "sigma_range",
            alloc::format!("need 0 < lo < hi, got [{lo}, {hi}]"),
        ));
    }
    if !(per_decade > 0.0) {
        return Err(invalid("sigma_per_decade", "must be positive"));
    }
    let decades = libm::log10(hi / lo);
    let count = libm::round(decades * per_decade) as usize + 1;
    Ok(logspace(lo, hi, count.max(3)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRateConfig {
    pub family: DecayFamily,
    pub n: usize,
    pub spectrum_bounds: PerturbationBounds,
    pub coefficient_bounds: PerturbationBounds,
    pub r_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub lambda_grid: LambdaGrid,
    pub seed: u64,
}

impl Default for OracleRateConfig {
    fn default() -> Self {
        OracleRateConfig {
            family: DecayFamily::Exponential { theta: 1.5 },
            n: 200,
            spectrum_bounds: PerturbationBounds::UNIT,
            coefficient_bounds: PerturbationBounds::UNIT,
            r_values: alloc::vec![0.7, 1.2, 1.7],
            s_values: (0..=12).map(|k| 0.25 * k as f64).collect(),
            sigmas: sigma_grid(1e-7, 1e-1, 15.0).unwrap_or_default(),
            lambda_grid: LambdaGrid::new(1e-25, 1e2, 271).expect("static grid"),
            seed: 0,
        }
    }
}

/// One `(r, s)` cell of the oracle experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRateCell {
    pub r: f64,
    pub s: f64,
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub errors: Vec<f64>,
    pub theory: TheoreticalRates,
    pub lambda_fit: RateFit,
    pub error_fit: RateFit,
}

impl OracleRateCell {
    /// Whether the fitted rates are compared with theory (false near the threshold).
    pub fn comparable(&self) -> bool {
        self.theory.regime != Regime::Threshold
    }
}

/// Spectrum shared by every cell of an oracle experiment.
pub fn oracle_spectrum(cfg: &OracleRateConfig) -> Result<Spectrum> {
    build_spectrum(
        cfg.family,
        cfg.n,
        cfg.spectrum_bounds,
        derive_seed(cfg.seed, &[label("oracle-spectrum")]),
    )
}

/// Seed of the true function of smoothness `r` in an oracle experiment.
pub fn oracle_truth_seed(cfg: &OracleRateConfig, r: f64) -> u64 {
    derive_seed(cfg.seed, &[label("oracle-truth"), r.to_bits()])
}

/// True function of smoothness `r` for an oracle experiment.
pub fn oracle_truth(cfg: &OracleRateConfig, spectrum: &Spectrum, r: f64) -> Result<TrueFunction> {
    build_true_function(
        spectrum,
        r,
        cfg.coefficient_bounds,
        oracle_truth_seed(cfg, r),
        Vec::new(),
        CoefficientLaw::Rademacher,
    )
}

/// Oracle λ* and `e(λ*; s)` over the σ grid, with fitted and predicted rates.
/// No sampling is involved: the expected error has a closed form.
pub fn run_oracle_rate_cell(
    cfg: &OracleRateConfig,
    spectrum: &Spectrum,
    truth: &TrueFunction,
    s: f64,
) -> Result<OracleRateCell> {
    let beta = spectrum.beta()?.value();
    let r = truth.smoothness();
    let theory = theoretical_rates(s, r, beta)?;
    let mut lambdas = Vec::with_capacity(cfg.sigmas.len());
    let mut errors = Vec::with_capacity(cfg.sigmas.len());
    let mut exclusions = Vec::new();
    for (i, &sigma) in cfg.sigmas.iter().enumerate() {
        let sel = oracle_lambda(spectrum, truth, sigma, s, &cfg.lambda_grid)?;
        if sel.diagnostics.at_boundary {
            exclusions.push(Exclusion {
                index: i,
                reason: alloc::format!("oracle λ* clamped at grid boundary {:e}", sel.lambda_star),
            });
        }
        lambdas.push(sel.lambda_star);
        errors.push(expected_error(spectrum, truth, sigma, s, sel.lambda_star)?);
    }
    let lambda_fit = fit_rate(&cfg.sigmas, &lambdas, &exclusions)?;
    let error_fit = fit_rate(&cfg.sigmas, &errors, &exclusions)?;
    Ok(OracleRateCell {
        r,
        s,
        sigmas: cfg.sigmas.clone(),
        lambdas,
        errors,
        theory,
        lambda_fit,
        error_fit,
    })
}

/// Runs every `(r, s)` cell in order.
pub fn run_oracle_rate_experiment(cfg: &OracleRateConfig) -> Result<Vec<OracleRateCell>> {
    let spectrum = oracle_spectrum(cfg)?;
    let mut out = Vec::with_capacity(cfg.r_values.len() * cfg.s_values.len());
    for &r in &cfg.r_values {
        let truth = oracle_truth(cfg, &spectrum, r)?;
        for &s in &cfg.s_values {
            out.push(run_oracle_rate_cell(cfg, &spectrum, &truth, s)?);
        }
    }
    Ok(out)
}

/// How the observation noise level maps to spectral coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NoiseScale {
    /// `σ √λ_i ξ_i`: white noise of intensity σ in the data space.
    WhiteNoise,
    /// `(σ/√M) √λ_i ξ_i`: iid noise of standard deviation σ at each of the
    /// `M` mesh points, seen through the quadrature inner product.
    #[default]
    PerMeshPoint,
}

impl NoiseScale {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseScale::WhiteNoise => "white",
            NoiseScale::PerMeshPoint => "per-mesh-point",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PracticalConfig {
    pub m: usize,
    pub rank_threshold: f64,
    pub r: f64,
    pub s_values: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub noise_scale: NoiseScale,
    /// Magnitude band of `v_i` in `c_i = v_i λ_i^r`.
    pub coefficient_band: (f64, f64),
    /// Grid searched by the oracle.
    pub oracle_grid: LambdaGrid,
    /// Number of points of the data-driven selectors' grid, which spans
    /// `[λ_min^(s+1), λ_max^(s+1)]`.
    pub selector_grid_count: usize,
    /// Solution-norm axis of the L-curve.
    pub solution_norm: SolutionNorm,
    pub seed: u64,
}

impl Default for PracticalConfig {
    fn default() -> Self {
        PracticalConfig {
            m: 500,
            rank_threshold: DEFAULT_RANK_THRESHOLD,
            r: 1.5,
            s_values: alloc::vec![0.0, 1.0, 2.0],
            sigmas: sigma_grid(1e-3, libm::pow(10.0, -0.5), 15.0).unwrap_or_default(),
            methods: alloc::vec![Method::Oracle, Method::LCurve, Method::Gcv],
            replicates: 20,
            noise_scale: NoiseScale::PerMeshPoint,
            coefficient_band: (0.95, 1.05),
            oracle_grid: LambdaGrid::new(1e-40, 1e2, 421).expect("static grid"),
            selector_grid_count: 200,
            solution_norm: SolutionNorm::Penalty,
            seed: 0,
        }
    }
}

/// The discretized problem and the true function shared by all cells.
#[derive(Debug, Clone)]
pub struct PracticalSetup {
    pub problem: FredholmProblem,
    pub spectrum: Spectrum,
    pub truth: TrueFunction,
}

pub fn practical_setup(cfg: &PracticalConfig) -> Result<PracticalSetup> {
    let problem = build_problem(cfg.m, cfg.rank_threshold)?;
    let spectrum = problem.spectrum();
    let (lo, hi) = cfg.coefficient_band;
    let truth = build_true_function(
        &spectrum,
        cfg.r,
        PerturbationBounds::UNIT,
        derive_seed(cfg.seed, &[label("practical-truth")]),
        Vec::new(),
        CoefficientLaw::BandedMagnitude { lo, hi },
    )?;
    Ok(PracticalSetup {
        problem,
        spectrum,
        truth,
    })
}

/// Identifies one practical cell. The noise draw depends only on
/// `(replicate, sigma_index)`, so all `s` and methods see the same data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PracticalKey {
    pub s_index: usize,
    pub sigma_index: usize,
    pub replicate: usize,
}

pub fn practical_keys(cfg: &PracticalConfig) -> Vec<PracticalKey> {
    let mut keys = Vec::with_capacity(cfg.s_values.len() * cfg.sigmas.len() * cfg.replicates);
    for s_index in 0..cfg.s_values.len() {
        for sigma_index in 0..cfg.sigmas.len() {
            for replicate in 0..cfg.replicates {
                keys.push(PracticalKey {
                    s_index,
                    sigma_index,
                    replicate,
                });
            }
        }
    }
    keys
}

pub fn noise_seed(master: u64, sigma_index: usize, replicate: usize) -> u64 {
    derive_seed(
        master,
        &[label("practical-noise"), replicate as u64, sigma_index as u64],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PracticalRow {
    pub s: f64,
    pub sigma: f64,
    pub sigma_index: usize,
    pub method: Method,
    pub replicate: usize,
    pub lambda: f64,
    pub error: f64,
    pub at_boundary: bool,
    /// Reason the selector failed; `lambda` and `error` are NaN then.
    pub failure: Option<String>,
}

/// The grid used by the data-driven selectors for penalty order `s`.
pub fn selector_grid(spectrum: &Spectrum, s: f64, count: usize) -> Result<LambdaGrid> {
    let lams = spectrum.eigenvalues();
    let (first, last) = match (lams.first(), lams.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::EmptySpectrum),
    };
    LambdaGrid::new(libm::pow(last, s + 1.0), libm::pow(first, s + 1.0), count)
}

/// Noise draw and observed coefficients of one `(sigma_index, replicate)` pair.
pub fn practical_observation(
    cfg: &PracticalConfig,
    setup: &PracticalSetup,
    sigma_index: usize,
    replicate: usize,
) -> Result<(NoiseDraw, ObservationCoefficients)> {
    let sigma = *cfg
        .sigmas
        .get(sigma_index)
        .ok_or_else(|| invalid("sigma_index", "out of range"))?;
    let effective = match cfg.noise_scale {
        NoiseScale::WhiteNoise => sigma,
        NoiseScale::PerMeshPoint => sigma / libm::sqrt(cfg.m as f64),
    };
    let noise = sample_noise(
        effective,
        setup.spectrum.len(),
        noise_seed(cfg.seed, sigma_index, replicate),
    )?;
    let obs = observe(&setup.spectrum, &setup.truth, &noise)?;
    Ok((noise, obs))
}

/// Runs all methods on one noise realization.
pub fn run_practical_cell(
    cfg: &PracticalConfig,
    setup: &PracticalSetup,
    key: PracticalKey,
) -> Result<Vec<PracticalRow>> {
    let s = *cfg
        .s_values
        .get(key.s_index)
        .ok_or_else(|| invalid("s_index", "out of range"))?;
    let sigma = *cfg
        .sigmas
        .get(key.sigma_index)
        .ok_or_else(|| invalid("sigma_index", "out of range"))?;
    let (noise, obs) = practical_observation(cfg, setup, key.sigma_index, key.replicate)?;
    let effective = noise.sigma;
    let grid = selector_grid(&setup.spectrum, s, cfg.selector_grid_count)?;

    let mut rows = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let selected = match method {
            Method::Oracle => {
                if effective == 0.0 {
                    // noiseless data: the error vanishes as λ → 0
                    Ok((cfg.oracle_grid.lo(), true))
                } else {
                    oracle_lambda_realized(&setup.spectrum, &setup.truth, &noise, s, &cfg.oracle_grid)
                        .map(|r| (r.lambda_star, r.diagnostics.at_boundary))
                }
            }
            Method::LCurve => lcurve_lambda_with(&setup.spectrum, &obs, s, &grid, cfg.solution_norm)
                .map(|r| (r.lambda_star, r.diagnostics.at_boundary)),
            Method::Gcv => {
                gcv_lambda(&setup.spectrum, &obs, s, &grid).map(|r| (r.lambda_star, r.diagnostics.at_boundary))
            }
        };
        let row = match selected {
            Ok((lambda, at_boundary)) => PracticalRow {
                s,
                sigma,
                sigma_index: key.sigma_index,
                method,
                replicate: key.replicate,
                lambda,
                error: realized_error(&setup.spectrum, &setup.truth, &noise, s, lambda)?,
                at_boundary,
                failure: None,
            },
            Err(e) => PracticalRow {
                s,
                sigma,
                sigma_index: key.sigma_index,
                method,
                replicate: key.replicate,
                lambda: f64::NAN,
                error: f64::NAN,
                at_boundary: false,
                failure: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Runs every cell in key order.
pub fn run_practical_experiment(cfg: &PracticalConfig) -> Result<Vec<PracticalRow>> {
    let setup = practical_setup(cfg)?;
    let mut rows = Vec::new();
    for key in practical_keys(cfg) {
        rows.extend(run_practical_cell(cfg, &setup, key)?);
    }
    Ok(rows)
}

fn select(rows: &[PracticalRow], s: f64, sigma_index: usize, method: Method) -> impl Iterator<Item = &PracticalRow> {
    rows.iter()
        .filter(move |r| r.s == s && r.sigma_index == sigma_index && r.method == method && r.failure.is_none())
}

/// Median across replicates of `error(method) / error(reference)` at one σ.
pub fn median_error_ratio(
    rows: &[PracticalRow],
    s: f64,
    sigma_index: usize,
    method: Method,
    reference: Method,
) -> Option<f64> {
    let ratios: Vec<f64> = select(rows, s, sigma_index, method)
        .filter_map(|a| {
            select(rows, s, sigma_index, reference)
                .find(|b| b.replicate == a.replicate)
                .map(|b| a.error / b.error)
        })
        .filter(|v| v.is_finite())
        .collect();
    median(&ratios)
}

/// Median selected λ across replicates at one σ.
pub fn median_lambda(rows: &[PracticalRow], s: f64, sigma_index: usize, method: Method) -> Option<f64> {
    let l: Vec<f64> = select(rows, s, sigma_index, method).map(|r| r.lambda).collect();
    median(&l)
}

/// `max/min` over the σ grid of the per-σ median selected λ.
pub fn lambda_spread(rows: &[PracticalRow], s: f64, sigma_count: usize, method: Method) -> Option<f64> {
    let meds: Vec<f64> = (0..sigma_count)
        .filter_map(|i| median_lambda(rows, s, i, method))
        .collect();
    if meds.is_empty() {
        return None;
    }
    let hi = meds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = meds.iter().copied().fold(f64::INFINITY, f64::min);
    Some(hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn theory_examples() {
        let t = theoretical_rates(2.0, 1.2, 1.0).unwrap();
        assert_eq!(t.regime, Regime::OverSmoothing);
        assert!((t.lambda_exponent.unwrap() - 6.0 / 3.4).abs() < 1e-12);
        assert!((t.error_exponent.unwrap() - (2.0 - 2.0 / 3.4)).abs() < 1e-12);
        let t = theoretical_rates(0.0, 1.7, 1.0).unwrap();
        assert_eq!(t.regime, Regime::UnderSmoothing);
        assert!((t.lambda_exponent.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.error_exponent.unwrap() - 4.0 / 3.0).abs() < 1e-12);
        let t = theoretical_rates(0.2, 1.2, 1.0).unwrap();
        assert_eq!(t.regime, Regime::Threshold);
        assert_eq!(t.lambda_exponent, None);
    }

    #[test]
    fn fit_exact_power_law() {
        let sig = logspace(1e-6, 1e-2, 9);
        let v: Vec<f64> = sig.iter().map(|s| 3.0 * libm::pow(*s, 1.5)).collect();
        let f = fit_rate(&sig, &v, &[]).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - libm::log(3.0)).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let flat = fit_rate(&sig, &[2.0; 9], &[]).unwrap();
        assert!(flat.slope.abs() < 1e-14);
        let mut bad = v.clone();
        bad[0] = 0.0;
        assert!(fit_rate(&sig, &bad, &[]).is_err());
        let ex: Vec<Exclusion> = (0..7)
            .map(|i| Exclusion {
                index: i,
                reason: "x".into(),
            })
            .collect();
        assert!(matches!(fit_rate(&sig, &v, &ex), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn single_mode_error_rate() {
        let sp = Spectrum::explicit(vec![1.0])
            .unwrap()
            .with_beta(crate::spectrum::BetaConstant::new(1.0).unwrap());
        let tf = TrueFunction::from_coefficients(vec![1.0], vec![], 1.0).unwrap();
        let cfg = OracleRateConfig {
            sigmas: logspace(1e-6, 1e-3, 10),
            lambda_grid: LambdaGrid::new(1e-16, 1e2, 181).unwrap(),
            ..OracleRateConfig::default()
        };
        let cell = run_oracle_rate_cell(&cfg, &sp, &tf, 0.0).unwrap();
        assert!((cell.error_fit.slope - 2.0).abs() < 0.01);
        assert!((cell.lambda_fit.slope - 2.0).abs() < 0.01);
    }

    #[test]
    fn sigma_grid_density() {
        let g = sigma_grid(1e-7, 1e-1, 15.0).unwrap();
        assert_eq!(g.len(), 91);
        assert_eq!(g[0], 1e-7);
        assert_eq!(g[90], 1e-1);
    }
}
