//! Estimators and their errors in spectral coordinates.
//!
//! With eigenpairs `(λ_i, ψ_i)` of the normal operator and a true function
//! `φ* = Σ c_i ψ_i + Σ d_j ψ_j⁰`, the data term has coordinates
//! `b_i = λ_i c_i + σ √λ_i ξ_i` with iid standard normal `ξ_i`. The
//! `H_G^s`-regularized estimator is the spectral filter
//! `â_i = λ_i^s b_i / (λ_i^(s+1) + λ)`; `s = 0` is Tikhonov restricted to the
//! identifiable subspace and `λ = 0` is the minimum-norm least-squares estimate.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, invalid, Error, Result};
use crate::math::{compensated_sum, golden_section};
use crate::rng;
use crate::spectrum::{Spectrum, TrueFunction};

/// One realization of the noise in spectral coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub sigma: f64,
    pub xi: Vec<f64>,
    pub seed: u64,
}

impl NoiseDraw {
    /// The same standard-normal draws at a different noise level.
    pub fn with_sigma(&self, sigma: f64) -> Result<NoiseDraw> {
        check_sigma(sigma)?;
        Ok(NoiseDraw {
            sigma,
            xi: self.xi.clone(),
            seed: self.seed,
        })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            "sigma",
            alloc::format!("noise level must be >= 0, got {sigma}"),
        ))
    }
}

fn check_reg(s: f64, lambda: f64) -> Result<()> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid("s", alloc::format!("smoothness must be >= 0, got {s}")));
    }
    if !(lambda >= 0.0) || lambda.is_nan() {
        return Err(invalid(
            "lambda",
            alloc::format!("regularization must be >= 0, got {lambda}"),
        ));
    }
    Ok(())
}

/// `n` iid standard normal draws from the stream seeded by `seed`.
pub fn sample_noise(sigma: f64, n: usize, seed: u64) -> Result<NoiseDraw> {
    check_sigma(sigma)?;
    if n == 0 {
        return Err(invalid("N", "need at least one mode"));
    }
    let mut stream = rng::stream(seed);
    let xi = (0..n).map(|_| stream.sample(StandardNormal)).collect();
    Ok(NoiseDraw { sigma, xi, seed })
}

/// Spectral coordinates `b_i` of the data term.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationCoefficients {
    pub b: Vec<f64>,
    pub sigma: f64,
    pub noise_seed: u64,
    pub truth_seed: u64,
}

impl ObservationCoefficients {
    /// Observation coefficients given directly.
    pub fn from_values(b: Vec<f64>) -> Self {
        ObservationCoefficients {
            b,
            sigma: f64::NAN,
            noise_seed: 0,
            truth_seed: 0,
        }
    }
}

/// `b_i = λ_i c_i + σ √λ_i ξ_i`. Null-space components never enter `b`.
pub fn observe(spectrum: &Spectrum, truth: &TrueFunction, noise: &NoiseDraw) -> Result<ObservationCoefficients> {
    let n = spectrum.len();
    check_len("true function coefficients", n, truth.len())?;
    check_len("noise draws", n, noise.xi.len())?;
    let b = spectrum
        .eigenvalues()
        .iter()
        .zip(truth.coefficients())
        .zip(&noise.xi)
        .map(|((lam, c), xi)| lam * c + noise.sigma * libm::sqrt(*lam) * xi)
        .collect();
    Ok(ObservationCoefficients {
        b,
        sigma: noise.sigma,
        noise_seed: noise.seed,
        truth_seed: truth.seed(),
    })
}

/// Spectral coefficients `â_i` of an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateCoefficients {
    pub a: Vec<f64>,
    pub s: f64,
    pub lambda: f64,
}

/// Minimum-norm least squares: `â_i = b_i / λ_i`.
pub fn lse(spectrum: &Spectrum, obs: &ObservationCoefficients) -> Result<EstimateCoefficients> {
    check_len("observation coefficients", spectrum.len(), obs.b.len())?;
    let a = spectrum
        .eigenvalues()
        .iter()
        .zip(&obs.b)
        .enumerate()
        .map(|(i, (lam, b))| {
            if *lam > 0.0 {
                Ok(b / lam)
            } else {
                Err(Error::ZeroEigenvalue(i))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EstimateCoefficients { a, s: 0.0, lambda: 0.0 })
}

/// Filter factor `λ_i^s / (λ_i^(s+1) + λ)` applied to `b_i`.
#[inline]
pub(crate) fn filter(lam_i: f64, s: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        1.0 / lam_i
    } else {
        libm::pow(lam_i, s) / (libm::pow(lam_i, s + 1.0) + lambda)
    }
}

/// `â_i = λ_i^s b_i / (λ_i^(s+1) + λ)`.
pub fn regularize(
    spectrum: &Spectrum,
    obs: &ObservationCoefficients,
    s: f64,
    lambda: f64,
) -> Result<EstimateCoefficients> {
    check_reg(s, lambda)?;
    if lambda == 0.0 {
        let mut est = lse(spectrum, obs)?;
        est.s = s;
        return Ok(est);
    }
    check_len("observation coefficients", spectrum.len(), obs.b.len())?;
    let a = spectrum
        .eigenvalues()
        .iter()
        .zip(&obs.b)
        .map(|(lam, b)| if *b == 0.0 { 0.0 } else { b * filter(*lam, s, lambda) })
        .collect();
    Ok(EstimateCoefficients { a, s, lambda })
}

/// Realized squared `L²_ρ` error of the regularized estimator for one noise draw:
/// `Σ_i (λ_i^(s+1) + λ)^(−2) (σ λ_i^(s+1/2) ξ_i − λ c_i)² + Σ_j d_j²`.
pub fn realized_error(
    spectrum: &Spectrum,
    truth: &TrueFunction,
    noise: &NoiseDraw,
    s: f64,
    lambda: f64,
) -> Result<f64> {
    check_reg(s, lambda)?;
    RealizedErrorProfile::new(spectrum, truth, noise, s)?.at(lambda)
}

/// The realized error as a function of λ for a fixed draw and penalty order,
/// with the powers of the eigenvalues computed once.
#[derive(Debug, Clone)]
pub struct RealizedErrorProfile {
    /// `λ_i^(s+1)`
    pow_s1: Vec<f64>,
    /// `σ λ_i^(s+1/2) ξ_i`
    noise_term: Vec<f64>,
    /// `σ ξ_i / √λ_i`, the least-squares error
    lse_term: Vec<f64>,
    coefficients: Vec<f64>,
    null_offset: f64,
    zero_mode: Option<usize>,
}

impl RealizedErrorProfile {
    pub fn new(spectrum: &Spectrum, truth: &TrueFunction, noise: &NoiseDraw, s: f64) -> Result<Self> {
        check_reg(s, 1.0)?;
        let n = spectrum.len();
        check_len("true function coefficients", n, truth.len())?;
        check_len("noise draws", n, noise.xi.len())?;
        let lams = spectrum.eigenvalues();
        let sigma = noise.sigma;
        Ok(RealizedErrorProfile {
            pow_s1: lams.iter().map(|l| libm::pow(*l, s + 1.0)).collect(),
            noise_term: lams
                .iter()
                .zip(&noise.xi)
                .map(|(l, xi)| sigma * libm::pow(*l, s + 0.5) * xi)
                .collect(),
            lse_term: lams
                .iter()
                .zip(&noise.xi)
                .map(|(l, xi)| sigma * xi / libm::sqrt(*l))
                .collect(),
            coefficients: truth.coefficients().to_vec(),
            null_offset: truth.null_norm_sq(),
            zero_mode: lams.iter().position(|l| *l <= 0.0),
        })
    }

    pub fn at(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(invalid(
                "lambda",
                alloc::format!("regularization must be >= 0, got {lambda}"),
            ));
        }
        if lambda == 0.0 {
            if let Some(i) = self.zero_mode {
                return Err(Error::ZeroEigenvalue(i));
            }
            return Ok(compensated_sum(self.lse_term.iter().map(|e| e * e)) + self.null_offset);
        }
        let terms = self
            .pow_s1
            .iter()
            .zip(&self.noise_term)
            .zip(&self.coefficients)
            .map(|((q, nt), c)| {
                let v = (nt - lambda * c) / (q + lambda);
                v * v
            });
        Ok(compensated_sum(terms) + self.null_offset)
    }
}

/// Variance, bias and null-space parts of the expected error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorParts {
    /// `σ² Σ (λ_i^(s+1) + λ)^(−2) λ_i^(2s+1)`
    pub variance: f64,
    /// `λ² Σ (λ_i^(s+1) + λ)^(−2) c_i²`
    pub bias: f64,
    /// `Σ d_j²`, a constant offset that no choice of λ removes.
    pub null_offset: f64,
}

impl ErrorParts {
    pub fn total(&self) -> f64 {
        self.variance + self.bias + self.null_offset
    }

    pub fn has_null_offset(&self) -> bool {
        self.null_offset > 0.0
    }
}

pub fn expected_error_parts(
    spectrum: &Spectrum,
    truth: &TrueFunction,
    sigma: f64,
    s: f64,
    lambda: f64,
) -> Result<ErrorParts> {
    check_sigma(sigma)?;
    check_reg(s, lambda)?;
    check_len("true function coefficients", spectrum.len(), truth.len())?;
    let lams = spectrum.eigenvalues();
    if lambda == 0.0 {
        if let Some(i) = lams.iter().position(|l| *l <= 0.0) {
            return Err(Error::ZeroEigenvalue(i));
        }
        return Ok(ErrorParts {
            variance: sigma * sigma * compensated_sum(lams.iter().map(|l| 1.0 / l)),
            bias: 0.0,
            null_offset: truth.null_norm_sq(),
        });
    }
    let mut var_terms = Vec::with_capacity(lams.len());
    let mut bias_terms = Vec::with_capacity(lams.len());
    for (lam, c) in lams.iter().zip(truth.coefficients()) {
        let den = libm::pow(*lam, s + 1.0) + lambda;
        // λ_i^(2s+1)/den² written as (λ_i^(s+1/2)/den)² to avoid underflow in the numerator
        let v = libm::pow(*lam, s + 0.5) / den;
        let bias = c / den;
        var_terms.push(v * v);
        bias_terms.push(bias * bias);
    }
    Ok(ErrorParts {
        variance: sigma * sigma * compensated_sum(var_terms),
        bias: lambda * lambda * compensated_sum(bias_terms),
        null_offset: truth.null_norm_sq(),
    })
}

/// Expected squared error `e(λ; s)`, plus `Σ d_j²` when the truth has null components.
pub fn expected_error(spectrum: &Spectrum, truth: &TrueFunction, sigma: f64, s: f64, lambda: f64) -> Result<f64> {
    expected_error_parts(spectrum, truth, sigma, s, lambda).map(|p| p.total())
}

/// Inputs of the finite-rank bias comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteRankConfig {
    /// The `K` positive eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Coefficients of the true function on those `K` modes.
    pub coefficients: Vec<f64>,
    /// Components of the perturbation on the null space.
    pub perturbation: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub s: f64,
    /// λ values scanned for the minimal error.
    pub lambda_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteRankRow {
    pub sigma: f64,
    /// `min_λ E‖φ̃_λ^{L²} − φ*‖²` over the grid, null-space pollution included.
    pub l2_min_error: f64,
    pub l2_argmin: f64,
    /// `2√K λ_K⁻¹ ‖φ*‖ ‖φ^ε‖`.
    pub l2_stated_bound: f64,
    /// `min_{λ>0} [λ² ‖φ*‖² / (λ_1 + λ)² + ‖φ^ε‖² / λ²]`, a σ-independent floor
    /// of the L² error that follows from `(λ_i + λ)⁻² ≥ (λ_1 + λ)⁻²`.
    pub l2_floor: f64,
    pub hs_min_error: f64,
    pub hs_argmin: f64,
    /// `E‖φ̃_σ^s − φ*‖²`, the H_G^s error at λ = σ.
    pub hs_error_at_sigma: f64,
    /// `σ² λ_K^(−2s−2) (K λ_1^(2s+1) + ‖φ*‖²)`.
    pub hs_upper_bound: f64,
}

impl FiniteRankRow {
    pub fn l2_stated_bound_holds(&self) -> bool {
        self.l2_min_error >= self.l2_stated_bound
    }

    pub fn l2_floor_holds(&self) -> bool {
        self.l2_min_error >= self.l2_floor * (1.0 - 1e-9)
    }

    pub fn hs_bound_holds(&self) -> bool {
        self.hs_error_at_sigma <= self.hs_upper_bound * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteRankReport {
    pub k: usize,
    pub truth_norm: f64,
    pub perturbation_norm: f64,
    pub rows: Vec<FiniteRankRow>,
}

/// Compares L² and `H_G^s` regularization on a rank-`K` operator when the data
/// term carries a perturbation in the null space.
///
/// The L² estimator `(L̄ + λI)⁻¹(φ^y + φ^ε)` keeps `φ^ε/λ` in the null space;
/// the `H_G^s` estimator acts on the identifiable subspace only and ignores it.
pub fn finite_rank_bias_demo(cfg: &FiniteRankConfig) -> Result<FiniteRankReport> {
    let k = cfg.eigenvalues.len();
    if k == 0 {
        return Err(invalid("K", "need at least one positive eigenvalue"));
    }
    if cfg.perturbation.is_empty() {
        return Err(invalid(
            "perturbation",
            "null-space perturbation must have at least one component",
        ));
    }
    check_len("true function coefficients", k, cfg.coefficients.len())?;
    let spectrum = Spectrum::explicit(cfg.eigenvalues.clone())?;
    let truth = TrueFunction::from_coefficients(cfg.coefficients.clone(), Vec::new(), 0.0)?;
    check_reg(cfg.s, 0.0)?;
    if cfg.lambda_grid.is_empty() || cfg.lambda_grid.iter().any(|l| !(*l > 0.0)) {
        return Err(invalid("lambda_grid", "need positive λ values"));
    }

    let lam_1 = cfg.eigenvalues[0];
    let lam_k = cfg.eigenvalues[k - 1];
    let truth_sq = truth.norm_sq();
    let eps_sq = compensated_sum(cfg.perturbation.iter().map(|e| e * e));
    let truth_norm = libm::sqrt(truth_sq);
    let eps_norm = libm::sqrt(eps_sq);

    let l2_stated_bound = 2.0 * libm::sqrt(k as f64) / lam_k * truth_norm * eps_norm;
    let l2_floor = if eps_sq == 0.0 || truth_sq == 0.0 {
        0.0
    } else {
        let g = |t: f64| {
            let l = libm::exp(t);
            l * l * truth_sq / ((lam_1 + l) * (lam_1 + l)) + eps_sq / (l * l)
        };
        // g is unimodal in log λ; bracket generously around its scale.
        let centre = libm::log(libm::sqrt(libm::sqrt(eps_sq / truth_sq)) * libm::sqrt(lam_1));
        golden_section(g, centre - 40.0, centre + 40.0, 1e-12, 400).value
    };

    let mut rows = Vec::with_capacity(cfg.sigmas.len());
    for &sigma in &cfg.sigmas {
        check_sigma(sigma)?;
        let mut l2_best = (f64::INFINITY, f64::NAN);
        let mut hs_best = (f64::INFINITY, f64::NAN);
        for &lambda in &cfg.lambda_grid {
            let l2 = expected_error(&spectrum, &truth, sigma, 0.0, lambda)? + eps_sq / (lambda * lambda);
            if l2 < l2_best.0 {
                l2_best = (l2, lambda);
            }
            let hs = expected_error(&spectrum, &truth, sigma, cfg.s, lambda)?;
            if hs < hs_best.0 {
                hs_best = (hs, lambda);
            }
        }
        let hs_at_sigma = if sigma > 0.0 {
            expected_error(&spectrum, &truth, sigma, cfg.s, sigma)?
        } else {
            0.0
        };
        let hs_upper_bound = sigma
            * sigma
            * libm::pow(lam_k, -2.0 * cfg.s - 2.0)
            * (k as f64 * libm::pow(lam_1, 2.0 * cfg.s + 1.0) + truth_sq);
        rows.push(FiniteRankRow {
            sigma,
            l2_min_error: l2_best.0,
            l2_argmin: l2_best.1,
            l2_stated_bound,
            l2_floor,
            hs_min_error: hs_best.0,
            hs_argmin: hs_best.1,
            hs_error_at_sigma: hs_at_sigma,
            hs_upper_bound,
        });
    }
    Ok(FiniteRankReport {
        k,
        truth_norm,
        perturbation_norm: eps_norm,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::logspace;
    use alloc::vec;

    fn one_mode(lam: f64, c: f64) -> (Spectrum, TrueFunction) {
        (
            Spectrum::explicit(vec![lam]).unwrap(),
            TrueFunction::from_coefficients(vec![c], vec![], 1.0).unwrap(),
        )
    }

    #[test]
    fn noise_is_deterministic() {
        let a = sample_noise(1.0, 16, 42).unwrap();
        let b = sample_noise(1.0, 16, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.xi, sample_noise(1.0, 16, 43).unwrap().xi);
        assert!(sample_noise(-1.0, 3, 0).is_err());
    }

    #[test]
    fn observe_examples() {
        let (s, t) = one_mode(1.0, 2.0);
        let quiet = NoiseDraw {
            sigma: 0.0,
            xi: vec![3.0],
            seed: 0,
        };
        assert_eq!(observe(&s, &t, &quiet).unwrap().b, vec![2.0]);
        let (s, t) = one_mode(0.25, 1.0);
        let unit = NoiseDraw {
            sigma: 1.0,
            xi: vec![1.0],
            seed: 0,
        };
        assert_eq!(observe(&s, &t, &unit).unwrap().b, vec![0.75]);
        let short = NoiseDraw {
            sigma: 1.0,
            xi: vec![],
            seed: 0,
        };
        assert!(observe(&s, &t, &short).is_err());
    }

    #[test]
    fn lse_examples() {
        let s = Spectrum::explicit(vec![0.5]).unwrap();
        let obs = ObservationCoefficients::from_values(vec![1.0]);
        assert_eq!(lse(&s, &obs).unwrap().a, vec![2.0]);

        let s = Spectrum::explicit(vec![1.0, 0.3, 0.01]).unwrap();
        let t = TrueFunction::from_coefficients(vec![0.5, -1.0, 2.0], vec![0.2], 1.0).unwrap();
        let quiet = sample_noise(0.0, 3, 1).unwrap();
        let obs = observe(&s, &t, &quiet).unwrap();
        let est = lse(&s, &obs).unwrap();
        for (a, c) in est.a.iter().zip(t.coefficients()) {
            assert!((a - c).abs() < 1e-14);
        }
    }

    #[test]
    fn regularize_examples() {
        let s = Spectrum::explicit(vec![1.0]).unwrap();
        let obs = ObservationCoefficients::from_values(vec![1.0]);
        assert_eq!(regularize(&s, &obs, 1.0, 1.0).unwrap().a, vec![0.5]);
        assert!(regularize(&s, &obs, 1.0, 1e300).unwrap().a[0] < 1e-299);
        assert!(regularize(&s, &obs, -1.0, 1.0).is_err());
        assert!(regularize(&s, &obs, 1.0, -1.0).is_err());
        // λ = 0 degenerates to the least-squares estimate
        assert_eq!(regularize(&s, &obs, 2.0, 0.0).unwrap().a, vec![1.0]);
    }

    #[test]
    fn regularize_matches_brute_force_minimizer() {
        // minimize λ_1 a² − 2ab + λ a² over a fine lattice
        let (lam1, b, lambda) = (0.5, 0.5, 0.5);
        let s = Spectrum::explicit(vec![lam1]).unwrap();
        let obs = ObservationCoefficients::from_values(vec![b]);
        let a = regularize(&s, &obs, 0.0, lambda).unwrap().a[0];
        assert_eq!(a, 0.5);
        let step = 1e-5;
        let best = (0..200_001)
            .map(|k| -1.0 + k as f64 * step)
            .min_by(|x, y| {
                let f = |a: f64| lam1 * a * a - 2.0 * a * b + lambda * a * a;
                f(*x).total_cmp(&f(*y))
            })
            .unwrap();
        assert!((best - a).abs() <= step);
    }

    #[test]
    fn realized_error_examples() {
        let s = Spectrum::explicit(vec![1.0, 0.5]).unwrap();
        let t = TrueFunction::from_coefficients(vec![1.0, 2.0], vec![0.3, 0.4], 1.0).unwrap();
        let quiet = sample_noise(0.0, 2, 5).unwrap();
        let e = realized_error(&s, &t, &quiet, 1.0, 0.0).unwrap();
        assert!((e - 0.25).abs() < 1e-15);

        let (s1, t1) = one_mode(1.0, 1.0);
        let quiet = sample_noise(0.0, 1, 5).unwrap();
        assert!((realized_error(&s1, &t1, &quiet, 0.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn expected_error_limits() {
        let s = Spectrum::explicit(vec![1.0, 0.4, 0.05, 0.01]).unwrap();
        let t = TrueFunction::from_coefficients(vec![0.7, -0.2, 0.1, 0.03], vec![], 1.0).unwrap();
        let sigma = 0.1;
        let var = sigma * sigma * (1.0 + 2.5 + 20.0 + 100.0);
        for s_par in [0.0, 1.0, 2.5] {
            let small = expected_error(&s, &t, sigma, s_par, 1e-15).unwrap();
            // the smallest mode at s = 2.5 has λ_i^(s+1) = 1e-7, so λ = 1e-15 still shifts it by 1e-8
            assert!((small / var - 1.0).abs() < 1e-7, "{small} vs {var}");
            let large = expected_error(&s, &t, sigma, s_par, 1e15).unwrap();
            let bias = t.norm_sq();
            assert!((large / bias - 1.0).abs() < 1e-8);
        }
        let t_null = TrueFunction::from_coefficients(vec![0.7, -0.2, 0.1, 0.03], vec![0.5], 1.0).unwrap();
        let parts = expected_error_parts(&s, &t_null, sigma, 1.0, 1e15).unwrap();
        assert!(parts.has_null_offset());
        assert!((parts.total() / (t.norm_sq() + 0.25) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn finite_rank_demo_matches_hand_computation() {
        let cfg = FiniteRankConfig {
            eigenvalues: vec![1.0],
            coefficients: vec![1.0],
            perturbation: vec![0.1],
            sigmas: vec![1e-1, 1e-3, 1e-5],
            s: 1.0,
            lambda_grid: logspace(1e-12, 1e4, 1601),
        };
        let report = finite_rank_bias_demo(&cfg).unwrap();
        for row in &report.rows {
            assert!((row.l2_stated_bound - 0.2).abs() < 1e-15);
            assert!(row.hs_bound_holds());
            assert!(row.hs_error_at_sigma <= 2.0 * row.sigma * row.sigma);
            // the L² error stays bounded away from zero
            assert!(row.l2_floor_holds());
            assert!(row.l2_min_error > 0.14);
        }
        // the stated 0.2 bound is not a valid lower bound: the true minimum of
        // λ²/(1+λ)² + 0.01/λ² is about 0.1436, attained near λ ≈ 0.42
        let last = report.rows.last().unwrap();
        assert!(last.l2_min_error < 0.2);
        assert!((last.l2_floor - 0.1436).abs() < 1e-3, "{}", last.l2_floor);
    }

    #[test]
    fn finite_rank_without_perturbation_vanishes() {
        let cfg = FiniteRankConfig {
            eigenvalues: vec![1.0, 0.5],
            coefficients: vec![1.0, 0.2],
            perturbation: vec![0.0],
            sigmas: vec![1e-2, 1e-4, 1e-6],
            s: 1.0,
            lambda_grid: logspace(1e-16, 1e2, 901),
        };
        let report = finite_rank_bias_demo(&cfg).unwrap();
        let errs: Vec<f64> = report.rows.iter().map(|r| r.l2_min_error).collect();
        assert!(errs[2] < 1e-9 && errs[2] < errs[1] && errs[1] < errs[0]);
        assert!(report.rows[2].hs_min_error < 1e-9);
        let empty = FiniteRankConfig {
            perturbation: vec![],
            ..cfg.clone()
        };
        assert!(finite_rank_bias_demo(&empty).is_err());
        let k0 = FiniteRankConfig {
            eigenvalues: vec![],
            coefficients: vec![],
            ..cfg
        };
        assert!(finite_rank_bias_demo(&k0).is_err());
    }
}
