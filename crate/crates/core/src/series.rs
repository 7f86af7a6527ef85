//! The spectral series `F_s(λ; k, α) = Σ (λ_i^(s+1) + λ)^(−k) λ_i^α`, the
//! error series `A, −A′/2, B, B_1` built from it, and their small-λ leading
//! terms obtained by approximating the series with a Riemann integral.
//!
//! Direct summation is the reference; the closed forms only predict the
//! leading power of λ (and, when the spectrum is unperturbed, its constant).

use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::math::{ols, sum_descending};
use crate::spectrum::{Spectrum, TrueFunction};

/// Half-width of the band around `s = r − (β+1)/2` in which no leading-order
/// prediction is made.
pub const THRESHOLD_GUARD: f64 = 0.05;

/// Tolerance for treating `γ = k` as the logarithmic case.
const BRANCH_TOL: f64 = 1e-12;

/// Which side of the smoothing threshold `r − (β+1)/2` the penalty order lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `s > r − (β+1)/2`
    OverSmoothing,
    /// `s < r − (β+1)/2`
    UnderSmoothing,
    /// Within [`THRESHOLD_GUARD`] of the threshold.
    Threshold,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::OverSmoothing => "over-smoothing",
            Regime::UnderSmoothing => "under-smoothing",
            Regime::Threshold => "threshold",
        }
    }
}

/// `r − (β+1)/2`.
pub fn smoothing_threshold(r: f64, beta: f64) -> f64 {
    r - 0.5 * (beta + 1.0)
}

pub fn classify_regime(s: f64, r: f64, beta: f64) -> Regime {
    let t = smoothing_threshold(r, beta);
    if libm::fabs(s - t) < THRESHOLD_GUARD {
        Regime::Threshold
    } else if s > t {
        Regime::OverSmoothing
    } else {
        Regime::UnderSmoothing
    }
}

/// `η_A = β/(s+1)`.
pub fn eta_a(s: f64, beta: f64) -> f64 {
    beta / (s + 1.0)
}

/// `η_B = (β − 2r − 1)/(s+1) + 2`.
pub fn eta_b(s: f64, r: f64, beta: f64) -> f64 {
    (beta - 2.0 * r - 1.0) / (s + 1.0) + 2.0
}

fn check_series_args(s: f64, k: f64, lambda: f64) -> Result<()> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid("s", alloc::format!("must be >= 0, got {s}")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("k", alloc::format!("must be > 0, got {k}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", alloc::format!("must be > 0, got {lambda}")));
    }
    Ok(())
}

/// `ln(e^a + e^b)`.
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + libm::log1p(libm::exp(lo - hi))
    }
}

/// Terms are formed in log space so that tiny `λ_i^α` and weights do not
/// underflow before the division.
fn series_terms(
    eigenvalues: &[f64],
    log_weights: impl Iterator<Item = f64>,
    s: f64,
    k: f64,
    alpha: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    let ln_lambda = libm::log(lambda);
    eigenvalues
        .iter()
        .zip(log_weights)
        .enumerate()
        .map(|(i, (lam, lw))| {
            if !(*lam > 0.0) {
                return Err(Error::NonPositive { index: i, value: *lam });
            }
            if lw == f64::NEG_INFINITY {
                return Ok(0.0);
            }
            let ln_lam = libm::log(*lam);
            let ln_den = log_add((s + 1.0) * ln_lam, ln_lambda);
            Ok(libm::exp(lw + alpha * ln_lam - k * ln_den))
        })
        .collect()
}

/// `F_s(λ; k, α)` by direct summation over the retained modes, accumulated
/// in order of decreasing magnitude.
pub fn f_series(spectrum: &Spectrum, s: f64, k: f64, alpha: f64, lambda: f64) -> Result<f64> {
    check_series_args(s, k, lambda)?;
    let terms = series_terms(spectrum.eigenvalues(), core::iter::repeat(0.0), s, k, alpha, lambda)?;
    Ok(sum_descending(terms))
}

/// `Σ (λ_i^(s+1) + λ)^(−k) λ_i^α w_i` for non-negative weights `w_i`.
pub fn f_series_weighted(spectrum: &Spectrum, weights: &[f64], s: f64, k: f64, alpha: f64, lambda: f64) -> Result<f64> {
    check_series_args(s, k, lambda)?;
    check_len("series weights", spectrum.len(), weights.len())?;
    if let Some((index, value)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(Error::NonPositive { index, value: *value });
    }
    let terms = series_terms(
        spectrum.eigenvalues(),
        weights.iter().map(|w| libm::log(*w)),
        s,
        k,
        alpha,
        lambda,
    )?;
    Ok(sum_descending(terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JBranch {
    /// `0 < γ < k`: a negative power of λ.
    Power,
    /// `γ = k`: logarithmic growth.
    Logarithmic,
    /// `γ > k`: bounded.
    Constant,
}

impl JBranch {
    pub fn name(&self) -> &'static str {
        match self {
            JBranch::Power => "power",
            JBranch::Logarithmic => "log",
            JBranch::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JValue {
    pub value: f64,
    pub branch: JBranch,
    pub gamma: f64,
    /// Exponent of λ in the leading term: `γ − k` on the power branch, 0 otherwise.
    pub exponent: f64,
}

/// Leading small-λ behaviour of `∫_0^1 (y^(s+1) + cλ)^(−k) y^(α−β) dy`, with
/// `γ = (α − β + 1)/(s+1)`.
pub fn j_closed_form(s: f64, k: f64, alpha: f64, beta: f64, lambda: f64, c: f64) -> Result<JValue> {
    check_series_args(s, k, lambda)?;
    if lambda >= 1.0 {
        return Err(invalid("lambda", alloc::format!("must lie in (0, 1), got {lambda}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid("c", alloc::format!("must be > 0, got {c}")));
    }
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(invalid("beta", alloc::format!("must be >= 1, got {beta}")));
    }
    let gamma = (alpha - beta + 1.0) / (s + 1.0);
    if !(gamma > 0.0) {
        return Err(invalid(
            "gamma",
            alloc::format!("(alpha - beta + 1)/(s + 1) = {gamma} must be positive"),
        ));
    }
    let out = if libm::fabs(gamma - k) <= BRANCH_TOL * libm::fmax(1.0, k) {
        JValue {
            value: -libm::log(lambda) / (s + 1.0),
            branch: JBranch::Logarithmic,
            gamma,
            exponent: 0.0,
        }
    } else if gamma < k {
        let beta_fn = libm::tgamma(gamma) * libm::tgamma(k - gamma) / libm::tgamma(k);
        JValue {
            value: libm::pow(c, gamma - k) / (s + 1.0) * beta_fn * libm::pow(lambda, gamma - k),
            branch: JBranch::Power,
            gamma,
            exponent: gamma - k,
        }
    } else {
        JValue {
            value: 1.0 / ((s + 1.0) * (gamma - k)),
            branch: JBranch::Constant,
            gamma,
            exponent: 0.0,
        }
    };
    Ok(out)
}

/// Constants entering a leading-order prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConstants {
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c: f64,
    /// `1/θ`, when the spectrum comes from a parametric family.
    pub scale: Option<f64>,
}

/// A series value by direct summation next to its leading-order prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEstimate {
    pub direct_sum: f64,
    /// `J(λ)/θ`. Exact as a leading term only for unperturbed spectra and
    /// coefficients; otherwise the constant is only bracketed.
    pub asymptotic: Option<f64>,
    /// Predicted power of λ; `None` inside the threshold guard band.
    pub exponent: Option<f64>,
    pub branch: Option<JBranch>,
    pub constants: SeriesConstants,
}

/// `A`, `−A′/2`, `B`, `B_1` at one λ with their predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominatingTerms {
    pub lambda: f64,
    pub regime: Regime,
    pub eta_a: f64,
    pub eta_b: f64,
    pub a: SeriesEstimate,
    /// `−A′/2 = F_s(λ; 3, 2s+1)`
    pub a_prime_half: SeriesEstimate,
    pub b: SeriesEstimate,
    pub b1: SeriesEstimate,
    /// Whether `p ≡ 1` and `p̃ ≡ 1`, so that `J/θ` carries the exact constant.
    pub unperturbed: bool,
}

impl DominatingTerms {
    /// `A′ = −2 F_s(λ; 3, 2s+1)`.
    pub fn a_prime(&self) -> f64 {
        -2.0 * self.a_prime_half.direct_sum
    }
}

/// `A = F_s(λ; 2, 2s+1)`.
pub fn series_a(spectrum: &Spectrum, s: f64, lambda: f64) -> Result<f64> {
    f_series(spectrum, s, 2.0, 2.0 * s + 1.0, lambda)
}

/// `−A′/2 = F_s(λ; 3, 2s+1)`.
pub fn series_a_prime_half(spectrum: &Spectrum, s: f64, lambda: f64) -> Result<f64> {
    f_series(spectrum, s, 3.0, 2.0 * s + 1.0, lambda)
}

fn coefficient_weights(spectrum: &Spectrum, truth: &TrueFunction) -> Result<Vec<f64>> {
    check_len("true function coefficients", spectrum.len(), truth.len())?;
    Ok(truth.coefficients().iter().map(|c| c * c).collect())
}

/// `B = Σ (λ_i^(s+1) + λ)^(−2) c_i²`.
pub fn series_b(spectrum: &Spectrum, truth: &TrueFunction, s: f64, lambda: f64) -> Result<f64> {
    let w = coefficient_weights(spectrum, truth)?;
    f_series_weighted(spectrum, &w, s, 2.0, 0.0, lambda)
}

/// `B_1 = Σ (λ_i^(s+1) + λ)^(−3) λ_i^(s+1) c_i²`.
pub fn series_b1(spectrum: &Spectrum, truth: &TrueFunction, s: f64, lambda: f64) -> Result<f64> {
    let w = coefficient_weights(spectrum, truth)?;
    f_series_weighted(spectrum, &w, s, 3.0, s + 1.0, lambda)
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    direct_sum: f64,
    s: f64,
    k: f64,
    alpha: f64,
    beta: f64,
    lambda: f64,
    scale: Option<f64>,
    suppressed: bool,
) -> SeriesEstimate {
    let gamma = (alpha - beta + 1.0) / (s + 1.0);
    let constants = SeriesConstants {
        k,
        alpha,
        beta,
        gamma,
        c: 1.0,
        scale,
    };
    let j = if suppressed || lambda >= 1.0 {
        None
    } else {
        j_closed_form(s, k, alpha, beta, lambda, 1.0).ok()
    };
    SeriesEstimate {
        direct_sum,
        asymptotic: j.and_then(|j| scale.map(|sc| sc * j.value)),
        exponent: if suppressed {
            None
        } else {
            Some(gamma - k).map(|e| if e < 0.0 { e } else { 0.0 })
        },
        branch: j.map(|j| j.branch),
        constants,
    }
}

/// Direct sums of `A, −A′/2, B, B_1` with their leading-order predictions.
///
/// Predictions for `B` and `B_1` are withheld inside the threshold guard
/// band; the direct sums are always returned.
pub fn dominating_terms(spectrum: &Spectrum, truth: &TrueFunction, s: f64, lambda: f64) -> Result<DominatingTerms> {
    if truth.null_norm_sq() > 0.0 {
        return Err(invalid("true_function", "null-space components must vanish"));
    }
    let beta = spectrum.beta()?.value();
    let r = truth.smoothness();
    let regime = classify_regime(s, r, beta);
    let scale = spectrum.family().theta().map(|t| 1.0 / t);
    // the data coefficients enter B through c_i² = p̃_i² λ_i^(2r)
    let alpha_b = 2.0 * r;
    let on_band = regime == Regime::Threshold;

    let a = series_a(spectrum, s, lambda)?;
    let ap = series_a_prime_half(spectrum, s, lambda)?;
    let b = series_b(spectrum, truth, s, lambda)?;
    let b1 = series_b1(spectrum, truth, s, lambda)?;

    let unperturbed =
        spectrum.perturbations().iter().all(|p| *p == 1.0) && truth.coef_perturbations().iter().all(|p| *p == 1.0);

    Ok(DominatingTerms {
        lambda,
        regime,
        eta_a: eta_a(s, beta),
        eta_b: eta_b(s, r, beta),
        a: estimate(a, s, 2.0, 2.0 * s + 1.0, beta, lambda, scale, false),
        a_prime_half: estimate(ap, s, 3.0, 2.0 * s + 1.0, beta, lambda, scale, false),
        b: estimate(b, s, 2.0, alpha_b, beta, lambda, scale, on_band),
        b1: estimate(b1, s, 3.0, s + 1.0 + alpha_b, beta, lambda, scale, on_band),
        unperturbed,
    })
}

/// Fitted versus predicted log-log slope of one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeCheck {
    pub series: &'static str,
    pub fitted: f64,
    pub predicted: f64,
    pub r_squared: f64,
}

impl SlopeCheck {
    pub fn deviation(&self) -> f64 {
        libm::fabs(self.fitted - self.predicted)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub regime: Regime,
    pub eta_a: f64,
    pub eta_b: f64,
    pub checks: Vec<SlopeCheck>,
    /// Largest relative change of any series at the smallest λ when the
    /// number of modes is halved; small values mean truncation is harmless.
    pub truncation_sensitivity: f64,
}

impl OrderReport {
    pub fn check(&self, series: &str) -> Option<&SlopeCheck> {
        self.checks.iter().find(|c| c.series == series)
    }
}

/// Fits the slope of `log(series)` against `log λ` for `A, −A′/2, B, B_1` and
/// compares it with the predicted exponents.
pub fn verify_dominating_order(
    spectrum: &Spectrum,
    truth: &TrueFunction,
    s: f64,
    lambda_grid: &[f64],
) -> Result<OrderReport> {
    if lambda_grid.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            have: lambda_grid.len(),
        });
    }
    if let Some((index, value)) = lambda_grid.iter().enumerate().find(|(_, l)| !(**l > 0.0 && **l < 1.0)) {
        return Err(invalid(
            "lambda_grid",
            alloc::format!("point {index} = {value} lies outside (0, 1)"),
        ));
    }
    let lo = lambda_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambda_grid.iter().copied().fold(0.0, f64::max);
    if hi / lo < 1e3 {
        return Err(invalid("lambda_grid", "must span at least three decades"));
    }
    let beta = spectrum.beta()?.value();
    let r = truth.smoothness();
    let regime = classify_regime(s, r, beta);
    if regime == Regime::Threshold {
        return Err(Error::ThresholdRegime {
            s,
            threshold: smoothing_threshold(r, beta),
        });
    }

    let rows = lambda_grid
        .iter()
        .map(|l| dominating_terms(spectrum, truth, s, *l))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = lambda_grid.iter().map(|l| libm::log(*l)).collect();
    let mut checks = Vec::with_capacity(4);
    type Pick = fn(&DominatingTerms) -> &SeriesEstimate;
    let picks: [(&'static str, Pick); 4] = [
        ("A", |d| &d.a),
        ("-A'/2", |d| &d.a_prime_half),
        ("B", |d| &d.b),
        ("B1", |d| &d.b1),
    ];
    for (name, pick) in picks {
        let y: Vec<f64> = rows.iter().map(|d| libm::log(pick(d).direct_sum)).collect();
        let fit = ols(&x, &y)?;
        let predicted = pick(&rows[0]).exponent.unwrap_or(f64::NAN);
        checks.push(SlopeCheck {
            series: name,
            fitted: fit.slope,
            predicted,
            r_squared: fit.r_squared,
        });
    }

    let truncation_sensitivity = if spectrum.len() >= 2 {
        let half = spectrum.len() / 2;
        let short = Spectrum::explicit(spectrum.eigenvalues()[..half].to_vec())?.with_beta(spectrum.beta()?);
        let short_truth = TrueFunction::from_coefficients(truth.coefficients()[..half].to_vec(), Vec::new(), r)?;
        let full = &rows[rows
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.lambda.total_cmp(&b.1.lambda))
            .map(|(i, _)| i)
            .unwrap_or(0)];
        let cut = dominating_terms(&short, &short_truth, s, full.lambda)?;
        [
            (full.a.direct_sum, cut.a.direct_sum),
            (full.a_prime_half.direct_sum, cut.a_prime_half.direct_sum),
            (full.b.direct_sum, cut.b.direct_sum),
            (full.b1.direct_sum, cut.b1.direct_sum),
        ]
        .iter()
        .map(|(f, c)| libm::fabs(f - c) / libm::fabs(*f))
        .fold(0.0, f64::max)
    } else {
        f64::NAN
    };

    Ok(OrderReport {
        regime,
        eta_a: eta_a(s, beta),
        eta_b: eta_b(s, r, beta),
        checks,
        truncation_sensitivity,
    })
}
