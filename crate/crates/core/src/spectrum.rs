//! Synthetic spectra of the normal operator and true functions with prescribed
//! smoothness relative to that spectrum.
//!
//! Eigenvalues follow `λ_i = p_i⁻¹ f(i)` with a decay profile `f` that is
//! either exponential, `e^(−θ(i−1))`, or polynomial, `i^(−θ)`, and bounded
//! multiplicative perturbations `a ≤ p_i⁻¹ ≤ b`. A true function is
//! `r`-smooth when its coefficients in the eigenbasis satisfy
//! `|c_i| = p̃_i λ_i^r`.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Decay profile of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFamily {
    /// `f(x) = e^(−θ(x−1))`, θ > 0.
    Exponential { theta: f64 },
    /// `f(x) = x^(−θ)`, θ > 1.
    Polynomial { theta: f64 },
    /// Eigenvalues supplied directly (e.g. from a discretized operator).
    Explicit,
}

impl DecayFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DecayFamily::Exponential { theta } if !(theta > 0.0 && theta.is_finite()) => Err(invalid(
                "theta",
                alloc::format!("exponential decay needs theta > 0, got {theta}"),
            )),
            DecayFamily::Polynomial { theta } if !(theta > 1.0 && theta.is_finite()) => Err(invalid(
                "theta",
                alloc::format!("polynomial decay needs theta > 1, got {theta}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match *self {
            DecayFamily::Exponential { theta } | DecayFamily::Polynomial { theta } => Some(theta),
            DecayFamily::Explicit => None,
        }
    }

    /// Unperturbed profile `f(i)` at the 1-based index `i`.
    pub fn profile(&self, i: usize) -> Option<f64> {
        let x = i as f64;
        match *self {
            DecayFamily::Exponential { theta } => Some(libm::exp(-theta * (x - 1.0))),
            DecayFamily::Polynomial { theta } => Some(libm::pow(x, -theta)),
            DecayFamily::Explicit => None,
        }
    }

    /// The unifying decay constant β: 1 for exponential, θ⁻¹ + 1 for polynomial.
    pub fn beta(&self) -> Result<BetaConstant> {
        match *self {
            DecayFamily::Exponential { .. } => Ok(BetaConstant(1.0)),
            DecayFamily::Polynomial { theta } => Ok(BetaConstant(1.0 / theta + 1.0)),
            DecayFamily::Explicit => Err(Error::BetaUndefined),
        }
    }

    /// Smallest ratio `f(i)/f(i+1)` over `1 ≤ i < n`.
    fn min_step_ratio(&self, n: usize) -> Option<f64> {
        match *self {
            DecayFamily::Exponential { theta } => Some(libm::exp(theta)),
            DecayFamily::Polynomial { theta } if n >= 2 => Some(libm::pow(n as f64 / (n as f64 - 1.0), theta)),
            _ => None,
        }
    }
}

/// β ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BetaConstant(f64);

impl BetaConstant {
    pub fn new(value: f64) -> Result<Self> {
        if value >= 1.0 && value.is_finite() {
            Ok(BetaConstant(value))
        } else {
            Err(invalid("beta", alloc::format!("beta must be >= 1, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Closed interval `[lo, hi]` with `0 < lo ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationBounds {
    pub lo: f64,
    pub hi: f64,
}

impl PerturbationBounds {
    pub const UNIT: PerturbationBounds = PerturbationBounds { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) {
            return Err(invalid(
                "perturbation_bounds",
                alloc::format!("need 0 < a, got a = {lo}"),
            ));
        }
        if lo > hi {
            return Err(invalid(
                "perturbation_bounds",
                alloc::format!("need a <= b, got a = {lo}, b = {hi}"),
            ));
        }
        Ok(PerturbationBounds { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        let slack = 1e-12 * self.hi;
        v >= self.lo - slack && v <= self.hi + slack
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * u
        }
    }
}

/// Descending positive eigenvalues of the normal operator, truncated at `N` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    family: DecayFamily,
    bounds: PerturbationBounds,
    /// `p_i⁻¹` for each mode.
    perturbations: Vec<f64>,
    seed: u64,
    beta_hint: Option<BetaConstant>,
}

impl Spectrum {
    /// Wraps an explicit eigenvalue sequence (descending, strictly positive).
    pub fn explicit(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(invalid("eigenvalues", "spectrum needs at least one mode"));
        }
        check_descending_positive(&eigenvalues)?;
        let n = eigenvalues.len();
        Ok(Spectrum {
            eigenvalues,
            family: DecayFamily::Explicit,
            bounds: PerturbationBounds::UNIT,
            perturbations: alloc::vec![1.0; n],
            seed: 0,
            beta_hint: None,
        })
    }

    /// Attaches β to a spectrum whose family does not determine it.
    pub fn with_beta(mut self, beta: BetaConstant) -> Self {
        self.beta_hint = Some(beta);
        self
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn family(&self) -> DecayFamily {
        self.family
    }

    pub fn bounds(&self) -> PerturbationBounds {
        self.bounds
    }

    pub fn perturbations(&self) -> &[f64] {
        &self.perturbations
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// β from the decay family, falling back to an attached value for explicit spectra.
    pub fn beta(&self) -> Result<BetaConstant> {
        match self.family.beta() {
            Ok(b) => Ok(b),
            Err(e) => self.beta_hint.ok_or(e),
        }
    }
}

fn check_descending_positive(values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(
                "eigenvalues",
                alloc::format!("eigenvalue {} must be positive and finite, got {v}", i + 1),
            ));
        }
        if i > 0 && v > values[i - 1] {
            return Err(invalid(
                "eigenvalues",
                alloc::format!("eigenvalues must be non-increasing (mode {} > mode {})", i + 1, i),
            ));
        }
    }
    Ok(())
}

/// Builds `λ_i = p_i⁻¹ f(i)` for `i = 1..=n` with `p_i⁻¹` uniform on `bounds`.
///
/// Bounds that could reorder two neighbouring eigenvalues (`b/a` larger than
/// the smallest step ratio `f(i)/f(i+1)`) are rejected rather than sorted, since
/// every downstream formula relies on the pairing of index and eigenvalue.
pub fn build_spectrum(family: DecayFamily, n: usize, bounds: PerturbationBounds, seed: u64) -> Result<Spectrum> {
    family.validate()?;
    if matches!(family, DecayFamily::Explicit) {
        return Err(invalid("family", "use Spectrum::explicit for explicit eigenvalues"));
    }
    if n == 0 {
        return Err(invalid("n", "need at least one mode"));
    }
    let bounds = PerturbationBounds::new(bounds.lo, bounds.hi)?;
    if let Some(step) = family.min_step_ratio(n) {
        if bounds.hi / bounds.lo > step * (1.0 + 1e-12) {
            return Err(invalid(
                "perturbation_bounds",
                alloc::format!(
                    "b/a = {} exceeds the smallest decay step {step}; eigenvalues could reorder",
                    bounds.hi / bounds.lo
                ),
            ));
        }
    }
    let mut stream = rng::stream(rng::derive_seed(seed, &[rng::label("spectrum")]));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut perturbations = Vec::with_capacity(n);
    for i in 1..=n {
        let p_inv = bounds.sample(&mut stream);
        let f = family.profile(i).unwrap_or(0.0);
        perturbations.push(p_inv);
        eigenvalues.push(p_inv * f);
    }
    if eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return Err(invalid("n", "eigenvalues underflow to zero; reduce n or theta"));
    }
    check_descending_positive(&eigenvalues)?;
    Ok(Spectrum {
        eigenvalues,
        family,
        bounds,
        perturbations,
        seed,
        beta_hint: None,
    })
}

/// β for spectra with a known decay family.
pub fn beta_of(spectrum: &Spectrum) -> Result<BetaConstant> {
    spectrum.family().beta()
}

/// How the signs (and, for the banded law, magnitudes) of the coefficients are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientLaw {
    /// Independent uniform signs; `p̃_i⁻¹` uniform on the perturbation bounds.
    Rademacher,
    /// Given signs; `p̃_i⁻¹` uniform on the perturbation bounds.
    FixedSigns(Vec<f64>),
    /// `c_i = v_i λ_i^r` with `|v_i|` uniform on `[lo, hi]` and a uniform sign.
    BandedMagnitude { lo: f64, hi: f64 },
}

/// Coefficients of the true function in the eigenbasis, plus its null-space part.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueFunction {
    coefficients: Vec<f64>,
    null_components: Vec<f64>,
    smoothness: f64,
    /// `p̃_i`, so that `|c_i| = p̃_i λ_i^r`.
    coef_perturbations: Vec<f64>,
    coef_bounds: PerturbationBounds,
    signs: Vec<f64>,
    seed: u64,
}

impl TrueFunction {
    /// A true function given directly by its coefficients.
    pub fn from_coefficients(coefficients: Vec<f64>, null_components: Vec<f64>, smoothness: f64) -> Result<Self> {
        for (name, v) in [("coefficients", &coefficients), ("null_components", &null_components)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid(name, "values must be finite"));
            }
        }
        let n = coefficients.len();
        let signs = coefficients.iter().map(|c| if *c < 0.0 { -1.0 } else { 1.0 }).collect();
        Ok(TrueFunction {
            coefficients,
            null_components,
            smoothness,
            coef_perturbations: alloc::vec![1.0; n],
            coef_bounds: PerturbationBounds::UNIT,
            signs,
            seed: 0,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn null_components(&self) -> &[f64] {
        &self.null_components
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn coef_perturbations(&self) -> &[f64] {
        &self.coef_perturbations
    }

    pub fn coef_bounds(&self) -> PerturbationBounds {
        self.coef_bounds
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `Σ d_j²`, the part no estimator can recover.
    pub fn null_norm_sq(&self) -> f64 {
        crate::math::compensated_sum(self.null_components.iter().map(|d| d * d))
    }

    /// `Σ c_i² + Σ d_j²`.
    pub fn norm_sq(&self) -> f64 {
        crate::math::compensated_sum(self.coefficients.iter().map(|c| c * c)) + self.null_norm_sq()
    }
}

/// Builds `c_i = v_i p̃_i λ_i^r` against the given spectrum.
///
/// `r` must exceed `(β − 1)/2`; for explicit spectra without an attached β
/// only `r > 0` is enforced.
pub fn build_true_function(
    spectrum: &Spectrum,
    r: f64,
    bounds: PerturbationBounds,
    seed: u64,
    null_components: Vec<f64>,
    law: CoefficientLaw,
) -> Result<TrueFunction> {
    let floor = match spectrum.beta() {
        Ok(beta) => (beta.value() - 1.0) / 2.0,
        Err(_) => 0.0,
    };
    if !(r > floor && r.is_finite()) {
        return Err(invalid(
            "r",
            alloc::format!("smoothness must satisfy r > (beta - 1)/2 = {floor}, got {r}"),
        ));
    }
    if null_components.iter().any(|d| !d.is_finite()) {
        return Err(invalid("null_components", "values must be finite"));
    }
    let bounds = PerturbationBounds::new(bounds.lo, bounds.hi)?;
    let n = spectrum.len();
    let mut mags = rng::stream(rng::derive_seed(seed, &[rng::label("magnitudes")]));
    let mut sign_stream = rng::stream(rng::derive_seed(seed, &[rng::label("signs")]));

    let (coef_perturbations, signs, coef_bounds): (Vec<f64>, Vec<f64>, PerturbationBounds) = match &law {
        CoefficientLaw::Rademacher => {
            let p = (0..n).map(|_| 1.0 / bounds.sample(&mut mags)).collect();
            let s = (0..n)
                .map(|_| if sign_stream.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            (p, s, bounds)
        }
        CoefficientLaw::FixedSigns(signs) => {
            crate::error::check_len("signs", n, signs.len())?;
            if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
                return Err(invalid("signs", "signs must be +1 or -1"));
            }
            let p = (0..n).map(|_| 1.0 / bounds.sample(&mut mags)).collect();
            (p, signs.clone(), bounds)
        }
        &CoefficientLaw::BandedMagnitude { lo, hi } => {
            let band = PerturbationBounds::new(lo, hi)?;
            let p = (0..n).map(|_| band.sample(&mut mags)).collect();
            let s = (0..n)
                .map(|_| if sign_stream.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            (
                p,
                s,
                PerturbationBounds {
                    lo: 1.0 / hi,
                    hi: 1.0 / lo,
                },
            )
        }
    };

    let coefficients: Vec<f64> = spectrum
        .eigenvalues()
        .iter()
        .zip(&coef_perturbations)
        .zip(&signs)
        .map(|((lam, p), v)| v * p * libm::pow(*lam, r))
        .collect();
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(invalid("r", "coefficients overflow"));
    }
    Ok(TrueFunction {
        coefficients,
        null_components,
        smoothness: r,
        coef_perturbations,
        coef_bounds,
        signs,
        seed,
    })
}
