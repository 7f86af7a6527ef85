//! Choice of the regularization parameter λ: the oracle (which knows the
//! truth), the L-curve and generalized cross-validation (which see only data).

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::estimators::{expected_error, NoiseDraw, ObservationCoefficients, RealizedErrorProfile};
use crate::math::{compensated_sum, golden_section, logspace};
use crate::series::{series_a_prime_half, series_b1};
use crate::spectrum::{Spectrum, TrueFunction};

/// Relative tolerance of the golden-section refinement in `ln λ`.
pub const REFINE_REL_TOL: f64 = 1e-3;
pub const REFINE_MAX_ITER: usize = 60;

/// Log-spaced grid of λ values, ascending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    lo: f64,
    hi: f64,
    count: usize,
}

impl LambdaGrid {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && lo.is_finite()) {
            return Err(invalid("lambda_lo", alloc::format!("must be > 0, got {lo}")));
        }
        if !(hi.is_finite() && lo < hi) {
            return Err(invalid(
                "lambda_hi",
                alloc::format!("need lo < hi, got lo = {lo}, hi = {hi}"),
            ));
        }
        if count < 3 {
            return Err(invalid(
                "lambda_count",
                alloc::format!("need at least 3 points, got {count}"),
            ));
        }
        Ok(LambdaGrid { lo, hi, count })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn points(&self) -> Vec<f64> {
        logspace(self.lo, self.hi, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Oracle,
    LCurve,
    Gcv,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::LCurve => "lcurve",
            Method::Gcv => "gcv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Grid index of the selected (pre-refinement) point.
    pub grid_index: usize,
    /// The selection sits at, or for the L-curve next to, an end of the grid.
    pub at_boundary: bool,
    /// Signed curvature at each grid point (L-curve only; NaN where undefined).
    pub curvature: Vec<f64>,
    pub refinement_iterations: usize,
    /// Grid points where the criterion could not be evaluated.
    pub invalid_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub method: Method,
    pub lambda_star: f64,
    /// Criterion value at `lambda_star`.
    pub criterion_star: f64,
    pub grid: Vec<f64>,
    pub criterion_values: Vec<f64>,
    /// Y-space residual norm at each grid point (data-driven methods only).
    pub residual_norms: Vec<f64>,
    /// Solution norm at each grid point (data-driven methods only).
    pub solution_norms: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Index of the smallest finite value; ties go to the smaller λ.
fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        match best {
            Some(j) if values[j] <= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Grid minimization followed by golden-section refinement in `ln λ`
/// between the neighbours of the grid minimizer.
fn minimize_on_grid<F: FnMut(f64) -> f64>(
    method: Method,
    grid: &LambdaGrid,
    mut criterion: F,
) -> Result<SelectionResult> {
    let points = grid.points();
    let values: Vec<f64> = points.iter().map(|l| criterion(*l)).collect();
    let invalid_points = values.iter().filter(|v| !v.is_finite()).count();
    let i = argmin(&values)
        .ok_or_else(|| Error::SelectionUndefined("criterion is not finite anywhere on the grid".to_string()))?;
    let n = points.len();
    let at_boundary = i == 0 || i == n - 1;
    let (mut lambda_star, mut criterion_star, mut iterations) = (points[i], values[i], 0);
    if !at_boundary {
        let lo = libm::log(points[i - 1]);
        let hi = libm::log(points[i + 1]);
        let g = golden_section(
            |t| {
                let v = criterion(libm::exp(t));
                if v.is_finite() {
                    v
                } else {
                    f64::INFINITY
                }
            },
            lo,
            hi,
            REFINE_REL_TOL,
            REFINE_MAX_ITER,
        );
        iterations = g.iterations;
        if g.value < criterion_star {
            lambda_star = libm::exp(g.x);
            criterion_star = g.value;
        }
    }
    Ok(SelectionResult {
        method,
        lambda_star,
        criterion_star,
        grid: points,
        criterion_values: values,
        residual_norms: Vec::new(),
        solution_norms: Vec::new(),
        diagnostics: Diagnostics {
            grid_index: i,
            at_boundary,
            curvature: Vec::new(),
            refinement_iterations: iterations,
            invalid_points,
        },
    })
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid("sigma", alloc::format!("must be > 0, got {sigma}")))
    }
}

/// λ minimizing the expected error `e(λ; s)`.
pub fn oracle_lambda(
    spectrum: &Spectrum,
    truth: &TrueFunction,
    sigma: f64,
    s: f64,
    grid: &LambdaGrid,
) -> Result<SelectionResult> {
    check_sigma(sigma)?;
    expected_error(spectrum, truth, sigma, s, grid.lo())?;
    minimize_on_grid(Method::Oracle, grid, |l| {
        expected_error(spectrum, truth, sigma, s, l).unwrap_or(f64::NAN)
    })
}

/// λ minimizing the realized error of one noise draw.
pub fn oracle_lambda_realized(
    spectrum: &Spectrum,
    truth: &TrueFunction,
    noise: &NoiseDraw,
    s: f64,
    grid: &LambdaGrid,
) -> Result<SelectionResult> {
    let profile = RealizedErrorProfile::new(spectrum, truth, noise, s)?;
    minimize_on_grid(Method::Oracle, grid, |l| profile.at(l).unwrap_or(f64::NAN))
}

/// `λ − σ² (−A′/2) / B_1`, zero at interior critical points of `e(·; s)`.
pub fn critical_point_residual(
    spectrum: &Spectrum,
    truth: &TrueFunction,
    sigma: f64,
    s: f64,
    lambda: f64,
) -> Result<f64> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", alloc::format!("must be >= 0, got {sigma}")));
    }
    if truth.null_norm_sq() > 0.0 {
        return Err(invalid("true_function", "null-space components must vanish"));
    }
    if spectrum.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let b1 = series_b1(spectrum, truth, s, lambda)?;
    if b1 == 0.0 {
        return Err(invalid("true_function", "B_1 vanishes"));
    }
    if sigma == 0.0 {
        return Ok(lambda);
    }
    let ap = series_a_prime_half(spectrum, s, lambda)?;
    Ok(lambda - sigma * sigma * ap / b1)
}

/// Axis used for the solution norm of the L-curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SolutionNorm {
    /// `‖φ̂‖_{H_G^s}`, the penalty norm.
    #[default]
    Penalty,
    /// `‖φ̂‖_{L²_ρ}`.
    L2,
}

/// Residual norm² `Σ (λ_i â_i − b_i)²/λ_i` and solution norm² at one λ,
/// given `ls_i = λ_i^s`.
fn residual_and_norm(lams: &[f64], pow_s: &[f64], b: &[f64], lambda: f64, norm: SolutionNorm) -> (f64, f64) {
    let mut res = Vec::with_capacity(lams.len());
    let mut sol = Vec::with_capacity(lams.len());
    for ((lam, ls), bi) in lams.iter().zip(pow_s).zip(b) {
        let ls = *ls;
        let den = ls * lam + lambda;
        // λ_i â_i − b_i = −λ b_i / (λ_i^(s+1) + λ)
        let r = lambda * bi / den;
        res.push(r * r / lam);
        let a = ls * bi / den;
        sol.push(match norm {
            SolutionNorm::Penalty => a * a / ls,
            SolutionNorm::L2 => a * a,
        });
    }
    (compensated_sum(res), compensated_sum(sol))
}

/// Norms of the residual and of the solution along the grid, as plotted by
/// the L-curve.
pub fn lcurve_trace(
    spectrum: &Spectrum,
    obs: &ObservationCoefficients,
    s: f64,
    grid: &LambdaGrid,
    norm: SolutionNorm,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("observation coefficients", spectrum.len(), obs.b.len())?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid("s", alloc::format!("must be >= 0, got {s}")));
    }
    let lams = spectrum.eigenvalues();
    let pow_s: Vec<f64> = lams.iter().map(|l| libm::pow(*l, s)).collect();
    let (res, sol): (Vec<f64>, Vec<f64>) = grid
        .points()
        .iter()
        .map(|l| {
            let (r, n) = residual_and_norm(lams, &pow_s, &obs.b, *l, norm);
            (libm::sqrt(r), libm::sqrt(n))
        })
        .unzip();
    Ok((res, sol))
}

/// Signed curvature of the circle through three points; positive for a
/// counter-clockwise turn.
fn menger_curvature(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
    let (ax, ay) = (q.0 - p.0, q.1 - p.1);
    let (bx, by) = (r.0 - q.0, r.1 - q.1);
    let (cx, cy) = (r.0 - p.0, r.1 - p.1);
    let la = libm::hypot(ax, ay);
    let lb = libm::hypot(bx, by);
    let lc = libm::hypot(cx, cy);
    let denom = la * lb * lc;
    if denom == 0.0 || !denom.is_finite() {
        return f64::NAN;
    }
    2.0 * (ax * by - ay * bx) / denom
}

/// λ at the point of maximal signed curvature of the curve
/// `(ln ‖residual‖, ln ‖φ̂‖)`, points taken in order of increasing λ.
pub fn lcurve_lambda(
    spectrum: &Spectrum,
    obs: &ObservationCoefficients,
    s: f64,
    grid: &LambdaGrid,
) -> Result<SelectionResult> {
    lcurve_lambda_with(spectrum, obs, s, grid, SolutionNorm::Penalty)
}

pub fn lcurve_lambda_with(
    spectrum: &Spectrum,
    obs: &ObservationCoefficients,
    s: f64,
    grid: &LambdaGrid,
    norm: SolutionNorm,
) -> Result<SelectionResult> {
    let (res, sol) = lcurve_trace(spectrum, obs, s, grid, norm)?;
    let points = grid.points();
    let usable: Vec<usize> = (0..points.len())
        .filter(|&i| res[i] > 0.0 && sol[i] > 0.0 && res[i].is_finite() && sol[i].is_finite())
        .collect();
    if usable.len() < 3 {
        return Err(Error::DegenerateCurve(alloc::format!(
            "only {} grid points have positive finite residual and solution norms",
            usable.len()
        )));
    }
    let rho: Vec<f64> = res.iter().map(|v| libm::log(*v)).collect();
    let eta: Vec<f64> = sol.iter().map(|v| libm::log(*v)).collect();
    let span = |v: &[f64]| {
        let (lo, hi) = usable.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(v[i]), hi.max(v[i]))
        });
        hi - lo
    };
    if span(&rho) == 0.0 || span(&eta) == 0.0 {
        return Err(Error::DegenerateCurve(
            "residual or solution norm is constant over the grid".to_string(),
        ));
    }

    let mut curvature = alloc::vec![f64::NAN; points.len()];
    for w in usable.windows(3) {
        let (i, j, k) = (w[0], w[1], w[2]);
        curvature[j] = menger_curvature((rho[i], eta[i]), (rho[j], eta[j]), (rho[k], eta[k]));
    }
    let mut best: Option<usize> = None;
    for (j, c) in curvature.iter().enumerate() {
        if c.is_finite() && best.map_or(true, |b| *c > curvature[b]) {
            best = Some(j);
        }
    }
    let j = best.ok_or_else(|| Error::DegenerateCurve("curvature undefined at every point".to_string()))?;
    let at_boundary = j == usable[1] || j == usable[usable.len() - 2];
    let invalid_points = points.len() - usable.len();
    Ok(SelectionResult {
        method: Method::LCurve,
        lambda_star: points[j],
        criterion_star: curvature[j],
        criterion_values: curvature.clone(),
        grid: points,
        residual_norms: res,
        solution_norms: sol,
        diagnostics: Diagnostics {
            grid_index: j,
            at_boundary,
            curvature,
            refinement_iterations: 0,
            invalid_points,
        },
    })
}

/// `G(λ) = Σ (1 − f_i)² b_i²/λ_i / (Σ (1 − f_i))²` with filter factors
/// `f_i = λ_i^(s+1)/(λ_i^(s+1) + λ)`. NaN when the denominator underflows.
pub fn gcv_function(lams: &[f64], b: &[f64], s: f64, lambda: f64) -> f64 {
    let pow_s1: Vec<f64> = lams.iter().map(|l| libm::pow(*l, s + 1.0)).collect();
    gcv_with_powers(lams, &pow_s1, b, lambda)
}

fn gcv_with_powers(lams: &[f64], pow_s1: &[f64], b: &[f64], lambda: f64) -> f64 {
    let mut num = Vec::with_capacity(lams.len());
    let mut den = Vec::with_capacity(lams.len());
    for ((lam, q), bi) in lams.iter().zip(pow_s1).zip(b) {
        let one_minus_f = lambda / (q + lambda);
        num.push(one_minus_f * one_minus_f * bi * bi / lam);
        den.push(one_minus_f);
    }
    let d = compensated_sum(den);
    if !(d > f64::MIN_POSITIVE) {
        return f64::NAN;
    }
    compensated_sum(num) / (d * d)
}

/// λ minimizing the GCV function.
pub fn gcv_lambda(
    spectrum: &Spectrum,
    obs: &ObservationCoefficients,
    s: f64,
    grid: &LambdaGrid,
) -> Result<SelectionResult> {
    check_len("observation coefficients", spectrum.len(), obs.b.len())?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid("s", alloc::format!("must be >= 0, got {s}")));
    }
    if spectrum.len() < 2 {
        return Err(Error::SelectionUndefined(
            "GCV is constant in λ for a single mode".to_string(),
        ));
    }
    let lams = spectrum.eigenvalues();
    let pow_s1: Vec<f64> = lams.iter().map(|l| libm::pow(*l, s + 1.0)).collect();
    let mut out = minimize_on_grid(Method::Gcv, grid, |l| gcv_with_powers(lams, &pow_s1, &obs.b, l))?;
    let (res, sol) = lcurve_trace(spectrum, obs, s, grid, SolutionNorm::Penalty)?;
    out.residual_norms = res;
    out.solution_norms = sol;
    Ok(out)
}
