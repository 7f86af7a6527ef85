//! Small numerical helpers shared across modules: compensated summation,
//! log-spaced grids, ordinary least squares and a golden-section minimizer.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for t in terms {
        let next = sum + t;
        if libm::fabs(sum) >= libm::fabs(t) {
            carry += (sum - next) + t;
        } else {
            carry += (t - next) + sum;
        }
        sum = next;
    }
    sum + carry
}

/// Sums the terms after sorting them by decreasing magnitude.
pub fn sum_descending(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| libm::fabs(*b).total_cmp(&libm::fabs(*a)));
    compensated_sum(terms)
}

/// `count` points, log-uniform between `lo` and `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (a, b) = (libm::log(lo), libm::log(hi));
            let step = (b - a) / (count - 1) as f64;
            (0..count)
                .map(|i| match i {
                    0 => lo,
                    _ if i == count - 1 => hi,
                    _ => libm::exp(a + step * i as f64),
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    crate::error::check_len("regression ordinate", x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            have: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxx = compensated_sum(x.iter().map(|v| (v - mx) * (v - mx)));
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    if sxx <= 0.0 {
        return Err(crate::error::invalid("x", "regressor has zero variance"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot = compensated_sum(y.iter().map(|v| (v - my) * (v - my)));
    let ss_res = compensated_sum(
        x.iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a) * (b - intercept - slope * a)),
    );
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of `f` on `[lo, hi]`.
///
/// Stops once the bracket width drops below `rel_tol * max(1, |midpoint|)`
/// or after `max_iter` iterations.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64, max_iter: usize) -> GoldenResult {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while iterations < max_iter {
        let mid = 0.5 * (a + b);
        if b - a <= rel_tol * libm::fmax(1.0, libm::fabs(mid)) {
            break;
        }
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        GoldenResult {
            x: c,
            value: fc,
            iterations,
        }
    } else {
        GoldenResult {
            x: d,
            value: fd,
            iterations,
        }
    }
}

/// Median of a non-empty slice (mean of the two central values for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
