//! First-kind Fredholm testbed on `[0, 1]` whose kernel is the Green's function
//! of `u'' + 4u = f`, `u(0) = u(1) = 0`.
//!
//! The normal operator `G̅(x, z) = ∫ K(x, w) K(w, z) dw` is discretized with the
//! composite midpoint rule on `M` evenly spaced nodes (uniform weights `1/M`)
//! and diagonalized in the weighted inner product `⟨u, v⟩_w = Σ u_j v_j w_j`
//! through the symmetric matrix `W^{1/2} G̅ W^{1/2}`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_len, invalid, Error, Result};
use crate::spectrum::{BetaConstant, Spectrum};

/// Polynomial decay θ = 4 of the continuous spectrum gives β = 5/4.
pub const FREDHOLM_BETA: f64 = 1.25;

/// Default relative rank cutoff.
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-13;

/// Green's function kernel `K(x, y)`; symmetric in its arguments.
pub fn greens_kernel(x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(invalid(
            "x, y",
            alloc::format!("kernel arguments must lie in [0, 1], got ({x}, {y})"),
        ));
    }
    Ok(kernel_unchecked(x, y))
}

fn kernel_unchecked(x: f64, y: f64) -> f64 {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    -libm::sin(2.0 * (1.0 - hi)) * libm::sin(2.0 * lo) / (2.0 * libm::sin(2.0))
}

/// Quadrature rule attached to a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Nodes `(j + 1/2)/M`, weights `1/M`.
    Midpoint,
}

impl QuadratureRule {
    pub fn name(&self) -> &'static str {
        match self {
            QuadratureRule::Midpoint => "midpoint",
        }
    }
}

/// Evenly spaced nodes in `[0, 1]` with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    points: Vec<f64>,
    weights: Vec<f64>,
    rule: QuadratureRule,
}

impl Mesh {
    pub fn midpoint(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid("M", alloc::format!("mesh needs at least 2 points, got {m}")));
        }
        let h = 1.0 / m as f64;
        Ok(Mesh {
            points: (0..m).map(|j| (j as f64 + 0.5) * h).collect(),
            weights: alloc::vec![h; m],
            rule: QuadratureRule::Midpoint,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ_j w_j f_j g_j`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        check_len("grid function", self.len(), f.len())?;
        check_len("grid function", self.len(), g.len())?;
        Ok(crate::math::compensated_sum(
            f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| a * b * w),
        ))
    }
}

/// Discretized Fredholm problem with its numerical eigensystem.
#[derive(Debug, Clone)]
pub struct FredholmProblem {
    mesh: Mesh,
    kernel_matrix: DMatrix<f64>,
    normal_matrix: DMatrix<f64>,
    /// Every eigenvalue of the weighted normal operator, descending.
    all_eigenvalues: Vec<f64>,
    /// Retained eigenvalues (≥ τ·λ_max), descending.
    eigenvalues: Vec<f64>,
    /// Column `i` holds ψ_i on the mesh, orthonormal in the weighted inner product.
    eigenvectors: DMatrix<f64>,
    rank_threshold: f64,
    max_asymmetry: f64,
}

impl FredholmProblem {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        &self.kernel_matrix
    }

    pub fn normal_matrix(&self) -> &DMatrix<f64> {
        &self.normal_matrix
    }

    pub fn all_eigenvalues(&self) -> &[f64] {
        &self.all_eigenvalues
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// ψ_i sampled on the mesh (0-based mode index).
    pub fn eigenfunction(&self, i: usize) -> &[f64] {
        let m = self.mesh.len();
        &self.eigenvectors.as_slice()[i * m..(i + 1) * m]
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn rank_threshold(&self) -> f64 {
        self.rank_threshold
    }

    /// `max |G̅(x,z) − G̅(z,x)|` of the assembled matrix, before any symmetrization.
    pub fn max_asymmetry(&self) -> f64 {
        self.max_asymmetry
    }

    /// Retained spectrum as an explicit family, tagged with β = 5/4.
    pub fn spectrum(&self) -> Spectrum {
        Spectrum::explicit(self.eigenvalues.clone())
            .expect("retained eigenvalues are positive and descending")
            .with_beta(BetaConstant::new(FREDHOLM_BETA).expect("valid beta"))
    }

    /// `⟨f, ψ_i⟩_w` for every retained mode.
    pub fn project_to_spectral(&self, grid_function: &[f64]) -> Result<Vec<f64>> {
        check_len("grid function", self.mesh.len(), grid_function.len())?;
        (0..self.rank())
            .map(|i| self.mesh.inner(grid_function, self.eigenfunction(i)))
            .collect()
    }

    /// `Σ_i c_i ψ_i` on the mesh.
    pub fn reconstruct(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        check_len("spectral coefficients", self.rank(), coefficients.len())?;
        let m = self.mesh.len();
        let mut out = alloc::vec![0.0; m];
        for (i, c) in coefficients.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for (o, psi) in out.iter_mut().zip(self.eigenfunction(i)) {
                *o += c * psi;
            }
        }
        Ok(out)
    }

    /// `max_{i,k} |⟨ψ_i, ψ_k⟩_w − δ_ik|` over the retained modes.
    pub fn orthonormality_defect(&self) -> f64 {
        let w = self.mesh.weights();
        let r = self.rank();
        let mut worst: f64 = 0.0;
        for i in 0..r {
            let pi = self.eigenfunction(i);
            for k in i..r {
                let pk = self.eigenfunction(k);
                let dot: f64 = pi.iter().zip(pk).zip(w).map(|((a, b), w)| a * b * w).sum();
                let target = if i == k { 1.0 } else { 0.0 };
                worst = worst.max(libm::fabs(dot - target));
            }
        }
        worst
    }

    /// Smallest eigenvalue before the cutoff, relative to the largest.
    pub fn min_relative_eigenvalue(&self) -> f64 {
        let max = self.all_eigenvalues[0];
        self.all_eigenvalues.last().copied().unwrap_or(0.0) / max
    }
}

/// Discretizes the problem on `m` midpoint nodes and diagonalizes the normal
/// operator, keeping modes with `λ ≥ τ·λ_max`.
pub fn build_problem(m: usize, rank_threshold: f64) -> Result<FredholmProblem> {
    if !(rank_threshold > 0.0 && rank_threshold < 1.0) {
        return Err(invalid(
            "tau",
            alloc::format!("rank threshold must lie in (0, 1), got {rank_threshold}"),
        ));
    }
    let mesh = Mesh::midpoint(m)?;
    let x = mesh.points();
    let w = mesh.weights();

    let kernel_matrix = DMatrix::from_fn(m, m, |i, j| kernel_unchecked(x[i], x[j]));
    // G̅_ij = Σ_k K_ik w_k K_kj
    let mut weighted = kernel_matrix.clone();
    for (k, mut row) in weighted.row_iter_mut().enumerate() {
        row *= w[k];
    }
    let normal_matrix = &kernel_matrix * &weighted;

    let mut max_asymmetry: f64 = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            max_asymmetry = max_asymmetry.max(libm::fabs(normal_matrix[(i, j)] - normal_matrix[(j, i)]));
        }
    }

    let sqrt_w: Vec<f64> = w.iter().map(|v| libm::sqrt(*v)).collect();
    let sym = DMatrix::from_fn(m, m, |i, j| {
        sqrt_w[i] * 0.5 * (normal_matrix[(i, j)] + normal_matrix[(j, i)]) * sqrt_w[j]
    });
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver(alloc::string::String::from("symmetric QR did not converge")))?;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let all_eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lambda_max = all_eigenvalues[0];
    if !(lambda_max > 0.0) {
        return Err(Error::EmptySpectrum);
    }
    let cutoff = rank_threshold * lambda_max;
    let rank = all_eigenvalues.iter().take_while(|&&v| v >= cutoff).count();
    if rank == 0 {
        return Err(Error::EmptySpectrum);
    }

    let mut eigenvectors = DMatrix::zeros(m, rank);
    for (col, &src) in order.iter().take(rank).enumerate() {
        let u = eig.eigenvectors.column(src);
        // Fix the sign so the first clearly nonzero entry is positive.
        let scale = u.amax();
        let lead = u
            .iter()
            .find(|v| libm::fabs(**v) > 1e-8 * scale)
            .copied()
            .unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for j in 0..m {
            eigenvectors[(j, col)] = sign * u[j] / sqrt_w[j];
        }
    }

    Ok(FredholmProblem {
        mesh,
        kernel_matrix,
        normal_matrix,
        eigenvalues: all_eigenvalues[..rank].to_vec(),
        all_eigenvalues,
        eigenvectors,
        rank_threshold,
        max_asymmetry,
    })
}

/// Closed-form eigensystem of the continuous problem.
///
/// `eigenvalue` returns the quoted form `2(4 − n²π²)⁻²`. The operator defined
/// by the kernel above, with Lebesgue ρ on `[0, 1]`, has eigenvalues
/// `(4 − n²π²)⁻²` (see [`AnalyticEigensystem::operator_eigenvalue`]), exactly
/// half the quoted values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalyticEigensystem {
    n: usize,
}

pub fn analytic_eigensystem(n: usize) -> Result<AnalyticEigensystem> {
    if n == 0 {
        return Err(invalid("N", "need at least one mode"));
    }
    Ok(AnalyticEigensystem { n })
}

impl AnalyticEigensystem {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `2(4 − n²π²)⁻²` for the 1-based mode `n`.
    pub fn eigenvalue(&self, n: usize) -> f64 {
        2.0 * self.operator_eigenvalue(n)
    }

    /// `(4 − n²π²)⁻²`, the eigenvalue of the composed Green's operator `L*L`.
    pub fn operator_eigenvalue(&self, n: usize) -> f64 {
        let nf = n as f64;
        let d = 4.0 - nf * nf * PI * PI;
        1.0 / (d * d)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.n).map(|n| self.eigenvalue(n)).collect()
    }

    /// `√2 sin(nπx)`, unit norm in `L²([0, 1])`.
    pub fn eigenfunction(&self, n: usize, x: f64) -> f64 {
        core::f64::consts::SQRT_2 * libm::sin(n as f64 * PI * x)
    }
}
