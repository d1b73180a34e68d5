//! Spectrum of the change of basis between two orthonormal bases.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::gram::{cholesky_factor, Coefficients, GramMatrix, Normalization, SectionBasis};
use crate::error::{Error, Result};
use crate::potential::{RadialPotential, DEFAULT_X_MAX};

/// Largest condition number accepted for a diagonally equilibrated Gram matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Exponents `λ_j` of `σ` with a basis that is orthonormal for `h₀` and
/// diagonal for `h₁`.
///
/// Rows of the basis satisfy `x_i* G⁰ x_j = δ_ij` and
/// `x_i* G¹ x_j = e^{-2λ_i} δ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub k: usize,
    /// Sorted descending.
    pub lambdas: Vec<f64>,
    pub basis: SectionBasis,
}

impl SpectralPair {
    /// `(‖XG⁰X* - I‖_∞, ‖XG¹X* - diag(e^{-2λ})‖_∞)`.
    pub fn diagonalization_residuals(&self, g0: &GramMatrix, g1: &GramMatrix) -> (f64, f64) {
        if let (
            Coefficients::Monomial { degree, log_scale },
            GramMatrix::Diagonal { log_diag: d0, .. },
            GramMatrix::Diagonal { log_diag: d1, .. },
        ) = (&self.basis.coeffs, g0, g1)
        {
            let mut r0 = 0.0f64;
            let mut r1 = 0.0f64;
            for ((&d, &s), &lam) in degree.iter().zip(log_scale).zip(&self.lambdas) {
                r0 = r0.max(((2.0 * s + d0[d]).exp() - 1.0).abs());
                r1 = r1.max(((2.0 * s + d1[d]).exp() - (-2.0 * lam).exp()).abs());
            }
            return (r0, r1);
        }
        let x = self.basis.to_dense();
        let residual = |g: &GramMatrix, target: &dyn Fn(usize) -> f64| {
            let m = &x * g.to_dense() * x.adjoint();
            let mut worst = 0.0f64;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let want = if i == j { target(i) } else { 0.0 };
                    worst = worst.max((m[(i, j)] - Complex64::new(want, 0.0)).norm());
                }
            }
            worst
        };
        (
            residual(g0, &|_| 1.0),
            residual(g1, &|i| (-2.0 * self.lambdas[i]).exp()),
        )
    }

    pub fn max_abs_lambda(&self) -> f64 {
        self.lambdas.iter().fold(0.0, |m, l| m.max(l.abs()))
    }
}

/// Solves `G⁰x = e^{2λ}G¹x`.
///
/// Both matrices diagonal: `λ_j = ½ log(G⁰_jj / G¹_jj)`. Otherwise `G¹` is
/// Cholesky-reduced and the standard Hermitian problem solved. Equal
/// eigenvalues keep the solver's order.
pub fn spectral_pair(g0: &GramMatrix, g1: &GramMatrix, k: usize) -> Result<SpectralPair> {
    if g0.k() != k || g1.k() != k {
        return Err(Error::InvalidArgument(format!(
            "gram levels ({}, {}) do not match k = {k}",
            g0.k(),
            g1.k()
        )));
    }
    match (g0, g1) {
        (GramMatrix::Diagonal { log_diag: d0, .. }, GramMatrix::Diagonal { log_diag: d1, .. }) => {
            let mut order: Vec<(f64, usize)> = d0
                .iter()
                .zip(d1)
                .enumerate()
                .map(|(j, (a, b))| (0.5 * (a - b), j))
                .collect();
            order.sort_by(|a, b| b.0.total_cmp(&a.0));
            let lambdas = order.iter().map(|o| o.0).collect();
            let degree: Vec<usize> = order.iter().map(|o| o.1).collect();
            let log_scale = degree.iter().map(|&d| -0.5 * d0[d]).collect();
            Ok(SpectralPair {
                k,
                lambdas,
                basis: SectionBasis {
                    k,
                    coeffs: Coefficients::Monomial { degree, log_scale },
                    normalization: Normalization::Raw,
                },
            })
        }
        _ => dense_spectral_pair(&g0.to_dense(), &g1.to_dense(), k),
    }
}

fn dense_spectral_pair(g0: &DMatrix<Complex64>, g1: &DMatrix<Complex64>, k: usize) -> Result<SpectralPair> {
    for g in [g0, g1] {
        let cond = equilibrated_condition(g)?;
        if cond > MAX_CONDITION {
            return Err(Error::Conditioning(cond));
        }
    }
    let n = g1.nrows();
    let l = cholesky_factor(g1)?;
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::NotPositiveDefinite)?;
    let c = &l_inv * g0 * l_inv.adjoint();
    let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let back = l_inv.adjoint();
    let mut rows = DMatrix::zeros(n, n);
    let mut lambdas = Vec::with_capacity(n);
    for (row, &i) in order.iter().enumerate() {
        let mu = eig.eigenvalues[i];
        if !(mu > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let v = &back * eig.eigenvectors.column(i) / Complex64::new(mu.sqrt(), 0.0);
        for m in 0..n {
            rows[(row, m)] = v[m].conj();
        }
        lambdas.push(0.5 * mu.ln());
    }
    Ok(SpectralPair {
        k,
        lambdas,
        basis: SectionBasis {
            k,
            coeffs: Coefficients::Dense(rows),
            normalization: Normalization::Raw,
        },
    })
}

/// Condition number of `D^{-1/2} G D^{-1/2}` with `D = diag(G)`.
pub fn equilibrated_condition(g: &DMatrix<Complex64>) -> Result<f64> {
    let n = g.nrows();
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = g[(i, i)].re;
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        scale.push(1.0 / d.sqrt());
    }
    let e = DMatrix::from_fn(n, n, |i, j| g[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::try_new(e, f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(hi / lo)
}

/// Maximum of `|λ_i - λ_{i+1}|` over the sorted spectrum.
pub fn max_spacing(sp: &SpectralPair) -> f64 {
    sp.lambdas
        .windows(2)
        .map(|w| (w[0] - w[1]).abs())
        .fold(0.0, f64::max)
}

/// Size of the spectrum against the oscillation of the target potential.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LambdaBounds {
    pub k: usize,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub max_abs_over_k: f64,
    /// `sup (φ₁ - φ₀)` with `h_a = h_FS e^{-φ_a}`, i.e. `sup log(h₀/h₁)`.
    pub sup_relative: f64,
    /// `-inf (φ₁ - φ₀)`.
    pub neg_inf_relative: f64,
    /// `C₁k/2 ≤ λ_max ≤ 3C₁k` with `C₁ = sup log(h₀/h₁)`.
    pub top_in_interval: bool,
    /// `C₂k/2 ≤ -λ_min ≤ 3C₂k` with `C₂ = -inf log(h₀/h₁)`.
    pub bottom_in_interval: bool,
    /// The same two checks with `C₁ = sup log(h₁/h₀)`, the opposite sign.
    pub top_in_interval_flipped: bool,
    pub bottom_in_interval_flipped: bool,
}

pub fn lambda_bounds_report(sp: &SpectralPair, phi0: &RadialPotential, phi1: &RadialPotential) -> LambdaBounds {
    let n = 8000;
    let h = 2.0 * DEFAULT_X_MAX / n as f64;
    let (a0, b0) = phi0.asymptotic_limits();
    let (a1, b1) = phi1.asymptotic_limits();
    let mut hi = (a1 - a0).max(b1 - b0);
    let mut lo = (a1 - a0).min(b1 - b0);
    for i in 0..=n {
        let x = -DEFAULT_X_MAX + i as f64 * h;
        let d = phi1.phi(x) - phi0.phi(x);
        hi = hi.max(d);
        lo = lo.min(d);
    }
    let k = sp.k as f64;
    let top = sp.lambdas.first().copied().unwrap_or(0.0);
    let bottom = sp.lambdas.last().copied().unwrap_or(0.0);
    let within = |v: f64, c: f64| c * k / 2.0 <= v && v <= 3.0 * c * k;
    LambdaBounds {
        k: sp.k,
        lambda_max: top,
        lambda_min: bottom,
        max_abs_over_k: sp.max_abs_lambda() / k,
        sup_relative: hi,
        neg_inf_relative: -lo,
        top_in_interval: within(top, hi),
        bottom_in_interval: within(-bottom, -lo),
        top_in_interval_flipped: within(top, -lo),
        bottom_in_interval_flipped: within(-bottom, hi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bergman::gram::gram_matrix;
    use crate::potential::{make_dilation_potential, make_fubini_study, make_test_potential, PotentialSpec};
    use crate::quadrature::build_quadrature;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identical_pair_has_zero_spectrum() {
        let q = build_quadrature(64).unwrap();
        let g = gram_matrix(&make_fubini_study(), 20, &q).unwrap();
        let sp = spectral_pair(&g, &g, 20).unwrap();
        assert!(sp.lambdas.iter().all(|l| *l == 0.0));
        let (r0, r1) = sp.diagonalization_residuals(&g, &g);
        assert!(r0 < 1e-12 && r1 < 1e-12);
    }

    #[test]
    fn dilation_spectrum_has_half_spacing() {
        let q = build_quadrature(200).unwrap();
        let c = 1.0;
        let g0 = gram_matrix(&make_fubini_study(), 128, &q).unwrap();
        let g1 = gram_matrix(&make_dilation_potential(c).unwrap(), 128, &q).unwrap();
        let sp = spectral_pair(&g0, &g1, 128).unwrap();
        for (i, l) in sp.lambdas.iter().enumerate() {
            assert!((l - (128 - i) as f64 * c / 2.0).abs() < 1e-9, "{i}: {l}");
        }
        assert!((max_spacing(&sp) - 0.5).abs() < 1e-10);
        let (r0, r1) = sp.diagonalization_residuals(&g0, &g1);
        assert!(r0 < 1e-8 && r1 < 1e-8);
    }

    #[test]
    fn swapping_negates_and_reverses() {
        let q = build_quadrature(128).unwrap();
        let bump = make_test_potential(&PotentialSpec::Bump {
            amplitude: 0.3,
            width: 0.5,
            center: 0.5,
        })
        .unwrap();
        let g0 = gram_matrix(&make_fubini_study(), 32, &q).unwrap();
        let g1 = gram_matrix(&bump, 32, &q).unwrap();
        let a = spectral_pair(&g0, &g1, 32).unwrap();
        let b = spectral_pair(&g1, &g0, 32).unwrap();
        for (x, y) in a.lambdas.iter().zip(b.lambdas.iter().rev()) {
            assert!((x + y).abs() < 1e-10);
        }
    }

    fn hermitian_pair() -> (GramMatrix, GramMatrix) {
        let g0 = DMatrix::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => c(2.0, 0.0),
            (1, 1) => c(1.5, 0.0),
            (2, 2) => c(1.0, 0.0),
            (0, 1) => c(0.2, 0.3),
            (1, 0) => c(0.2, -0.3),
            (1, 2) => c(-0.1, 0.05),
            (2, 1) => c(-0.1, -0.05),
            _ => c(0.05, 0.0),
        });
        let g1 = DMatrix::from_fn(3, 3, |i, j| if i == j { c(1.0 + i as f64, 0.0) } else { c(0.1, 0.0) });
        (GramMatrix::dense(2, g0).unwrap(), GramMatrix::dense(2, g1).unwrap())
    }

    #[test]
    fn dense_path_diagonalizes_both() {
        let (g0, g1) = hermitian_pair();
        let sp = spectral_pair(&g0, &g1, 2).unwrap();
        assert!(sp.lambdas.windows(2).all(|w| w[0] >= w[1]));
        let (r0, r1) = sp.diagonalization_residuals(&g0, &g1);
        assert!(r0 < 1e-12 && r1 < 1e-12, "{r0} {r1}");
        let back = spectral_pair(&g1, &g0, 2).unwrap();
        for (x, y) in sp.lambdas.iter().zip(back.lambdas.iter().rev()) {
            assert!((x + y).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_path_agrees_with_diagonal_path() {
        let q = build_quadrature(64).unwrap();
        let g0 = gram_matrix(&make_fubini_study(), 6, &q).unwrap();
        let g1 = gram_matrix(&make_dilation_potential(0.7).unwrap(), 6, &q).unwrap();
        let fast = spectral_pair(&g0, &g1, 6).unwrap();
        let slow = dense_spectral_pair(&g0.to_dense(), &g1.to_dense(), 6).unwrap();
        for (a, b) in fast.lambdas.iter().zip(&slow.lambdas) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ill_conditioned_dense_matrix_is_refused() {
        let eps = 1e-14;
        let g = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0 - eps, 0.0), c(1.0 - eps, 0.0), c(1.0, 0.0)]);
        let g = GramMatrix::dense(1, g).unwrap();
        let id = GramMatrix::dense(1, DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(spectral_pair(&g, &id, 1), Err(Error::Conditioning(_))));
    }

    #[test]
    fn lambda_bounds_for_dilation() {
        let q = build_quadrature(200).unwrap();
        let phi1 = make_dilation_potential(1.0).unwrap();
        for k in [8, 32, 128] {
            let g0 = gram_matrix(&make_fubini_study(), k, &q).unwrap();
            let g1 = gram_matrix(&phi1, k, &q).unwrap();
            let sp = spectral_pair(&g0, &g1, k).unwrap();
            let r = lambda_bounds_report(&sp, &make_fubini_study(), &phi1);
            assert!((r.max_abs_over_k - 0.5).abs() < 1e-10);
            assert!((r.sup_relative - 1.0).abs() < 1e-12);
            assert!(r.lambda_min.abs() < 1e-9);
        }
    }
}
