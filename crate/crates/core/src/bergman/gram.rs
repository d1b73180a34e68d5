//! Gram matrices of monomial sections and their orthonormal bases.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::{RadialPotential, Shape};
use crate::quadrature::QuadratureRule;

/// Potential sampled at the quadrature nodes of its own moment variable.
///
/// Because `ψ''(x) dx = dp`, an integral `∫ f(x) ψ''(x) dx` becomes
/// `Σ wᵢ f(xᵢ)` with `ψ'(xᵢ) = pᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSamples {
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl MomentSamples {
    pub fn new(phi: &RadialPotential, quad: &QuadratureRule) -> Result<Self> {
        let mut x = Vec::with_capacity(quad.len());
        let mut psi = Vec::with_capacity(quad.len());
        for (&p, &q) in quad.nodes().iter().zip(quad.complements()) {
            let xi = phi.inverse_moment(p, q)?;
            x.push(xi);
            psi.push(phi.psi(xi));
        }
        Ok(Self {
            x,
            psi,
            log_weights: quad.weights().iter().map(|w| w.ln()).collect(),
        })
    }

    /// `log ∫ e^{j·x - k·ψ(x)} ψ''(x) dx`.
    pub fn log_monomial_norm(&self, j: usize, k: usize) -> f64 {
        let (jf, kf) = (j as f64, k as f64);
        log_sum_exp(
            self.x
                .iter()
                .zip(&self.psi)
                .zip(&self.log_weights)
                .map(|((x, psi), lw)| jf * x - kf * psi + lw),
        )
    }
}

/// `log Σ eᵃ` with the maximum factored out.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let v: Vec<f64> = terms.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

/// Gram matrix `G_ij = ∫ (z^i, z^j)_{h^k} dV_h` at level k.
#[derive(Debug, Clone, PartialEq)]
pub enum GramMatrix {
    /// S¹-invariant metrics: monomials of different degree are orthogonal.
    /// Stores `log G_jj`.
    Diagonal { k: usize, log_diag: Vec<f64> },
    Dense { k: usize, entries: DMatrix<Complex64> },
}

impl GramMatrix {
    pub fn k(&self) -> usize {
        match self {
            GramMatrix::Diagonal { k, .. } | GramMatrix::Dense { k, .. } => *k,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GramMatrix::Diagonal { log_diag, .. } => log_diag.len(),
            GramMatrix::Dense { entries, .. } => entries.nrows(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, GramMatrix::Diagonal { .. })
    }

    /// Builds a dense Gram matrix, checking it is Hermitian.
    pub fn dense(k: usize, entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != k + 1 || entries.ncols() != k + 1 {
            return Err(Error::InvalidArgument(format!(
                "level {k} needs a {}x{} matrix",
                k + 1,
                k + 1
            )));
        }
        let scale = entries.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let asym = (&entries - entries.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if asym > 1e-12 * scale {
            return Err(Error::InvalidArgument("gram matrix is not Hermitian".into()));
        }
        Ok(GramMatrix::Dense { k, entries })
    }

    /// Dense copy of the entries.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match self {
            GramMatrix::Diagonal { log_diag, .. } => {
                let n = log_diag.len();
                DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        Complex64::new(log_diag[i].exp(), 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            }
            GramMatrix::Dense { entries, .. } => entries.clone(),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            GramMatrix::Diagonal { log_diag, .. } => log_diag.iter().map(|v| v.exp()).collect(),
            GramMatrix::Dense { entries, .. } => (0..entries.nrows()).map(|i| entries[(i, i)].re).collect(),
        }
    }
}

/// Gram matrix of the monomials `z^j`, `j = 0..=k`, under `h_FS e^{-φ}`.
pub fn gram_matrix(phi: &RadialPotential, k: usize, quad: &QuadratureRule) -> Result<GramMatrix> {
    let samples = MomentSamples::new(phi, quad)?;
    gram_from_samples(&samples, k, quad)
}

/// [`gram_matrix`] reusing precomputed moment samples.
pub fn gram_from_samples(samples: &MomentSamples, k: usize, quad: &QuadratureRule) -> Result<GramMatrix> {
    if k == 0 {
        return Err(Error::InvalidArgument("level must be >= 1".into()));
    }
    if quad.exact_degree() < 2 * k {
        return Err(Error::InvalidArgument(format!(
            "{}-node rule is exact to degree {}, level {k} needs {}",
            quad.len(),
            quad.exact_degree(),
            2 * k
        )));
    }
    let log_diag: Vec<f64> = (0..=k).map(|j| samples.log_monomial_norm(j, k)).collect();
    if let Some((index, v)) = log_diag.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonPositiveEntry {
            index,
            value: v.exp(),
        });
    }
    Ok(GramMatrix::Diagonal { k, log_diag })
}

/// Scaling of an orthonormal basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `A·G·A* = I`.
    Raw,
    /// `ŝ = k^{-1/2}·s`, so `A·G·A* = I / k`.
    Hat,
}

/// Coefficients of sections in the monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// `s_j = e^{log_scale[j]}·z^{degree[j]}`.
    Monomial { degree: Vec<usize>, log_scale: Vec<f64> },
    /// Row j holds the coefficients of `s_j`.
    Dense(DMatrix<Complex64>),
}

/// A basis of `H⁰(O(k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionBasis {
    pub k: usize,
    pub coeffs: Coefficients,
    pub normalization: Normalization,
}

impl SectionBasis {
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match &self.coeffs {
            Coefficients::Dense(a) => a.clone(),
            Coefficients::Monomial { degree, log_scale } => {
                let n = degree.len();
                let mut a = DMatrix::zeros(n, n);
                for (row, (&d, &s)) in degree.iter().zip(log_scale).enumerate() {
                    a[(row, d)] = Complex64::new(s.exp(), 0.0);
                }
                a
            }
        }
    }

    /// `‖A·G·A* - c·I‖_∞` with `c = 1` (raw) or `1/k` (hat).
    pub fn orthonormality_residual(&self, gram: &GramMatrix) -> f64 {
        let target = match self.normalization {
            Normalization::Raw => 1.0,
            Normalization::Hat => 1.0 / self.k as f64,
        };
        if let (Coefficients::Monomial { degree, log_scale }, GramMatrix::Diagonal { log_diag, .. }) =
            (&self.coeffs, gram)
        {
            return degree
                .iter()
                .zip(log_scale)
                .map(|(&d, &s)| ((2.0 * s + log_diag[d]).exp() - target).abs())
                .fold(0.0, f64::max);
        }
        let a = self.to_dense();
        let prod = &a * gram.to_dense() * a.adjoint();
        let n = prod.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { target } else { 0.0 };
                worst = worst.max((prod[(i, j)] - Complex64::new(want, 0.0)).norm());
            }
        }
        worst
    }
}

/// Orthonormal basis for `G`: diagonal fast path, Cholesky otherwise.
///
/// Any unitary rotation of the result is also orthonormal; the Cholesky
/// representative `A = L⁻¹` is returned.
pub fn orthonormal_basis(gram: &GramMatrix, normalization: Normalization) -> Result<SectionBasis> {
    let k = gram.k();
    let shift = match normalization {
        Normalization::Raw => 0.0,
        Normalization::Hat => -0.5 * (k as f64).ln(),
    };
    let coeffs = match gram {
        GramMatrix::Diagonal { log_diag, .. } => Coefficients::Monomial {
            degree: (0..log_diag.len()).collect(),
            log_scale: log_diag.iter().map(|l| -0.5 * l + shift).collect(),
        },
        GramMatrix::Dense { entries, .. } => {
            let l = cholesky_factor(entries)?;
            let n = l.nrows();
            let inv = l
                .solve_lower_triangular(&DMatrix::identity(n, n))
                .ok_or(Error::NotPositiveDefinite)?;
            Coefficients::Dense(inv * Complex64::new(shift.exp(), 0.0))
        }
    };
    Ok(SectionBasis {
        k,
        coeffs,
        normalization,
    })
}

/// Lower Cholesky factor, rejecting indefinite input that the complex
/// factorization would otherwise push through a complex square root.
pub(crate) fn cholesky_factor(g: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let l = g.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.l();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0) || d.im.abs() > 1e-12 * d.re {
            return Err(Error::NotPositiveDefinite);
        }
    }
    Ok(l)
}

/// `ρ_k(x) = Σ_j |s_j(z)|²_{h^k}` for a basis orthonormal under `h = h_FS e^{-φ}`.
///
/// Dense bases are evaluated on the ray `arg z = 0`.
pub fn bergman_density(basis: &SectionBasis, phi: &RadialPotential, x: f64) -> f64 {
    let k = basis.k as f64;
    let weight = -k * phi.psi(x);
    match &basis.coeffs {
        Coefficients::Monomial { degree, log_scale } => log_sum_exp(
            degree
                .iter()
                .zip(log_scale)
                .map(|(&d, &s)| 2.0 * s + d as f64 * x + weight),
        )
        .exp(),
        Coefficients::Dense(a) => {
            let n = a.ncols();
            let half = 0.5 * x;
            let mut total = 0.0;
            for row in a.row_iter() {
                let mut v = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    v += row[i] * (i as f64 * half + 0.5 * weight).exp();
                }
                total += v.norm_sqr();
            }
            total
        }
    }
}

/// Level-k Fubini–Study approximation `φ(k) = φ + (1/k)·log(ρ_k / k)` of `φ`.
pub fn projected_potential(phi: &RadialPotential, k: usize, quad: &QuadratureRule) -> Result<RadialPotential> {
    let gram = gram_matrix(phi, k, quad)?;
    projected_from_gram(&gram)
}

/// [`projected_potential`] from an existing diagonal Gram matrix.
pub fn projected_from_gram(gram: &GramMatrix) -> Result<RadialPotential> {
    match gram {
        GramMatrix::Diagonal { k, log_diag } => {
            let lk = (*k as f64).ln();
            RadialPotential::from_shape(Shape::LevelSum {
                level: *k,
                log_coeffs: log_diag.iter().map(|l| -l - lk).collect(),
            })
        }
        GramMatrix::Dense { .. } => Err(Error::NonRadial),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_dilation_potential, make_fubini_study, make_test_potential, PotentialSpec};
    use crate::quadrature::build_quadrature;

    fn beta(j: usize, k: usize) -> f64 {
        let lf = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
        (lf(j) + lf(k - j) - lf(k + 1)).exp()
    }

    fn bump() -> RadialPotential {
        make_test_potential(&PotentialSpec::Bump {
            amplitude: 0.3,
            width: 0.5,
            center: 0.5,
        })
        .unwrap()
    }

    #[test]
    fn fubini_study_gram_is_beta() {
        let q = build_quadrature(64).unwrap();
        let g = gram_matrix(&make_fubini_study(), 2, &q).unwrap();
        let d = g.diagonal();
        for (got, want) in d.iter().zip([1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        let g1 = gram_matrix(&make_fubini_study(), 1, &q).unwrap().diagonal();
        assert!((g1[0] - 0.5).abs() < 1e-15 && (g1[1] - 0.5).abs() < 1e-15);
        for j in 0..=20 {
            let gg = gram_matrix(&make_fubini_study(), 20, &q).unwrap().diagonal();
            assert!(((gg[j] - beta(j, 20)) / beta(j, 20)).abs() < 1e-12);
        }
    }

    #[test]
    fn dilation_gram_scales_by_exponential() {
        let q = build_quadrature(200).unwrap();
        let c = 0.8;
        let d = make_dilation_potential(c).unwrap();
        for k in [3, 17, 64] {
            let (GramMatrix::Diagonal { log_diag: g0, .. }, GramMatrix::Diagonal { log_diag: g1, .. }) = (
                gram_matrix(&make_fubini_study(), k, &q).unwrap(),
                gram_matrix(&d, k, &q).unwrap(),
            ) else {
                unreachable!()
            };
            for j in 0..=k {
                assert!((g1[j] - g0[j] + j as f64 * c).abs() < 1e-11, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn insufficient_quadrature_is_rejected() {
        let q = build_quadrature(8).unwrap();
        assert!(gram_matrix(&make_fubini_study(), 8, &q).is_err());
    }

    #[test]
    fn orthonormal_bases() {
        let q = build_quadrature(64).unwrap();
        let g = gram_matrix(&make_fubini_study(), 2, &q).unwrap();
        let b = orthonormal_basis(&g, Normalization::Raw).unwrap();
        let a = b.to_dense();
        for (i, want) in [3f64.sqrt(), 6f64.sqrt(), 3f64.sqrt()].iter().enumerate() {
            assert!((a[(i, i)].re - want).abs() < 1e-13);
        }
        assert!(b.orthonormality_residual(&g) < 1e-12);
        let hat = orthonormal_basis(&g, Normalization::Hat).unwrap();
        assert!(hat.orthonormality_residual(&g) < 1e-12);

        let id = GramMatrix::dense(2, DMatrix::identity(3, 3)).unwrap();
        let bi = orthonormal_basis(&id, Normalization::Raw).unwrap();
        assert!((bi.to_dense() - DMatrix::<Complex64>::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn cholesky_path_on_hermitian_matrix() {
        let m = DMatrix::from_fn(3, 3, |i, j| {
            let base = if i == j { 2.0 } else { 0.3 };
            let im = match (i, j) {
                (0, 1) => 0.2,
                (1, 0) => -0.2,
                _ => 0.0,
            };
            Complex64::new(base, im)
        });
        let g = GramMatrix::dense(2, m).unwrap();
        let b = orthonormal_basis(&g, Normalization::Raw).unwrap();
        assert!(b.orthonormality_residual(&g) < 1e-12);
        let bad = GramMatrix::dense(1, DMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]))
        .unwrap();
        assert_eq!(orthonormal_basis(&bad, Normalization::Raw), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn fubini_study_density_is_constant() {
        let q = build_quadrature(160).unwrap();
        let fs = make_fubini_study();
        for k in [1, 5, 64, 128] {
            let g = gram_matrix(&fs, k, &q).unwrap();
            let b = orthonormal_basis(&g, Normalization::Raw).unwrap();
            for x in [-30.0, -2.0, 0.0, 0.5, 17.0] {
                let rho = bergman_density(&b, &fs, x);
                assert!((rho - (k as f64 + 1.0)).abs() < 1e-10 * k as f64, "k={k} x={x} rho={rho}");
            }
        }
    }

    #[test]
    fn density_integrates_to_dimension() {
        let q = build_quadrature(256).unwrap();
        let pot = bump();
        let k = 24;
        let g = gram_matrix(&pot, k, &q).unwrap();
        let b = orthonormal_basis(&g, Normalization::Raw).unwrap();
        let s = MomentSamples::new(&pot, &q).unwrap();
        let total: f64 = s
            .x
            .iter()
            .zip(q.weights())
            .map(|(&x, w)| w * bergman_density(&b, &pot, x))
            .sum();
        assert!((total - (k as f64 + 1.0)).abs() < 1e-10);
    }

    #[test]
    fn projected_fubini_study_is_constant() {
        let q = build_quadrature(128).unwrap();
        for k in [1, 8, 50] {
            let p = projected_potential(&make_fubini_study(), k, &q).unwrap();
            let want = ((k as f64 + 1.0) / k as f64).ln() / k as f64;
            for x in [-25.0, 0.0, 3.0, 25.0] {
                assert!((p.phi(x) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_error_is_second_order() {
        let q = build_quadrature(256).unwrap();
        let pot = bump();
        let err = |k: usize| {
            let p = projected_potential(&pot, k, &q).unwrap();
            (0..=400)
                .map(|i| {
                    let x = -20.0 + 0.1 * i as f64;
                    (p.phi(x) - pot.phi(x)).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }
}
