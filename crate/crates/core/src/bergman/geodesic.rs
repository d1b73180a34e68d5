//! The Bergman geodesic `φ(t;k) = (1/k) log Σ_j e^{2λ_j t} |ŝ_j|²_{h₀^k}`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::gram::{gram_from_samples, Coefficients, MomentSamples};
use super::spectrum::{spectral_pair, SpectralPair};
use crate::error::{Error, Result};
use crate::path::{Jet, PathSurface};
use crate::potential::RadialPotential;
use crate::quadrature::QuadratureRule;

/// One radial term `e^{2λt + d·x + c}` of the geodesic's log-sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub lambda: f64,
    pub degree: usize,
    /// `log` of the coefficient of `e^{d·x}` in `Σ|ŝ_j|²` (including `1/k`).
    pub log_coeff: f64,
}

/// Moments of the joint law of `(Z, J)` at a point, where
/// `P(Z = λ_j, J = d_j) ∝ e^{2λ_j t + d_j x + c_j}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `log Σ e^{a_j}`.
    pub log_sum: f64,
    pub mean_z: f64,
    pub mean_j: f64,
    /// `k - E[J]`, computed without cancellation.
    pub mean_j_complement: f64,
    pub var_z: f64,
    pub var_j: f64,
    pub cov: f64,
    /// `Var(Z) - Cov²/Var(J)` as a sum of nonnegative terms.
    pub residual_var: f64,
}

#[derive(Debug, Clone)]
pub struct BergmanGeodesic {
    k: usize,
    terms: Vec<Term>,
    base: RadialPotential,
    spectral: SpectralPair,
}

impl BergmanGeodesic {
    /// Builds the geodesic from a spectral pair computed against `base`.
    ///
    /// Dense pairs are accepted when each eigenspace of `σ` sums to a radial
    /// density; otherwise `NonRadial`.
    pub fn new(spectral: SpectralPair, base: RadialPotential) -> Result<Self> {
        let k = spectral.k;
        let ln_k = (k as f64).ln();
        let terms = match &spectral.basis.coeffs {
            Coefficients::Monomial { degree, log_scale } => spectral
                .lambdas
                .iter()
                .zip(degree)
                .zip(log_scale)
                .map(|((&lambda, &degree), &s)| Term {
                    lambda,
                    degree,
                    log_coeff: 2.0 * s - ln_k,
                })
                .collect(),
            Coefficients::Dense(rows) => radial_terms(&spectral.lambdas, rows)?
                .into_iter()
                .map(|mut t| {
                    t.log_coeff -= ln_k;
                    t
                })
                .collect(),
        };
        Ok(Self {
            k,
            terms,
            base,
            spectral,
        })
    }

    /// Gram matrices of both endpoints with `quad`, then [`BergmanGeodesic::new`].
    pub fn from_pair(
        phi0: &RadialPotential,
        phi1: &RadialPotential,
        k: usize,
        quad: &QuadratureRule,
    ) -> Result<Self> {
        let g0 = gram_from_samples(&MomentSamples::new(phi0, quad)?, k, quad)?;
        let g1 = gram_from_samples(&MomentSamples::new(phi1, quad)?, k, quad)?;
        Self::new(spectral_pair(&g0, &g1, k)?, phi0.clone())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn spectral(&self) -> &SpectralPair {
        &self.spectral
    }

    pub fn base(&self) -> &RadialPotential {
        &self.base
    }

    pub fn max_abs_lambda(&self) -> f64 {
        self.spectral.max_abs_lambda()
    }

    /// Moments of `(Z, J)` at `(t, x)`, centered on the dominant term so
    /// that concentrated laws keep full relative precision.
    pub fn moments(&self, t: f64, x: f64) -> Moments {
        let a: Vec<f64> = self
            .terms
            .iter()
            .map(|term| 2.0 * term.lambda * t + term.degree as f64 * x + term.log_coeff)
            .collect();
        let (top, m) = a
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let z0 = self.terms[top].lambda;
        let j0 = self.terms[top].degree as f64;
        let mut s = 0.0;
        let mut ez = 0.0;
        let mut ej = 0.0;
        let w: Vec<f64> = a
            .iter()
            .zip(&self.terms)
            .map(|(v, term)| {
                let w = (v - m).exp();
                s += w;
                ez += w * (term.lambda - z0);
                ej += w * (term.degree as f64 - j0);
                w
            })
            .collect();
        ez /= s;
        ej /= s;
        let (mut vz, mut vj, mut cv) = (0.0, 0.0, 0.0);
        for (w, term) in w.iter().zip(&self.terms) {
            let dz = (term.lambda - z0) - ez;
            let dj = (term.degree as f64 - j0) - ej;
            vz += w * dz * dz;
            vj += w * dj * dj;
            cv += w * dz * dj;
        }
        vz /= s;
        vj /= s;
        cv /= s;
        let residual_var = if vj > 0.0 {
            let beta = cv / vj;
            w.iter()
                .zip(&self.terms)
                .map(|(w, term)| {
                    let r = ((term.lambda - z0) - ez) - beta * ((term.degree as f64 - j0) - ej);
                    w * r * r
                })
                .sum::<f64>()
                / s
        } else {
            vz
        };
        Moments {
            log_sum: m + s.ln(),
            mean_z: z0 + ez,
            mean_j: j0 + ej,
            mean_j_complement: (self.k as f64 - j0) - ej,
            var_z: vz,
            var_j: vj,
            cov: cv,
            residual_var,
        }
    }

    /// `P(Z = λ_j)` at `(t, x)`, in the order of [`BergmanGeodesic::terms`].
    pub fn probabilities(&self, t: f64, x: f64) -> Vec<f64> {
        let a: Vec<f64> = self
            .terms
            .iter()
            .map(|term| 2.0 * term.lambda * t + term.degree as f64 * x + term.log_coeff)
            .collect();
        let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }

    /// `φ(t;k)(x)` relative to the base metric `h₀`.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.moments(t, x).log_sum / self.k as f64 - self.base.psi(x)
    }

    /// `∂_t φ(t;k) = (2/k) E[Z_t]`.
    pub fn velocity(&self, t: f64, x: f64) -> f64 {
        2.0 * self.moments(t, x).mean_z / self.k as f64
    }

    /// `∂_t² φ(t;k) = (4/k) Var(Z_t)`.
    pub fn accel(&self, t: f64, x: f64) -> f64 {
        4.0 * self.moments(t, x).var_z / self.k as f64
    }
}

impl PathSurface for BergmanGeodesic {
    fn jet(&self, t: f64, x: f64) -> Jet {
        let m = self.moments(t, x);
        let k = self.k as f64;
        Jet {
            psi: m.log_sum / k,
            psi_t: 2.0 * m.mean_z / k,
            psi_tt: 4.0 * m.var_z / k,
            psi_x: m.mean_j / k,
            psi_xx: m.var_j / k,
            psi_tx: 2.0 * m.cov / k,
            defect: 4.0 * m.residual_var / k,
        }
    }

    fn value(&self, t: f64, x: f64) -> f64 {
        self.moments(t, x).log_sum / self.k as f64
    }
}

pub fn geodesic_eval(bg: &BergmanGeodesic, t: f64, x: f64) -> f64 {
    bg.eval(t, x)
}

pub fn geodesic_velocity(bg: &BergmanGeodesic, t: f64, x: f64) -> f64 {
    bg.velocity(t, x)
}

pub fn geodesic_accel(bg: &BergmanGeodesic, t: f64, x: f64) -> f64 {
    bg.accel(t, x)
}

/// Groups equal eigenvalues and sums `|x_im|²` over each group, which is
/// the radial density of that eigenspace when its projector is diagonal.
fn radial_terms(lambdas: &[f64], rows: &DMatrix<Complex64>) -> Result<Vec<Term>> {
    let n = rows.ncols();
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &l) in lambdas.iter().enumerate() {
        match groups.last_mut() {
            Some((g, members)) if (l - *g).abs() <= 1e-10 * (1.0 + g.abs()) => members.push(i),
            _ => groups.push((l, vec![i])),
        }
    }
    let mut terms = Vec::new();
    for (lambda, members) in groups {
        let mut proj = DMatrix::<Complex64>::zeros(n, n);
        for &i in &members {
            for a in 0..n {
                for b in 0..n {
                    proj[(a, b)] += rows[(i, a)].conj() * rows[(i, b)];
                }
            }
        }
        let scale = (0..n).map(|a| proj[(a, a)].re).fold(0.0, f64::max);
        let mut by_degree = BTreeMap::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && proj[(a, b)].norm() > 1e-9 * scale {
                    return Err(Error::NonRadial);
                }
            }
            let d = proj[(a, a)].re;
            if d > 1e-300 {
                by_degree.insert(a, d);
            }
        }
        for (degree, d) in by_degree {
            terms.push(Term {
                lambda,
                degree,
                log_coeff: d.ln(),
            });
        }
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bergman::gram::{gram_matrix, GramMatrix};
    use crate::potential::{make_dilation_potential, make_fubini_study, make_test_potential, PotentialSpec};
    use crate::quadrature::build_quadrature;

    fn bump(a: f64, w: f64, c: f64) -> RadialPotential {
        make_test_potential(&PotentialSpec::Bump {
            amplitude: a,
            width: w,
            center: c,
        })
        .unwrap()
    }

    fn dilation_closed_form(c: f64, k: usize, t: f64, x: f64) -> f64 {
        let kf = k as f64;
        crate::potential::softplus_diff(x + c * t, x) + ((kf + 1.0) / kf).ln() / kf
    }

    #[test]
    fn dilation_geodesic_closed_form() {
        let q = build_quadrature(200).unwrap();
        let c = 1.0;
        let phi1 = make_dilation_potential(c).unwrap();
        for k in [8, 33, 128] {
            let bg = BergmanGeodesic::from_pair(&make_fubini_study(), &phi1, k, &q).unwrap();
            for t in [0.0, 0.25, 0.6, 1.0] {
                for x in [-40.0, -7.5, -0.3, 0.0, 2.0, 39.0] {
                    let got = bg.eval(t, x);
                    let want = dilation_closed_form(c, k, t, x);
                    assert!((got - want).abs() < 1e-11, "k={k} t={t} x={x}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn dilation_acceleration_is_binomial_variance() {
        let q = build_quadrature(128).unwrap();
        let c = 1.3;
        let bg = BergmanGeodesic::from_pair(&make_fubini_study(), &make_dilation_potential(c).unwrap(), 40, &q)
            .unwrap();
        for x in [-3.0, 0.0, 1.1] {
            let p = crate::potential::sigmoid(x);
            assert!((bg.accel(0.0, x) - c * c * p * (1.0 - p)).abs() < 1e-12);
            let jet = bg.jet(0.4, x);
            assert!(jet.defect.abs() < 1e-12, "defect {}", jet.defect);
        }
    }

    #[test]
    fn identical_endpoints_give_static_path() {
        let q = build_quadrature(128).unwrap();
        let b = bump(0.3, 0.5, 0.5);
        let bg = BergmanGeodesic::from_pair(&b, &b, 16, &q).unwrap();
        for x in [-5.0, 0.0, 5.0] {
            assert_eq!(bg.velocity(0.5, x), 0.0);
            assert_eq!(bg.accel(0.5, x), 0.0);
            assert_eq!(bg.eval(0.2, x), bg.eval(0.9, x));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let q = build_quadrature(128).unwrap();
        let bg = BergmanGeodesic::from_pair(&make_fubini_study(), &bump(0.3, 0.5, 0.5), 32, &q).unwrap();
        for &(t, x) in &[(0.3, 0.0), (0.5, -2.0), (0.8, 1.7)] {
            let h = 1e-5;
            let fd_v = (bg.eval(t + h, x) - bg.eval(t - h, x)) / (2.0 * h);
            let v = bg.velocity(t, x);
            assert!(((fd_v - v) / v).abs() < 1e-8, "velocity {fd_v} vs {v}");
            let h = 1e-3;
            let f = |s: f64| bg.eval(t + s * h, x);
            let fd_a = (-f(-2.0) + 16.0 * f(-1.0) - 30.0 * f(0.0) + 16.0 * f(1.0) - f(2.0)) / (12.0 * h * h);
            let a = bg.accel(t, x);
            assert!(((fd_a - a) / a).abs() < 1e-6, "accel {fd_a} vs {a}");
            let jet = bg.jet(t, x);
            let fd_x = (bg.value(t, x + h) - bg.value(t, x - h)) / (2.0 * h);
            assert!((fd_x - jet.psi_x).abs() < 1e-6);
            let fd_tx = (bg.jet(t, x + h).psi_t - bg.jet(t, x - h).psi_t) / (2.0 * h);
            assert!((fd_tx - jet.psi_tx).abs() < 1e-6);
            let plain = jet.psi_tt - jet.psi_tx * jet.psi_tx / jet.psi_xx;
            assert!((plain - jet.defect).abs() < 1e-10);
        }
    }

    #[test]
    fn endpoints_approach_projected_data() {
        let q = build_quadrature(256).unwrap();
        let b0 = bump(0.3, 0.5, 0.5);
        let b1 = bump(-0.2, 0.4, 0.35);
        let err = |k: usize| {
            let bg = BergmanGeodesic::from_pair(&b0, &b1, k, &q).unwrap();
            (0..=200)
                .map(|i| {
                    let x = -10.0 + 0.1 * i as f64;
                    let e0 = bg.eval(0.0, x).abs();
                    let e1 = (bg.eval(1.0, x) - (b1.phi(x) - b0.phi(x))).abs();
                    e0.max(e1)
                })
                .fold(0.0, f64::max)
        };
        let r = err(32) / err(64);
        assert!(r > 3.0 && r < 5.0, "ratio {r}");
    }

    #[test]
    fn dense_pair_reduces_to_radial_terms() {
        let q = build_quadrature(64).unwrap();
        let b = bump(0.3, 0.5, 0.5);
        let g0 = gram_matrix(&make_fubini_study(), 10, &q).unwrap();
        let g1 = gram_matrix(&b, 10, &q).unwrap();
        let fast = BergmanGeodesic::new(spectral_pair(&g0, &g1, 10).unwrap(), make_fubini_study()).unwrap();
        let d0 = GramMatrix::dense(10, g0.to_dense()).unwrap();
        let d1 = GramMatrix::dense(10, g1.to_dense()).unwrap();
        let slow = BergmanGeodesic::new(spectral_pair(&d0, &d1, 10).unwrap(), make_fubini_study()).unwrap();
        for &(t, x) in &[(0.0, 0.0), (0.5, -3.0), (1.0, 2.0)] {
            assert!((fast.eval(t, x) - slow.eval(t, x)).abs() < 1e-10);
        }
    }

    #[test]
    fn moments_in_far_tail() {
        let q = build_quadrature(200).unwrap();
        let bg = BergmanGeodesic::from_pair(&make_fubini_study(), &make_dilation_potential(1.0).unwrap(), 128, &q)
            .unwrap();
        let jet = bg.jet(0.5, 38.0);
        let want = crate::potential::sigmoid_prime(38.5);
        assert!(((jet.psi_xx - want) / want).abs() < 1e-9);
        let m = bg.moments(0.5, 38.0);
        let want_c = 128.0 * crate::potential::sigmoid(-38.5);
        assert!(((m.mean_j_complement - want_c) / want_c).abs() < 1e-9);
    }
}
