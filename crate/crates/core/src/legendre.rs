//! Legendre duality between fiber potentials `ψ(x)` and symplectic
//! potentials `u(p) = sup_x (p·x - ψ(x))` on the moment interval.
//!
//! Everything is carried in the logit coordinate `y = log(p / (1 - p))` and
//! through the bounded quantities
//!
//! * `δ = u - u_FS` with `u_FS(p) = p log p + (1 - p) log(1 - p)`,
//! * `ξ = u'(p) - y`, the offset of the maximizer `x* = u'(p)` from `y`,
//!
//! so the `p log p` endpoint singularities never appear.

use crate::error::{Error, Result};
use crate::potential::{sigmoid, softplus, softplus_diff, RadialPotential};

/// Local data of a symplectic potential at one logit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint {
    /// `u - u_FS`.
    pub delta: f64,
    /// `x* - y`.
    pub xi: f64,
    /// `dξ/dy`.
    pub dxi: f64,
}

/// Anything that can report `(δ, ξ, ξ')` at a logit value.
pub trait Symplectic {
    fn at(&self, y: f64) -> Result<DualPoint>;
}

impl<S: Symplectic + ?Sized> Symplectic for &S {
    fn at(&self, y: f64) -> Result<DualPoint> {
        (**self).at(y)
    }
}

/// The exact transform of a potential, evaluated on demand by root finding.
#[derive(Debug, Clone, Copy)]
pub struct ExactDual<'a>(pub &'a RadialPotential);

impl Symplectic for ExactDual<'_> {
    fn at(&self, y: f64) -> Result<DualPoint> {
        dual_point(self.0, y)
    }
}

fn dual_point(pot: &RadialPotential, y: f64) -> Result<DualPoint> {
    let p = sigmoid(y);
    let q = sigmoid(-y);
    let x = pot.inverse_moment(p, q)?;
    let xi = x - y;
    let delta = p * xi - softplus_diff(x, y) - pot.phi(x);
    let dxi = p * q / pot.ddpsi(x) - 1.0;
    Ok(DualPoint { delta, xi, dxi })
}

/// Pointwise combination `(1 - t)·u₀ + t·u₁`.
#[derive(Debug, Clone, Copy)]
pub struct Interpolated<A, B> {
    pub start: A,
    pub end: B,
    pub t: f64,
}

impl<A: Symplectic, B: Symplectic> Symplectic for Interpolated<A, B> {
    fn at(&self, y: f64) -> Result<DualPoint> {
        let a = self.start.at(y)?;
        let b = self.end.at(y)?;
        let s = 1.0 - self.t;
        Ok(DualPoint {
            delta: s * a.delta + self.t * b.delta,
            xi: s * a.xi + self.t * b.xi,
            dxi: s * a.dxi + self.t * b.dxi,
        })
    }
}

/// `u = u_FS + δ` sampled on a moment grid, interpolated by cubic Hermite
/// polynomials in the logit coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticPotential {
    y: Vec<f64>,
    delta: Vec<f64>,
    xi: Vec<f64>,
    dxi: Vec<f64>,
}

impl SymplecticPotential {
    pub fn logits(&self) -> &[f64] {
        &self.y
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// `u(p)` at the stored nodes.
    pub fn u(&self) -> Vec<f64> {
        self.y
            .iter()
            .zip(&self.delta)
            .map(|(&y, &d)| {
                let p = sigmoid(y);
                let q = sigmoid(-y);
                let fs = if p > 0.0 { p * p.ln() } else { 0.0 } + if q > 0.0 { q * q.ln() } else { 0.0 };
                fs + d
            })
            .collect()
    }
}

impl Symplectic for SymplecticPotential {
    fn at(&self, y: f64) -> Result<DualPoint> {
        let n = self.y.len();
        if !(y >= self.y[0] && y <= self.y[n - 1]) {
            return Err(Error::OutOfDomain(format!(
                "logit {y} outside sampled range [{}, {}]",
                self.y[0],
                self.y[n - 1]
            )));
        }
        let i = self.y.partition_point(|&v| v <= y).saturating_sub(1).min(n - 2);
        let h = self.y[i + 1] - self.y[i];
        let s = (y - self.y[i]) / h;
        let slope = |j: usize| {
            let p = sigmoid(self.y[j]);
            let q = sigmoid(-self.y[j]);
            p * q * self.xi[j]
        };
        let (delta, _) = hermite(s, h, self.delta[i], slope(i), self.delta[i + 1], slope(i + 1));
        let (xi, dxi) = hermite(s, h, self.xi[i], self.dxi[i], self.xi[i + 1], self.dxi[i + 1]);
        Ok(DualPoint { delta, xi, dxi })
    }
}

/// Cubic Hermite value and derivative at local coordinate `s ∈ [0, 1]`.
fn hermite(s: f64, h: f64, f0: f64, d0: f64, f1: f64, d1: f64) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let v = h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1;
    let dh00 = 6.0 * s2 - 6.0 * s;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = -6.0 * s2 + 6.0 * s;
    let dh11 = 3.0 * s2 - 2.0 * s;
    let d = (dh00 * f0 + dh01 * f1) / h + dh10 * d0 + dh11 * d1;
    (v, d)
}

/// Samples the Legendre transform of `ψ` on a moment grid given as
/// complementary pairs `(p, 1 - p)`, strictly increasing in p.
pub fn legendre_transform(psi: &RadialPotential, p_grid: &[(f64, f64)]) -> Result<SymplecticPotential> {
    if p_grid.len() < 2 {
        return Err(Error::InvalidArgument("moment grid needs 2 or more nodes".into()));
    }
    let mut out = SymplecticPotential {
        y: Vec::with_capacity(p_grid.len()),
        delta: Vec::with_capacity(p_grid.len()),
        xi: Vec::with_capacity(p_grid.len()),
        dxi: Vec::with_capacity(p_grid.len()),
    };
    for &(p, q) in p_grid {
        let y = crate::potential::logit(p, q);
        if let Some(&last) = out.y.last() {
            if !(y > last) {
                return Err(Error::InvalidArgument("moment grid must be increasing".into()));
            }
        }
        let d = dual_point(psi, y)?;
        out.y.push(y);
        out.delta.push(d.delta);
        out.xi.push(d.xi);
        out.dxi.push(d.dxi);
    }
    Ok(out)
}

/// A moment grid uniform in the logit coordinate over `[-y_max, y_max]`.
pub fn logit_grid(y_max: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let y = -y_max + 2.0 * y_max * i as f64 / (n - 1) as f64;
            (sigmoid(y), sigmoid(-y))
        })
        .collect()
}

/// Maximizer data at one x: the logit `y*` and the value `ψ(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolution {
    pub y: f64,
    pub psi: f64,
    pub point: DualPoint,
}

/// `ψ(x) = sup_p (p·x - u(p))` at a single point.
pub fn inverse_legendre_at<S: Symplectic>(u: &S, x: f64) -> Result<DualSolution> {
    // the maximizer solves y + ξ(y) = x, increasing in y
    let mut y = x;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut step = 1.0;
    let mut last: Option<DualPoint> = None;
    for _ in 0..300 {
        let d = u.at(y)?;
        let g = y + d.xi - x;
        let slope = 1.0 + d.dxi;
        if !(slope > 0.0) {
            return Err(Error::ConvexityViolation(format!(
                "u'' <= 0 at logit {y} (slope {slope:e})"
            )));
        }
        if g == 0.0 {
            last = Some(d);
            break;
        }
        if g < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let mut next = y - g / slope;
        if !(next > lo && next < hi) {
            next = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                step *= 2.0;
                lo + step
            } else {
                step *= 2.0;
                hi - step
            };
        }
        let done = (next - y).abs() <= 2.0 * f64::EPSILON * y.abs().max(1.0);
        y = next;
        if done {
            last = Some(u.at(y)?);
            break;
        }
    }
    let point = match last {
        Some(p) => p,
        None => u.at(y)?,
    };
    let p = sigmoid(y);
    let psi = p * (x - y) + softplus(y) - point.delta;
    Ok(DualSolution { y, psi, point })
}

/// A fiber potential sampled on an x-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberPotential {
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
    /// `ψ'(x)`, the maximizing moment value.
    pub dpsi: Vec<f64>,
}

impl FiberPotential {
    /// Smallest second difference divided by spacing²; nonnegative for convex samples.
    pub fn min_second_difference(&self) -> f64 {
        self.psi
            .windows(3)
            .zip(self.x.windows(3))
            .map(|(v, x)| {
                let h0 = x[1] - x[0];
                let h1 = x[2] - x[1];
                2.0 * ((v[2] - v[1]) / h1 - (v[1] - v[0]) / h0) / (h0 + h1)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates `ψ(x) = sup_p (p·x - u(p))` on `x_grid`.
pub fn inverse_legendre<S: Symplectic>(u: &S, x_grid: &[f64]) -> Result<FiberPotential> {
    let mut out = FiberPotential {
        x: x_grid.to_vec(),
        psi: Vec::with_capacity(x_grid.len()),
        dpsi: Vec::with_capacity(x_grid.len()),
    };
    for &x in x_grid {
        let s = inverse_legendre_at(u, x)?;
        out.psi.push(s.psi);
        out.dpsi.push(sigmoid(s.y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_dilation_potential, make_fubini_study, make_test_potential, PotentialSpec};

    fn bump() -> RadialPotential {
        make_test_potential(&PotentialSpec::Bump {
            amplitude: 0.3,
            width: 1.5,
            center: 0.2,
        })
        .unwrap()
    }

    #[test]
    fn fubini_study_is_self_dual() {
        let fs = make_fubini_study();
        let u = legendre_transform(&fs, &logit_grid(30.0, 301)).unwrap();
        assert!(u.delta().iter().all(|d| d.abs() < 1e-14));
        let xs: Vec<f64> = (-20..=20).map(|i| i as f64).collect();
        let back = inverse_legendre(&u, &xs).unwrap();
        for (x, v) in xs.iter().zip(&back.psi) {
            assert!((v - softplus(*x)).abs() < 1e-12);
        }
    }

    #[test]
    fn dilation_has_linear_delta() {
        for c in [-1.5, 0.4, 1.0] {
            let pot = make_dilation_potential(c).unwrap();
            let grid = logit_grid(30.0, 121);
            let u = legendre_transform(&pot, &grid).unwrap();
            for ((p, _), d) in grid.iter().zip(u.delta()) {
                assert!((d + c * p).abs() < 1e-9, "c={c} p={p}: {d}");
            }
        }
    }

    #[test]
    fn inverse_of_shifted_fs_is_dilation() {
        let c = 0.7;
        let pot = make_dilation_potential(c).unwrap();
        let xs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.5).collect();
        let back = inverse_legendre(&ExactDual(&pot), &xs).unwrap();
        for (x, v) in xs.iter().zip(&back.psi) {
            assert!((v - softplus(x + c)).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_through_samples() {
        let pot = bump();
        let u = legendre_transform(&pot, &logit_grid(26.0, 5201)).unwrap();
        let xs: Vec<f64> = (0..=400).map(|i| -20.0 + i as f64 * 0.1).collect();
        let back = inverse_legendre(&u, &xs).unwrap();
        let err = xs
            .iter()
            .zip(&back.psi)
            .map(|(x, v)| (v - pot.psi(*x)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "round-trip error {err:e}");
        assert!(back.min_second_difference() >= 0.0);
    }

    #[test]
    fn exact_round_trip() {
        let pot = bump();
        for x in [-20.0, -3.3, 0.0, 0.1, 7.5, 20.0] {
            let s = inverse_legendre_at(&ExactDual(&pot), x).unwrap();
            assert!((s.psi - pot.psi(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_samples_are_reported() {
        let u = legendre_transform(&make_fubini_study(), &logit_grid(5.0, 51)).unwrap();
        assert!(matches!(
            inverse_legendre_at(&u, 30.0),
            Err(Error::OutOfDomain(_))
        ));
    }
}
