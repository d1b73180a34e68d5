//! The spectral random variable Z, variance and spacing estimates, the
//! Harnack inequality for `φ̇`, the Sobolev bound and boundary moduli.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bergman::{max_spacing, BergmanGeodesic, SpectralPair};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::oracle::geodesic_distance;
use crate::path::{GridSpec, PathGrid, PathSurface};
use crate::potential::{logit, make_test_potential, PotentialSpec, RadialPotential};
use crate::quadrature::QuadratureRule;

/// Default seed for random sample draws.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Law of `Z` at `(t, x)`: `P(Z = λ_j) ∝ e^{2λ_j t} |ŝ_j(z)|²_{h₀^k}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpectralDistribution {
    pub k: usize,
    pub t: f64,
    pub x: f64,
    pub support: Vec<f64>,
    /// Monomial degree of each atom.
    pub degrees: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl SpectralDistribution {
    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probabilities).map(|(z, p)| z * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support
            .iter()
            .zip(&self.probabilities)
            .map(|(z, p)| p * (z - m) * (z - m))
            .sum()
    }

    /// `sup_j |P_j - C(k, d_j) p^{d_j} q^{k - d_j}|`.
    pub fn binomial_deviation(&self, p: f64, q: f64) -> f64 {
        let (lp, lq) = (p.ln(), q.ln());
        self.degrees
            .iter()
            .zip(&self.probabilities)
            .map(|(&d, &prob)| {
                let b = (ln_binomial(self.k, d) + d as f64 * lp + (self.k - d) as f64 * lq).exp();
                (prob - b).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn ln_binomial(n: usize, j: usize) -> f64 {
    let j = j.min(n - j);
    (1..=j).map(|i| ((n - j + i) as f64 / i as f64).ln()).sum()
}

pub fn spectral_distribution(bg: &BergmanGeodesic, t: f64, x: f64) -> SpectralDistribution {
    SpectralDistribution {
        k: bg.k(),
        t,
        x,
        support: bg.terms().iter().map(|term| term.lambda).collect(),
        degrees: bg.terms().iter().map(|term| term.degree).collect(),
        probabilities: bg.probabilities(t, x),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VarianceReport {
    pub k: usize,
    pub points: usize,
    /// `max |φ̈ - (4/k) Var Z| / max(|φ̈|, floor)`, the variance taken
    /// from the tabulated distribution.
    pub identity_error: f64,
    /// `max |φ̈ - D²_t φ|` over the grid, relative to `sup φ̈`.
    pub finite_difference_error: f64,
    pub sup_accel: f64,
}

/// Step of the fourth-order second difference in [`variance_check`].
pub const ACCEL_FD_STEP: f64 = 1e-2;

/// Compares `φ̈` with `(4/k)·Var(Z)` and with second differences of `φ(t;k)`
/// at every node of `grid`.
pub fn variance_check(bg: &BergmanGeodesic, grid: GridSpec, exec: Exec) -> Result<VarianceReport> {
    grid.validate()?;
    let k = bg.k() as f64;
    let lam = bg.max_abs_lambda();
    let floor = 1e-12 * 4.0 * lam * lam / k;
    let h = ACCEL_FD_STEP;
    let rows = exec.map(grid.t_nodes, |i| {
        let t = grid.t(i);
        let mut out = (0.0f64, 0.0f64, 0.0f64);
        for j in 0..grid.x_nodes {
            let x = grid.x(j);
            let a = bg.accel(t, x);
            let var = spectral_distribution(bg, t, x).variance();
            let id = (a - 4.0 * var / k).abs() / a.abs().max(floor).max(f64::MIN_POSITIVE);
            let f = |s: f64| bg.value(t + s * h, x);
            let fd = (-f(-2.0) + 16.0 * f(-1.0) - 30.0 * f(0.0) + 16.0 * f(1.0) - f(2.0)) / (12.0 * h * h);
            out.0 = out.0.max(id);
            out.1 = out.1.max((a - fd).abs());
            out.2 = out.2.max(a.abs());
        }
        out
    });
    let (id, fd, sup) = rows
        .iter()
        .fold((0.0f64, 0.0f64, 0.0f64), |acc, r| (acc.0.max(r.0), acc.1.max(r.1), acc.2.max(r.2)));
    Ok(VarianceReport {
        k: bg.k(),
        points: grid.t_nodes * grid.x_nodes,
        identity_error: id,
        finite_difference_error: if sup > 0.0 { fd / sup } else { fd },
        sup_accel: sup,
    })
}

/// `max_j |λ_j - λ_{j+1}|`.
pub fn spacing_check(sp: &SpectralPair) -> f64 {
    max_spacing(sp)
}

/// Pointwise and sampled Harnack data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HarnackReport {
    pub grid: GridSpec,
    pub k: usize,
    /// `2φ̈ - 4(φ̇')²/ψ''` on the interior nodes, row-major in t.
    pub residual: Vec<f64>,
    pub min_residual: f64,
    /// Minimum of `φ̈ - (φ̇')²/ψ''` over the interior nodes.
    pub min_defect: f64,
    pub samples: Vec<HarnackSample>,
}

/// One evaluation of `φ̇(ξ, τ) ≤ φ̇(X, T) + C·Δ(ξ, τ, X, T)`, at grid nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HarnackSample {
    pub xi: f64,
    pub tau: f64,
    pub x_end: f64,
    pub t_end: f64,
    /// `φ̇(ξ, τ)`.
    pub lhs: f64,
    /// `φ̇(X, T) + Δ/8`.
    pub rhs: f64,
    pub delta: f64,
}

impl HarnackSample {
    /// `φ̇(X, T) + c·Δ - φ̇(ξ, τ)`.
    pub fn margin(&self, c: f64) -> f64 {
        let end = self.rhs - self.delta / 8.0;
        if self.delta.is_infinite() {
            f64::INFINITY
        } else {
            end + c * self.delta - self.lhs
        }
    }
}

impl HarnackReport {
    /// Samples whose margin at constant `c` is below `-tol`.
    pub fn violations(&self, c: f64, tol: f64) -> usize {
        self.samples.iter().filter(|s| s.margin(c) < -tol).count()
    }

    pub fn min_margin(&self, c: f64) -> f64 {
        self.samples.iter().map(|s| s.margin(c)).fold(f64::INFINITY, f64::min)
    }
}

fn defect_grid(path: &PathGrid) -> Result<(Vec<f64>, f64, f64)> {
    let spec = path.spec();
    let mut residual = Vec::new();
    let mut min_residual = f64::INFINITY;
    let mut min_defect = f64::INFINITY;
    for i in 1..spec.t_nodes - 1 {
        for j in 1..spec.x_nodes - 1 {
            let jet = path.jet(i, j);
            if !(jet.psi_xx > 0.0) {
                return Err(Error::DegenerateMetric {
                    t: spec.t(i),
                    x: spec.x(j),
                    value: jet.psi_xx,
                });
            }
            let grad = jet.psi_tx * jet.psi_tx / jet.psi_xx;
            let r = 2.0 * jet.psi_tt - 4.0 * grad;
            residual.push(r);
            min_residual = min_residual.min(r);
            min_defect = min_defect.min(jet.psi_tt - grad);
        }
    }
    Ok((residual, min_residual, min_defect))
}

/// Evaluates `∂L/∂t - |DL|²` for `L = 2φ̇` and the geodesic defect
/// `φ̈ - (φ̇')²/ψ''` (plain form) on the interior of `grid`.
pub fn harnack_differential_check(bg: &BergmanGeodesic, grid: GridSpec, exec: Exec) -> Result<HarnackReport> {
    let path = PathGrid::sample_with(bg, grid, exec)?;
    let (residual, min_residual, min_defect) = defect_grid(&path)?;
    Ok(HarnackReport {
        grid,
        k: bg.k(),
        residual,
        min_residual,
        min_defect,
        samples: Vec::new(),
    })
}

/// A pair of space-time points `((ξ, τ), (X, T))`.
pub type HarnackQuery = ((f64, f64), (f64, f64));

/// Draws `n` queries with `τ < T` on distinct t-nodes of `grid` and
/// `ξ, X` uniform in `[-x_range, x_range]`.
pub fn harnack_samples(n: usize, seed: u64, x_range: f64, grid: &GridSpec) -> Vec<HarnackQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node = |t: f64| (t / grid.dt()).round() as usize;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a: f64 = rng.random();
        let b: f64 = rng.random();
        let xi = rng.random_range(-x_range..=x_range);
        let x_end = rng.random_range(-x_range..=x_range);
        let (tau, t_end) = if a < b { (a, b) } else { (b, a) };
        if node(tau) < node(t_end) {
            out.push(((tau, xi), (t_end, x_end)));
        }
    }
    out
}

/// Checks `φ̇(ξ, τ) ≤ φ̇(X, T) + Δ/8` with `Δ` from the grid distance.
///
/// Both points are snapped to grid nodes; `φ̇` is evaluated at the nodes.
pub fn harnack_global_check(
    bg: &BergmanGeodesic,
    grid: GridSpec,
    samples: &[HarnackQuery],
    window: usize,
    exec: Exec,
) -> Result<HarnackReport> {
    let path = PathGrid::sample_with(bg, grid, exec)?;
    let snap = |(t, x): (f64, f64)| {
        let i = ((t / grid.dt()).round() as usize).min(grid.t_nodes - 1);
        let j = (((x + grid.x_max) / grid.dx()).round() as usize).min(grid.x_nodes - 1);
        (grid.t(i), grid.x(j), path.jet(i, j).psi_t)
    };
    let mut out = Vec::with_capacity(samples.len());
    for &(a, b) in samples {
        if !(a.0 < b.0) {
            return Err(Error::OutOfDomain(format!("need τ < T, got {} and {}", a.0, b.0)));
        }
        let delta = geodesic_distance(&path, a, b, window, exec)?;
        let (tau, xi, lhs) = snap(a);
        let (t_end, x_end, end) = snap(b);
        out.push(HarnackSample {
            xi,
            tau,
            x_end,
            t_end,
            lhs,
            rhs: end + delta / 8.0,
            delta,
        });
    }
    Ok(HarnackReport {
        grid,
        k: bg.k(),
        residual: Vec::new(),
        min_residual: f64::NAN,
        min_defect: f64::NAN,
        samples: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SobolevReport {
    /// `‖∂φ‖² = ∫ (φ')² dx`.
    pub dirichlet: f64,
    /// Aubin–Yau `J(φ) = ½‖∂φ‖²` for n = 1.
    pub aubin_yau: f64,
    pub sup_norm: f64,
}

impl SobolevReport {
    /// `2‖φ‖_{C⁰} - ‖∂φ‖²`; the bound `J ≤ 2‖φ‖_{C⁰}` has twice this slack or more.
    pub fn slack(&self) -> f64 {
        2.0 * self.sup_norm - self.dirichlet
    }

    pub fn holds(&self) -> bool {
        self.dirichlet <= 2.0 * self.sup_norm && self.aubin_yau <= 2.0 * self.sup_norm
    }
}

/// `∫ (φ')² dx` by quadrature in the Fubini–Study moment, where
/// `dx = dp / (p q)`.
pub fn sobolev_bound_check(phi: &RadialPotential, quad: &QuadratureRule) -> SobolevReport {
    let dirichlet = quad.integrate(|p, q| {
        let d = phi.d_phi(logit(p, q));
        d * d / (p * q)
    });
    SobolevReport {
        dirichlet,
        aubin_yau: 0.5 * dirichlet,
        sup_norm: phi.sup_norm(),
    }
}

/// `n` bump potentials with seeded random parameters; amplitudes are kept
/// small enough that every draw is a valid metric.
pub fn random_bumps(n: usize, seed: u64) -> Result<Vec<(PotentialSpec, RadialPotential)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let width = rng.random_range(0.3..1.2);
            let spec = PotentialSpec::Bump {
                amplitude: rng.random_range(-1.0..1.0) * 0.2 * width * width,
                width,
                center: rng.random_range(0.1..0.9),
            };
            let pot = make_test_potential(&spec)?;
            Ok((spec, pot))
        })
        .collect()
}

/// `∫ ψ'' dx` with `ψ''` given as a function of x, by quadrature in the
/// Fubini–Study moment.
pub fn total_volume<F: Fn(f64) -> f64>(ddpsi: F, quad: &QuadratureRule) -> f64 {
    quad.integrate(|p, q| ddpsi(logit(p, q)) / (p * q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundaryModulus {
    pub k: usize,
    /// `sup_x |∂_x φ(t;k)|` over `t ∈ {0, 1}`.
    pub tangential: f64,
    /// `sup_x |φ̇(t;k)|` over `t ∈ {0, 1}`.
    pub transversal: f64,
    /// `2 max|λ_j| / k`.
    pub transversal_bound: f64,
    /// `sup_x |φ(0;k)|`.
    pub start_error: f64,
    /// `sup_x |φ(1;k) - (φ₁ - φ₀)|`.
    pub end_error: f64,
}

/// Boundary behaviour of each geodesic against the end potential `phi1`.
pub fn boundary_modulus_report(
    geodesics: &[BergmanGeodesic],
    phi1: &RadialPotential,
    grid: GridSpec,
    exec: Exec,
) -> Result<Vec<BoundaryModulus>> {
    grid.validate()?;
    Ok(exec.map_slice(geodesics, |bg| {
        let k = bg.k() as f64;
        let base = bg.base();
        let mut m = BoundaryModulus {
            k: bg.k(),
            tangential: 0.0,
            transversal: 0.0,
            transversal_bound: 2.0 * bg.max_abs_lambda() / k,
            start_error: 0.0,
            end_error: 0.0,
        };
        for x in grid.x_values() {
            for t in [0.0, 1.0] {
                let mo = bg.moments(t, x);
                let slope = mo.mean_j / k - base.dpsi(x);
                m.tangential = m.tangential.max(slope.abs());
                m.transversal = m.transversal.max((2.0 * mo.mean_z / k).abs());
            }
            m.start_error = m.start_error.max(bg.eval(0.0, x).abs());
            let target = phi1.phi(x) - base.phi(x);
            m.end_error = m.end_error.max((bg.eval(1.0, x) - target).abs());
        }
        m
    }))
}
