//! Paths of fiber potentials `ψ(t, x)`, `t ∈ [0, 1]`, and their samples on
//! uniform `(t, x)` grids.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::potential::{RadialPotential, DEFAULT_X_MAX};

/// Value and first/second derivatives of `ψ(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub psi: f64,
    pub psi_t: f64,
    pub psi_tt: f64,
    pub psi_x: f64,
    pub psi_xx: f64,
    pub psi_tx: f64,
    /// Geodesic defect `ψ_tt - ψ_tx² / ψ_xx`, in whatever form the path
    /// computes most accurately.
    pub defect: f64,
}

impl Jet {
    /// Determinant of the `(t, x)` Hessian, `ψ_tt ψ_xx - ψ_tx²`.
    pub fn hessian_det(&self) -> f64 {
        self.defect * self.psi_xx
    }

    /// Smaller eigenvalue of the `(t, x)` Hessian.
    pub fn hessian_min_eigenvalue(&self) -> f64 {
        let tr = self.psi_tt + self.psi_xx;
        let disc = ((self.psi_tt - self.psi_xx).powi(2) + 4.0 * self.psi_tx * self.psi_tx).sqrt();
        let big = 0.5 * (tr + disc);
        if big > 0.0 {
            self.hessian_det() / big
        } else {
            0.5 * (tr - disc)
        }
    }

    pub(crate) fn with_plain_defect(mut self) -> Self {
        self.defect = self.psi_tt - self.psi_tx * self.psi_tx / self.psi_xx;
        self
    }
}

/// A path of S¹-invariant metrics.
pub trait PathSurface: Sync {
    fn jet(&self, t: f64, x: f64) -> Jet;

    fn value(&self, t: f64, x: f64) -> f64 {
        self.jet(t, x).psi
    }
}

impl<P: PathSurface + ?Sized> PathSurface for &P {
    fn jet(&self, t: f64, x: f64) -> Jet {
        (**self).jet(t, x)
    }
    fn value(&self, t: f64, x: f64) -> f64 {
        (**self).value(t, x)
    }
}

/// The naive path `ψ_t = (1 - t)ψ₀ + tψ₁`; not a geodesic unless the
/// endpoints differ by a constant.
#[derive(Debug, Clone)]
pub struct LinearPath {
    pub start: RadialPotential,
    pub end: RadialPotential,
}

impl PathSurface for LinearPath {
    fn jet(&self, t: f64, x: f64) -> Jet {
        let (a, da, dda) = (self.start.psi(x), self.start.dpsi(x), self.start.ddpsi(x));
        let (b, db, ddb) = (self.end.psi(x), self.end.dpsi(x), self.end.ddpsi(x));
        let s = 1.0 - t;
        // φ₁ - φ₀ directly, avoiding the large softplus parts
        let (p0, dp0, _) = self.start.shape().eval(x);
        let (p1, dp1, _) = self.end.shape().eval(x);
        Jet {
            psi: s * a + t * b,
            psi_t: p1 - p0,
            psi_tt: 0.0,
            psi_x: s * da + t * db,
            psi_xx: s * dda + t * ddb,
            psi_tx: dp1 - dp0,
            defect: 0.0,
        }
        .with_plain_defect()
    }
}

/// A path that does not move: `ψ_t = ψ` for all t.
#[derive(Debug, Clone)]
pub struct ConstantPath(pub RadialPotential);

impl PathSurface for ConstantPath {
    fn jet(&self, _t: f64, x: f64) -> Jet {
        Jet {
            psi: self.0.psi(x),
            psi_x: self.0.dpsi(x),
            psi_xx: self.0.ddpsi(x),
            ..Jet::default()
        }
    }
}

/// Uniform grid on `[0, 1] × [-x_max, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub t_nodes: usize,
    pub x_nodes: usize,
    pub x_max: f64,
}

impl Default for GridSpec {
    /// 129 × 801 nodes over `[-40, 40]`.
    fn default() -> Self {
        Self {
            t_nodes: 129,
            x_nodes: 801,
            x_max: DEFAULT_X_MAX,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t_nodes < 3 || self.x_nodes < 3 || !(self.x_max > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid needs >= 3 nodes per axis and x_max > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Halves both spacings.
    pub fn refined(&self) -> Self {
        Self {
            t_nodes: 2 * self.t_nodes - 1,
            x_nodes: 2 * self.x_nodes - 1,
            x_max: self.x_max,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.t_nodes - 1) as f64
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_max / (self.x_nodes - 1) as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i + 1 == self.t_nodes {
            1.0
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.x_nodes {
            self.x_max
        } else {
            -self.x_max + j as f64 * self.dx()
        }
    }

    pub fn t_values(&self) -> Vec<f64> {
        (0..self.t_nodes).map(|i| self.t(i)).collect()
    }

    pub fn x_values(&self) -> Vec<f64> {
        (0..self.x_nodes).map(|j| self.x(j)).collect()
    }
}

/// Jets of a path sampled on a grid, stored t-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    spec: GridSpec,
    jets: Vec<Jet>,
}

impl PathGrid {
    pub fn sample<P: PathSurface + ?Sized>(path: &P, spec: GridSpec) -> Result<Self> {
        Self::sample_with(path, spec, Exec::default())
    }

    pub fn sample_with<P: PathSurface + ?Sized>(path: &P, spec: GridSpec, exec: Exec) -> Result<Self> {
        spec.validate()?;
        let rows = exec.map(spec.t_nodes, |i| {
            let t = spec.t(i);
            (0..spec.x_nodes).map(|j| path.jet(t, spec.x(j))).collect::<Vec<_>>()
        });
        Ok(Self {
            spec,
            jets: rows.into_iter().flatten().collect(),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn jet(&self, i: usize, j: usize) -> &Jet {
        &self.jets[i * self.spec.x_nodes + j]
    }

    pub fn row(&self, i: usize) -> &[Jet] {
        let n = self.spec.x_nodes;
        &self.jets[i * n..(i + 1) * n]
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    pub fn values(&self) -> Vec<f64> {
        self.jets.iter().map(|j| j.psi).collect()
    }

    pub fn ensure_same_grid(&self, other: &PathGrid) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.spec, other.spec
            )));
        }
        Ok(())
    }

    /// `sup |ψ - ψ'|` over the grid.
    pub fn sup_distance(&self, other: &PathGrid) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .jets
            .iter()
            .zip(&other.jets)
            .map(|(a, b)| (a.psi - b.psi).abs())
            .fold(0.0, f64::max))
    }
}

/// Jet of a path from fourth-order centered differences of a scalar evaluator.
///
/// `reduced(t, x)` must return `ψ(t, x) - s(x)` for a t-independent
/// reference `s` whose derivatives `(s', s'')` are given by `reference`.
/// Steps are `h` in both directions.
pub fn finite_difference_jet<F, R>(reduced: F, reference: R, t: f64, x: f64, h: f64) -> Jet
where
    F: Fn(f64, f64) -> f64,
    R: Fn(f64) -> (f64, f64, f64),
{
    let c = reduced(t, x);
    let d1 = |f: &dyn Fn(f64) -> f64| (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * h);
    let d2 = |f: &dyn Fn(f64) -> f64| {
        (-f(-2.0) + 16.0 * f(-1.0) - 30.0 * f(0.0) + 16.0 * f(1.0) - f(2.0)) / (12.0 * h * h)
    };
    let along_t = |s: f64| if s == 0.0 { c } else { reduced(t + s * h, x) };
    let along_x = |s: f64| if s == 0.0 { c } else { reduced(t, x + s * h) };
    let psi_t = d1(&along_t);
    let psi_tt = d2(&along_t);
    let rx = d1(&along_x);
    let rxx = d2(&along_x);
    let dx_at = |s: f64| {
        let g = |r: f64| reduced(t + s * h, x + r * h);
        (g(-2.0) - 8.0 * g(-1.0) + 8.0 * g(1.0) - g(2.0)) / (12.0 * h)
    };
    let psi_tx = d1(&dx_at);
    let (s0, s1, s2) = reference(x);
    Jet {
        psi: c + s0,
        psi_t,
        psi_tt,
        psi_x: rx + s1,
        psi_xx: rxx + s2,
        psi_tx,
        defect: 0.0,
    }
    .with_plain_defect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_dilation_potential, make_fubini_study};

    #[test]
    fn grid_endpoints_are_exact() {
        let g = GridSpec::default();
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(128), 1.0);
        assert_eq!(g.x(0), -40.0);
        assert_eq!(g.x(800), 40.0);
        assert!((g.dx() - 0.1).abs() < 1e-15);
        let r = g.refined();
        assert_eq!((r.t_nodes, r.x_nodes), (257, 1601));
    }

    #[test]
    fn constant_path_has_no_motion() {
        let p = ConstantPath(make_fubini_study());
        let j = p.jet(0.3, 1.0);
        assert_eq!((j.psi_t, j.psi_tt, j.psi_tx, j.defect), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn linear_path_defect_is_negative() {
        let p = LinearPath {
            start: make_fubini_study(),
            end: make_dilation_potential(1.0).unwrap(),
        };
        let j = p.jet(0.5, 0.0);
        assert!(j.defect < 0.0);
        assert!(j.hessian_det() < 0.0);
    }

    #[test]
    fn finite_difference_jet_on_polynomial() {
        // ψ = t²x + x³ with reference s = 0
        let jet = finite_difference_jet(
            |t, x| t * t * x + x * x * x,
            |_| (0.0, 0.0, 0.0),
            0.4,
            1.5,
            1e-3,
        );
        assert!((jet.psi_t - 2.0 * 0.4 * 1.5).abs() < 1e-9);
        assert!((jet.psi_tt - 2.0 * 1.5).abs() < 1e-6);
        assert!((jet.psi_x - (0.16 + 3.0 * 2.25)).abs() < 1e-9);
        assert!((jet.psi_xx - 9.0).abs() < 1e-6);
        assert!((jet.psi_tx - 0.8).abs() < 1e-9);
    }

    #[test]
    fn sampling_strategies_agree() {
        let p = LinearPath {
            start: make_fubini_study(),
            end: make_dilation_potential(0.5).unwrap(),
        };
        let spec = GridSpec {
            t_nodes: 9,
            x_nodes: 41,
            x_max: 10.0,
        };
        let a = PathGrid::sample_with(&p, spec, Exec::Sequential).unwrap();
        let b = PathGrid::sample_with(&p, spec, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
