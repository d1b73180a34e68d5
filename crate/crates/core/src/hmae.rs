//! Monge–Ampère masses of paths, Dirichlet residuals and upper envelopes.
//!
//! In `(t, x)` coordinates the density of `Ω_Φ^{2}` is the Hessian
//! determinant `D = ψ_tt ψ_xx - ψ_tx²`. With total volume 1 the angular
//! constant is 1: `∫∫ D dx dt = E(1) - E(0)` where `E(t) = ∫ ψ_t ψ_xx dx`.

use crate::bergman::BergmanGeodesic;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::path::{GridSpec, Jet, PathGrid, PathSurface};
use crate::potential::{logit, solve_monotone, RadialPotential};
use crate::quadrature::{build_quadrature, QuadratureRule};

/// Hessian determinant of a jet; `DegenerateMetric` when `ψ_xx ≤ 0`.
pub fn ma_density(jet: &Jet, t: f64, x: f64) -> Result<f64> {
    if !(jet.psi_xx > 0.0) {
        return Err(Error::DegenerateMetric {
            t,
            x,
            value: jet.psi_xx,
        });
    }
    Ok(jet.hessian_det())
}

/// Trapezoid weights for `n` equally spaced nodes with spacing `h`.
fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// `∫∫ D dx dt` by the trapezoid rule on the sampled grid.
pub fn ma_mass_bulk(path: &PathGrid) -> Result<f64> {
    let spec = path.spec();
    let wt = trapezoid_weights(spec.t_nodes, spec.dt());
    let wx = trapezoid_weights(spec.x_nodes, spec.dx());
    let mut total = 0.0;
    for (i, wi) in wt.iter().enumerate() {
        let mut row = 0.0;
        for (j, wj) in wx.iter().enumerate() {
            row += wj * ma_density(path.jet(i, j), spec.t(i), spec.x(j))?;
        }
        total += wi * row;
    }
    Ok(total)
}

/// Solves `ψ_x(t, x) = p` for a path.
pub fn path_inverse_moment<P: PathSurface + ?Sized>(path: &P, t: f64, p: f64, q: f64) -> Result<f64> {
    solve_monotone(
        |x| path.jet(t, x).psi_x - p,
        |x| path.jet(t, x).psi_xx,
        logit(p, q),
    )
}

/// `∫ ψ_t ψ_xx dx` at time `t`, the t-derivative of the Aubin–Yau
/// functional along the path, by quadrature in the path's moment variable.
pub fn energy_derivative<P: PathSurface + ?Sized>(path: &P, t: f64, quad: &QuadratureRule) -> Result<f64> {
    let mut total = 0.0;
    for ((&p, &q), &w) in quad.nodes().iter().zip(quad.complements()).zip(quad.weights()) {
        let x = path_inverse_moment(path, t, p, q)?;
        total += w * path.jet(t, x).psi_t;
    }
    Ok(total)
}

/// `E(1) - E(0)`.
pub fn ma_mass_boundary<P: PathSurface + ?Sized>(path: &P, quad: &QuadratureRule) -> Result<f64> {
    Ok(energy_derivative(path, 1.0, quad)? - energy_derivative(path, 0.0, quad)?)
}

/// `∫₀¹ ∫ ψ_t² ψ_xx dx dt` with a Gauss–Legendre rule of `t_nodes` points in t.
pub fn path_energy<P: PathSurface + ?Sized>(path: &P, quad: &QuadratureRule, t_nodes: usize) -> Result<f64> {
    let tq = build_quadrature(t_nodes)?;
    let mut total = 0.0;
    for (&t, &wt) in tq.nodes().iter().zip(tq.weights()) {
        let mut inner = 0.0;
        for ((&p, &q), &w) in quad.nodes().iter().zip(quad.complements()).zip(quad.weights()) {
            let x = path_inverse_moment(path, t, p, q)?;
            let v = path.jet(t, x).psi_t;
            inner += w * v * v;
        }
        total += wt * inner;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MassReport {
    pub k: usize,
    pub boundary_value: f64,
    pub bulk_value: f64,
    pub grid: GridSpec,
}

impl MassReport {
    /// `|bulk - boundary| / |boundary|`.
    pub fn relative_gap(&self) -> f64 {
        (self.bulk_value - self.boundary_value).abs() / self.boundary_value.abs()
    }
}

/// Boundary and bulk masses of a Bergman geodesic.
pub fn ma_mass_report(bg: &BergmanGeodesic, grid: GridSpec, quad: &QuadratureRule, exec: Exec) -> Result<MassReport> {
    let sampled = PathGrid::sample_with(bg, grid, exec)?;
    Ok(MassReport {
        k: bg.k(),
        boundary_value: ma_mass_boundary(bg, quad)?,
        bulk_value: ma_mass_bulk(&sampled)?,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MassDecay {
    pub k: Vec<usize>,
    pub mass: Vec<f64>,
    /// Least-squares slope of `log mass` against `log k`.
    pub slope: f64,
    /// `max_k k·mass`.
    pub scaled_max: f64,
    pub scaled_min: f64,
}

/// Boundary masses of the Bergman geodesics between `phi0` and `phi1`.
pub fn ma_mass_decay_study(
    phi0: &RadialPotential,
    phi1: &RadialPotential,
    k_list: &[usize],
    quad: &QuadratureRule,
    exec: Exec,
) -> Result<MassDecay> {
    if k_list.is_empty() || k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("k_list must be non-empty and increasing".into()));
    }
    let mass = exec
        .map_slice(k_list, |&k| {
            let bg = BergmanGeodesic::from_pair(phi0, phi1, k, quad)?;
            ma_mass_boundary(&bg, quad)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let scaled: Vec<f64> = k_list.iter().zip(&mass).map(|(&k, m)| k as f64 * m).collect();
    Ok(MassDecay {
        k: k_list.to_vec(),
        slope: loglog_slope(k_list, &mass),
        scaled_max: scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        scaled_min: scaled.iter().copied().fold(f64::INFINITY, f64::min),
        mass,
    })
}

/// Least-squares slope of `log y` against `log k`; NaN with fewer than two
/// points or non-positive values.
pub fn loglog_slope(k: &[usize], y: &[f64]) -> f64 {
    if k.len() < 2 || y.iter().any(|v| !(*v > 0.0)) {
        return f64::NAN;
    }
    let lx: Vec<f64> = k.iter().map(|&v| (v as f64).ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DirichletReport {
    /// `max(sup|ψ(0,·) - ψ₀|, sup|ψ(1,·) - ψ₁|)` over the x-grid.
    pub boundary_mismatch: f64,
    /// Minimum eigenvalue of the `(t, x)` Hessian over the grid.
    pub min_hessian_eigenvalue: f64,
    /// `sup |D|` over interior nodes.
    pub sup_residual: f64,
    /// `sup |ψ_tt - ψ_tx²/ψ_xx|` over interior nodes.
    pub sup_defect: f64,
}

/// Checks the discrete Dirichlet problem: boundary data, plurisubharmonicity
/// and the homogeneous equation on the open interior of the grid.
pub fn dirichlet_residual_report(
    path: &PathGrid,
    start: &RadialPotential,
    end: &RadialPotential,
) -> Result<DirichletReport> {
    let spec = path.spec();
    let last = spec.t_nodes - 1;
    let mut mismatch = 0.0f64;
    for j in 0..spec.x_nodes {
        let x = spec.x(j);
        let (a, _, _) = start.shape().eval(x);
        let (b, _, _) = end.shape().eval(x);
        let fs = crate::potential::softplus(x);
        mismatch = mismatch
            .max(((path.jet(0, j).psi - fs) - a).abs())
            .max(((path.jet(last, j).psi - fs) - b).abs());
    }
    let mut min_eig = f64::INFINITY;
    let mut sup_res = 0.0f64;
    let mut sup_def = 0.0f64;
    for i in 0..spec.t_nodes {
        for j in 0..spec.x_nodes {
            let jet = path.jet(i, j);
            let d = ma_density(jet, spec.t(i), spec.x(j))?;
            min_eig = min_eig.min(jet.hessian_min_eigenvalue());
            if i > 0 && i < last && j > 0 && j + 1 < spec.x_nodes {
                sup_res = sup_res.max(d.abs());
                sup_def = sup_def.max(jet.defect.abs());
            }
        }
    }
    Ok(DirichletReport {
        boundary_mismatch: mismatch,
        min_hessian_eigenvalue: min_eig,
        sup_residual: sup_res,
        sup_defect: sup_def,
    })
}

/// `c_i = 2·(Σ_{j≥i} a_j + tail)`.
///
/// `a` must be positive and strictly decreasing; `tail` bounds the
/// contribution of levels beyond the list. `NotSummable` when the total
/// exceeds `cap`.
pub fn monotone_shift(a: &[f64], tail: f64, cap: f64) -> Result<Vec<f64>> {
    if a.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("boundary errors must be positive".into()));
    }
    if a.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("boundary errors must be strictly decreasing".into()));
    }
    if !(tail >= 0.0) || !tail.is_finite() {
        return Err(Error::NotSummable(format!("tail bound {tail}")));
    }
    let mut c = vec![0.0; a.len()];
    let mut acc = tail;
    for i in (0..a.len()).rev() {
        acc += a[i];
        c[i] = 2.0 * acc;
    }
    if let Some(&total) = c.first() {
        if total > 2.0 * cap {
            return Err(Error::NotSummable(format!("sum {} exceeds cap {cap}", total / 2.0)));
        }
    }
    Ok(c)
}

/// `Σ_{j>K} C/j²` to third order in `1/K`.
pub fn inverse_square_tail(c: f64, k_last: usize) -> f64 {
    let k = k_last as f64;
    c * (1.0 / k - 0.5 / (k * k) + 1.0 / (6.0 * k * k * k))
}

/// Upper envelope `max_k (ψ_k + c_k)` over levels `k ≥ l` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub l: usize,
    pub k_max: usize,
    pub levels: Vec<usize>,
    pub shifts: Vec<f64>,
    /// Largest rise from a node to its 3×3 neighbourhood maximum.
    pub neighbor_gap: f64,
    /// `sup |nbhd-max(envelope) - max_k nbhd-max(ψ_k + c_k)|`; zero when the
    /// upper semicontinuous regularization is the identity.
    pub regularization_defect: f64,
}

impl EnvelopeGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.x_nodes + j]
    }

    /// `sup |envelope - ψ|` against sampled path values.
    pub fn sup_distance(&self, path: &PathGrid) -> Result<f64> {
        if *path.spec() != self.spec {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", path.spec(), self.spec)));
        }
        Ok(self
            .values
            .iter()
            .zip(path.jets())
            .map(|(e, j)| (e - j.psi).abs())
            .fold(0.0, f64::max))
    }
}

/// Envelope of the members with level `≥ l`. `shifts` align with `members`;
/// `None` means zero shifts.
pub fn envelope(members: &[(usize, &PathGrid)], l: usize, shifts: Option<&[f64]>) -> Result<EnvelopeGrid> {
    if let Some(s) = shifts {
        if s.len() != members.len() {
            return Err(Error::InvalidArgument("one shift per member required".into()));
        }
    }
    let chosen: Vec<(usize, &PathGrid, f64)> = members
        .iter()
        .enumerate()
        .filter(|(_, (k, _))| *k >= l)
        .map(|(i, (k, g))| (*k, *g, shifts.map_or(0.0, |s| s[i])))
        .collect();
    let Some(&(_, first, _)) = chosen.first() else {
        return Err(Error::InvalidArgument(format!("no member with level >= {l}")));
    };
    for (_, g, _) in &chosen {
        first.ensure_same_grid(g)?;
    }
    let spec = *first.spec();
    let n = spec.t_nodes * spec.x_nodes;
    let shifted = |m: &(usize, &PathGrid, f64), idx: usize| m.1.jets()[idx].psi + m.2;
    let values: Vec<f64> = (0..n)
        .map(|idx| chosen.iter().map(|m| shifted(m, idx)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let nbhd_max = |f: &dyn Fn(usize) -> f64, i: usize, j: usize| {
        let mut best = f64::NEG_INFINITY;
        for a in i.saturating_sub(1)..=(i + 1).min(spec.t_nodes - 1) {
            for b in j.saturating_sub(1)..=(j + 1).min(spec.x_nodes - 1) {
                best = best.max(f(a * spec.x_nodes + b));
            }
        }
        best
    };
    let mut gap = 0.0f64;
    let mut defect = 0.0f64;
    for i in 0..spec.t_nodes {
        for j in 0..spec.x_nodes {
            let idx = i * spec.x_nodes + j;
            let env_max = nbhd_max(&|p| values[p], i, j);
            let member_max = chosen
                .iter()
                .map(|m| nbhd_max(&|p| shifted(m, p), i, j))
                .fold(f64::NEG_INFINITY, f64::max);
            gap = gap.max(env_max - values[idx]);
            defect = defect.max((env_max - member_max).abs());
        }
    }
    Ok(EnvelopeGrid {
        spec,
        values,
        l,
        k_max: chosen.iter().map(|m| m.0).max().unwrap_or(l),
        levels: chosen.iter().map(|m| m.0).collect(),
        shifts: chosen.iter().map(|m| m.2).collect(),
        neighbor_gap: gap,
        regularization_defect: defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{ConstantPath, LinearPath};
    use crate::potential::{make_dilation_potential, make_fubini_study, make_test_potential, PotentialSpec};

    fn bump() -> RadialPotential {
        make_test_potential(&PotentialSpec::Bump {
            amplitude: 0.3,
            width: 0.5,
            center: 0.5,
        })
        .unwrap()
    }

    fn small_grid() -> GridSpec {
        GridSpec {
            t_nodes: 33,
            x_nodes: 321,
            x_max: 40.0,
        }
    }

    #[test]
    fn constant_path_has_no_mass() {
        let q = build_quadrature(128).unwrap();
        let p = ConstantPath(bump());
        let g = PathGrid::sample(&p, small_grid()).unwrap();
        assert_eq!(ma_mass_bulk(&g).unwrap(), 0.0);
        assert_eq!(ma_mass_boundary(&p, &q).unwrap(), 0.0);
        assert_eq!(path_energy(&p, &q, 8).unwrap(), 0.0);
    }

    #[test]
    fn dilation_geodesic_masses_vanish() {
        let q = build_quadrature(256).unwrap();
        let c = 1.0;
        let bg = BergmanGeodesic::from_pair(&make_fubini_study(), &make_dilation_potential(c).unwrap(), 32, &q)
            .unwrap();
        let r = ma_mass_report(&bg, small_grid(), &q, Exec::default()).unwrap();
        assert!(r.bulk_value.abs() < 1e-8, "{}", r.bulk_value);
        assert!(r.boundary_value.abs() < 1e-10, "{}", r.boundary_value);
        for t in [0.0, 0.3, 1.0] {
            assert!((energy_derivative(&bg, t, &q).unwrap() - c / 2.0).abs() < 1e-12);
        }
        assert!((path_energy(&bg, &q, 16).unwrap() - c * c / 3.0).abs() < 1e-10);
    }

    #[test]
    fn boundary_equals_bulk_on_a_non_geodesic_path() {
        // fixes the angular constant: linear paths carry negative mass
        let q = build_quadrature(256).unwrap();
        let p = LinearPath {
            start: make_fubini_study(),
            end: bump(),
        };
        let spec = GridSpec {
            t_nodes: 65,
            x_nodes: 1601,
            x_max: 40.0,
        };
        let bulk = ma_mass_bulk(&PathGrid::sample(&p, spec).unwrap()).unwrap();
        let boundary = ma_mass_boundary(&p, &q).unwrap();
        assert!(boundary < 0.0);
        assert!(((bulk - boundary) / boundary).abs() < 1e-6, "{bulk} vs {boundary}");
    }

    #[test]
    fn bergman_mass_is_positive_and_consistent() {
        let q = build_quadrature(256).unwrap();
        let bg = BergmanGeodesic::from_pair(&make_fubini_study(), &bump(), 16, &q).unwrap();
        let r = ma_mass_report(&bg, small_grid(), &q, Exec::default()).unwrap();
        assert!(r.boundary_value > 0.0);
        assert!(r.relative_gap() < 0.01, "{r:?}");
        let e0 = energy_derivative(&bg, 0.0, &q).unwrap();
        let e5 = energy_derivative(&bg, 0.5, &q).unwrap();
        let e1 = energy_derivative(&bg, 1.0, &q).unwrap();
        assert!(e0 <= e5 && e5 <= e1);
    }

    #[test]
    fn dirichlet_report_flags_linear_path() {
        let spec = small_grid();
        let lin = LinearPath {
            start: make_fubini_study(),
            end: bump(),
        };
        let r = dirichlet_residual_report(&PathGrid::sample(&lin, spec).unwrap(), &lin.start, &lin.end).unwrap();
        assert!(r.boundary_mismatch < 1e-14);
        assert!(r.sup_residual > 1e-3);
        assert!(r.min_hessian_eigenvalue < 0.0);
    }

    #[test]
    fn shifts_of_inverse_squares() {
        let n = 2000;
        let a: Vec<f64> = (1..=n).map(|k| 1.0 / (k * k) as f64).collect();
        let c = monotone_shift(&a, inverse_square_tail(1.0, n), 10.0).unwrap();
        assert!((c[0] - std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-10);
        assert!((c[0] - 3.28987).abs() < 1e-5);
        for k in 0..n - 1 {
            assert!((c[k] - c[k + 1] - 2.0 * a[k]).abs() < 1e-15);
        }
        assert!(matches!(monotone_shift(&a, 0.0, 1.0), Err(Error::NotSummable(_))));
        assert!(monotone_shift(&[1.0, 2.0], 0.0, 10.0).is_err());
    }

    #[test]
    fn envelope_of_one_member_is_itself() {
        let q = build_quadrature(128).unwrap();
        let bg = BergmanGeodesic::from_pair(&make_fubini_study(), &bump(), 8, &q).unwrap();
        let g = PathGrid::sample(&bg, small_grid()).unwrap();
        let e = envelope(&[(8, &g)], 8, None).unwrap();
        assert_eq!(e.values, g.values());
        assert_eq!(e.regularization_defect, 0.0);
    }

    #[test]
    fn dilation_envelope_is_the_lowest_level() {
        let q = build_quadrature(256).unwrap();
        let phi1 = make_dilation_potential(1.0).unwrap();
        let spec = small_grid();
        let levels = [32, 64, 128];
        let grids: Vec<PathGrid> = levels
            .iter()
            .map(|&k| {
                let bg = BergmanGeodesic::from_pair(&make_fubini_study(), &phi1, k, &q).unwrap();
                PathGrid::sample(&bg, spec).unwrap()
            })
            .collect();
        let members: Vec<(usize, &PathGrid)> = levels.iter().copied().zip(grids.iter()).collect();
        let e = envelope(&members, 32, None).unwrap();
        let shift = (33.0f64 / 32.0).ln() / 32.0;
        for i in 0..spec.t_nodes {
            for j in 0..spec.x_nodes {
                let (t, x) = (spec.t(i), spec.x(j));
                let exact = crate::potential::softplus(x + t);
                assert!((e.value(i, j) - exact - shift).abs() < 1e-9);
            }
        }
        let shifts = [0.3, 0.2, 0.1];
        let s = envelope(&members, 32, Some(&shifts)).unwrap();
        for (a, b) in s.values.iter().zip(&e.values) {
            assert!(*a >= *b && *a <= *b + 0.3);
        }
        let wrong = PathGrid::sample(&ConstantPath(phi1.clone()), small_grid().refined()).unwrap();
        assert!(matches!(
            envelope(&[(8, &wrong), (16, &grids[0])], 8, None),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn slope_of_power_law() {
        let k = [8, 16, 32, 64];
        let y: Vec<f64> = k.iter().map(|&v| 3.0 / v as f64).collect();
        assert!((loglog_slope(&k, &y) + 1.0).abs() < 1e-12);
    }
}
