//! S¹-invariant metrics on O(1) → P¹.
//!
//! A metric `h = h_FS e^{-φ}` is described by its relative potential `φ(x)`
//! in the logarithmic coordinate `x = log|z|²`. The fiber potential
//! `ψ(x) = log(1 + eˣ) + φ(x)` is strictly convex and `ψ'` maps ℝ onto the
//! moment interval (0, 1); with total volume normalized to 1 the area form
//! is `ψ''(x) dx = dp`.

use crate::error::{Error, Result};

/// Half-width of the default x-window.
pub const DEFAULT_X_MAX: f64 = 40.0;

/// `log(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `σ'(x) = σ(x)σ(-x)`.
pub fn sigmoid_prime(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `log(p / q)` for a complementary pair `p + q = 1`.
pub fn logit(p: f64, q: f64) -> f64 {
    p.ln() - q.ln()
}

/// Shapes of relative potentials.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Shape {
    FubiniStudy,
    /// `log((1 + e^{x+c}) / (1 + eˣ))`, the pullback of Fubini–Study by a dilation.
    Dilation { shift: f64 },
    /// `a·exp(-(p - m)² / 2w²)` in the Fubini–Study moment `p = σ(x)`, so
    /// the bump is a smooth function on P¹ including the poles.
    Bump {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    Sampled(CubicSpline),
    Sum(Vec<Shape>),
    /// `(1/k)·log Σ_j e^{c_j + j·x} - log(1 + eˣ)`, the Fubini–Study pullback
    /// through a monomial basis of level k; `log_coeffs[j] = c_j`.
    LevelSum { level: usize, log_coeffs: Vec<f64> },
}

impl Shape {
    /// `(φ, φ', φ'')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self {
            Shape::FubiniStudy => (0.0, 0.0, 0.0),
            Shape::Dilation { shift } => {
                let c = *shift;
                (
                    softplus_diff(x + c, x),
                    if x >= 0.0 {
                        sigmoid(-x) - sigmoid(-x - c)
                    } else {
                        sigmoid(x + c) - sigmoid(x)
                    },
                    sigmoid_prime(x + c) - sigmoid_prime(x),
                )
            }
            Shape::Bump {
                amplitude,
                width,
                center,
            } => {
                let (p, q) = (sigmoid(x), sigmoid(-x));
                let u = (p - center) / width;
                let g = amplitude * (-0.5 * u * u).exp();
                let gp = -g * u / width;
                let gpp = g * (u * u - 1.0) / (width * width);
                let pq = p * q;
                (g, gp * pq, gpp * pq * pq + gp * pq * (q - p))
            }
            Shape::Sampled(s) => s.eval(x),
            Shape::Sum(parts) => parts.iter().fold((0.0, 0.0, 0.0), |acc, s| {
                let (a, b, c) = s.eval(x);
                (acc.0 + a, acc.1 + b, acc.2 + c)
            }),
            Shape::LevelSum { level, log_coeffs } => {
                let k = *level as f64;
                let m = log_coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c + j as f64 * x)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                let mut mean = 0.0;
                let w: Vec<f64> = log_coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let w = (c + j as f64 * x - m).exp();
                        s += w;
                        mean += w * j as f64;
                        w
                    })
                    .collect();
                mean /= s;
                let var = w
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * (j as f64 - mean).powi(2))
                    .sum::<f64>()
                    / s;
                (
                    (m + s.ln()) / k - softplus(x),
                    mean / k - sigmoid(x),
                    var / k - sigmoid_prime(x),
                )
            }
        }
    }

    /// Limits of φ at x → -∞ and x → +∞.
    pub fn asymptotic_limits(&self) -> (f64, f64) {
        match self {
            Shape::FubiniStudy => (0.0, 0.0),
            Shape::Bump {
                amplitude,
                width,
                center,
            } => {
                let g = |p: f64| amplitude * (-0.5 * ((p - center) / width).powi(2)).exp();
                (g(0.0), g(1.0))
            }
            Shape::Dilation { shift } => (0.0, *shift),
            Shape::Sampled(s) => (s.values[0], *s.values.last().unwrap()),
            Shape::Sum(parts) => parts.iter().fold((0.0, 0.0), |acc, s| {
                let (a, b) = s.asymptotic_limits();
                (acc.0 + a, acc.1 + b)
            }),
            Shape::LevelSum { level, log_coeffs } => {
                let k = *level as f64;
                (log_coeffs[0] / k, log_coeffs[log_coeffs.len() - 1] / k)
            }
        }
    }
}

/// `softplus(a) - softplus(b)` for nearby arguments, accurate when both are large.
pub fn softplus_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        (a - b) + ((-a).exp().ln_1p() - (-b).exp().ln_1p())
    } else {
        softplus(a) - softplus(b)
    }
}

/// Clamped cubic spline (zero end slopes) extended by constants outside its knots.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 4 || values.len() != n {
            return Err(Error::InvalidArgument(
                "spline needs at least 4 knots and matching values".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "spline knots must be strictly increasing with finite values".into(),
            ));
        }
        // tridiagonal system for second derivatives with s'(x_0) = s'(x_{n-1}) = 0
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut lower = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = h[0] / 3.0;
        upper[0] = h[0] / 6.0;
        rhs[0] = (values[1] - values[0]) / h[0];
        for i in 1..n - 1 {
            lower[i] = h[i - 1] / 6.0;
            diag[i] = (h[i - 1] + h[i]) / 3.0;
            upper[i] = h[i] / 6.0;
            rhs[i] = (values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1];
        }
        lower[n - 1] = h[n - 2] / 6.0;
        diag[n - 1] = h[n - 2] / 3.0;
        rhs[n - 1] = -(values[n - 1] - values[n - 2]) / h[n - 2];
        let second = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        Ok(Self {
            knots,
            values,
            second,
        })
    }

    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return (self.values[0], 0.0, 0.0);
        }
        if x >= self.knots[n - 1] {
            return (self.values[n - 1], 0.0, 0.0);
        }
        let i = self.knots.partition_point(|&k| k <= x).saturating_sub(1).min(n - 2);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }
}

fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// A validated S¹-invariant relative potential with `ψ'' > 0` on its scan grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPotential {
    shape: Shape,
}

/// Parameters for the built-in potential families.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "lowercase"))]
pub enum PotentialSpec {
    Fs,
    Dilation {
        c: f64,
    },
    Bump {
        amplitude: f64,
        width: f64,
        /// Moment value of the peak, default ½.
        #[cfg_attr(feature = "serde", serde(default = "half"))]
        center: f64,
    },
    /// User data: knots and values, interpolated by a clamped cubic spline.
    Sampled { x: Vec<f64>, phi: Vec<f64> },
    Sum { parts: Vec<PotentialSpec> },
}

#[cfg(feature = "serde")]
fn half() -> f64 {
    0.5
}

impl PotentialSpec {
    fn shape(&self) -> Result<Shape> {
        Ok(match self {
            PotentialSpec::Fs => Shape::FubiniStudy,
            PotentialSpec::Dilation { c } => {
                if !c.is_finite() {
                    return Err(Error::InvalidArgument("dilation shift must be finite".into()));
                }
                Shape::Dilation { shift: *c }
            }
            PotentialSpec::Bump {
                amplitude,
                width,
                center,
            } => {
                if !(amplitude.is_finite() && center.is_finite() && *width > 0.0 && width.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "bump needs finite amplitude, center and width > 0".into(),
                    ));
                }
                Shape::Bump {
                    amplitude: *amplitude,
                    width: *width,
                    center: *center,
                }
            }
            PotentialSpec::Sampled { x, phi } => {
                Shape::Sampled(CubicSpline::new(x.clone(), phi.clone())?)
            }
            PotentialSpec::Sum { parts } => {
                Shape::Sum(parts.iter().map(|p| p.shape()).collect::<Result<_>>()?)
            }
        })
    }
}

/// The Fubini–Study metric itself, `φ ≡ 0`.
pub fn make_fubini_study() -> RadialPotential {
    RadialPotential {
        shape: Shape::FubiniStudy,
    }
}

/// `φ_c(x) = log((1 + e^{x+c}) / (1 + eˣ))`.
pub fn make_dilation_potential(c: f64) -> Result<RadialPotential> {
    make_test_potential(&PotentialSpec::Dilation { c })
}

/// Builds a potential from a family spec and checks `ψ'' > 0` on the scan grid.
pub fn make_test_potential(spec: &PotentialSpec) -> Result<RadialPotential> {
    RadialPotential::from_shape(spec.shape()?)
}

impl RadialPotential {
    /// Validates a shape by scanning `ψ''` on `[-X_max, X_max]` with step 1e-2.
    pub fn from_shape(shape: Shape) -> Result<Self> {
        let pot = Self { shape };
        let n = (2.0 * DEFAULT_X_MAX / 1e-2) as usize;
        for i in 0..=n {
            let x = -DEFAULT_X_MAX + i as f64 * 1e-2;
            let v = pot.ddpsi(x);
            if !(v > 0.0) {
                return Err(Error::PositivityViolation { x, value: v });
            }
        }
        Ok(pot)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.shape.eval(x).0
    }

    pub fn d_phi(&self, x: f64) -> f64 {
        self.shape.eval(x).1
    }

    pub fn dd_phi(&self, x: f64) -> f64 {
        self.shape.eval(x).2
    }

    pub fn asymptotic_limits(&self) -> (f64, f64) {
        self.shape.asymptotic_limits()
    }

    pub fn psi(&self, x: f64) -> f64 {
        softplus(x) + self.phi(x)
    }

    pub fn dpsi(&self, x: f64) -> f64 {
        sigmoid(x) + self.d_phi(x)
    }

    /// `1 - ψ'(x)`, accurate when ψ' is close to 1.
    pub fn dpsi_complement(&self, x: f64) -> f64 {
        sigmoid(-x) - self.d_phi(x)
    }

    pub fn ddpsi(&self, x: f64) -> f64 {
        sigmoid_prime(x) + self.dd_phi(x)
    }

    /// `sup |φ|` over the default window together with the asymptotic limits.
    pub fn sup_norm(&self) -> f64 {
        let (a, b) = self.asymptotic_limits();
        let n = 80_000;
        let h = 2.0 * DEFAULT_X_MAX / n as f64;
        (0..=n)
            .map(|i| self.phi(-DEFAULT_X_MAX + i as f64 * h).abs())
            .fold(a.abs().max(b.abs()), f64::max)
    }

    /// Solves `ψ'(x) = p` given the complementary pair `(p, 1 - p)`.
    pub fn inverse_moment(&self, p: f64, q: f64) -> Result<f64> {
        if !(p > 0.0 && q > 0.0) {
            return Err(Error::ConvexityViolation(format!(
                "moment value ({p}, {q}) outside (0, 1)"
            )));
        }
        let lower_half = p <= 0.5;
        let g = |x: f64| {
            if lower_half {
                self.dpsi(x) - p
            } else {
                q - self.dpsi_complement(x)
            }
        };
        solve_monotone(g, |x| self.ddpsi(x), logit(p, q))
    }
}

/// `ψ'(x)` for the potential `phi`.
pub fn moment_map(phi: &RadialPotential, x: f64) -> f64 {
    phi.dpsi(x)
}

/// Safeguarded Newton iteration for an increasing function `g` with derivative `dg`.
pub(crate) fn solve_monotone<G, D>(g: G, dg: D, guess: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut lo = guess - 1.0;
    let mut hi = guess + 1.0;
    let mut step = 1.0;
    let mut glo = g(lo);
    let mut expansions = 0;
    while glo > 0.0 {
        hi = lo;
        step *= 2.0;
        lo -= step;
        glo = g(lo);
        expansions += 1;
        if expansions > 60 {
            return Err(Error::ConvexityViolation(
                "root bracket failed on the left".into(),
            ));
        }
    }
    let mut ghi = g(hi);
    while ghi < 0.0 {
        lo = hi;
        step *= 2.0;
        hi += step;
        ghi = g(hi);
        expansions += 1;
        if expansions > 120 {
            return Err(Error::ConvexityViolation(
                "root bracket failed on the right".into(),
            ));
        }
    }
    let mut x = guess.clamp(lo, hi);
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let mut next = x - gx / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1.0) || hi - lo <= 2.0 * f64::EPSILON * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}
