//! Gauss–Legendre rules on the moment interval (0, 1) and composite rules
//! on bounded x-intervals.

use crate::error::{Error, Result};

/// Gauss–Legendre rule on (0, 1).
///
/// In the moment variable p the Fubini–Study area form is exactly `dp`, so
/// the weights sum to the total volume 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    /// `1 - nodes[i]`, stored separately so nodes near 1 keep full relative
    /// precision in their complement.
    complements: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn complements(&self) -> &[f64] {
        &self.complements
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }

    /// `∫₀¹ f(p) dp`, with `f` receiving `(p, 1 - p)`.
    pub fn integrate<F: FnMut(f64, f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.complements)
            .zip(&self.weights)
            .map(|((&p, &q), &w)| w * f(p, q))
            .sum()
    }
}

/// Builds the `n`-point Gauss–Legendre rule mapped to (0, 1).
pub fn build_quadrature(n: usize) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature needs at least 2 nodes, got {n}"
        )));
    }
    let (xi, w) = gauss_legendre(n);
    // xi is ascending on (-1, 1); the lower half gives accurate small p and
    // the mirrored upper half reuses those values as complements.
    let mut nodes = vec![0.0; n];
    let mut complements = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mirror = n - 1 - i;
        if i <= mirror {
            let small = 0.5 * (1.0 + xi[i]);
            nodes[i] = small;
            complements[i] = 1.0 - small;
            nodes[mirror] = 1.0 - small;
            complements[mirror] = small;
            if i == mirror {
                nodes[i] = 0.5;
                complements[i] = 0.5;
            }
        }
        weights[i] = 0.5 * w[i];
    }
    // symmetrize weights so the rule is exactly reflection invariant
    for i in 0..n / 2 {
        let m = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = m;
        weights[n - 1 - i] = m;
    }
    Ok(QuadratureRule {
        nodes,
        complements,
        weights,
    })
}

/// Nodes (ascending) and weights of the `n`-point rule on (-1, 1).
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut z = theta.cos() * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = z;
        x[i] = -z;
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on `[a, b]` with equal panels.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Result<Self> {
        if !(b > a) || panels == 0 || order < 2 {
            return Err(Error::InvalidArgument(format!(
                "bad composite rule [{a}, {b}], panels {panels}, order {order}"
            )));
        }
        let (xi, wi) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut points = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (x, w) in xi.iter().zip(&wi) {
                points.push(lo + 0.5 * h * (1.0 + x));
                weights.push(0.5 * h * w);
            }
        }
        Ok(Self { points, weights })
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_factorial(n: usize) -> f64 {
        (1..=n).map(|i| (i as f64).ln()).sum()
    }

    #[test]
    fn two_point_rule() {
        let q = build_quadrature(2).unwrap();
        let d = 0.5 / 3f64.sqrt();
        assert!((q.nodes()[0] - (0.5 - d)).abs() < 1e-15);
        assert!((q.nodes()[1] - (0.5 + d)).abs() < 1e-15);
        assert!((q.weights()[0] - 0.5).abs() < 1e-15);
        assert!((q.weights()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_one() {
        for n in [2, 3, 7, 64, 255, 384] {
            let q = build_quadrature(n).unwrap();
            let s: f64 = q.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "n={n}: {s}");
            assert!(q.weights().iter().all(|&w| w > 0.0));
            for (p, c) in q.nodes().iter().zip(q.complements()) {
                assert!((p + c - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn beta_integrals_exact_at_64_nodes() {
        let q = build_quadrature(64).unwrap();
        for k in 0..=64usize {
            for j in 0..=k {
                let exact =
                    (ln_factorial(j) + ln_factorial(k - j) - ln_factorial(k + 1)).exp();
                let got = q.integrate(|p, c| p.powi(j as i32) * c.powi((k - j) as i32));
                assert!(
                    ((got - exact) / exact).abs() < 1e-12,
                    "k={k} j={j}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn rejects_single_node() {
        assert!(build_quadrature(1).is_err());
    }

    #[test]
    fn composite_integrates_gaussian() {
        let r = CompositeRule::new(-10.0, 10.0, 40, 8).unwrap();
        let v = r.integrate(|x| (-x * x).exp());
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }
}
