//! Quadrature rules on the reference triangle `{(ξ,η): ξ,η ≥ 0, ξ+η ≤ 1}`
//! and on segments.

use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleName {
    /// One point at the centroid, degree 1.
    Midpoint,
    /// Three interior points, degree 2.
    Gauss3,
    /// Seven points, degree 5.
    Gauss7,
    /// Conical Gauss product rule exact to degree ≥ 10, used as a reference.
    Oracle,
}

/// Points and weights on the reference triangle. Weights sum to 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub name: RuleName,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(name: RuleName) -> Self {
        match name {
            RuleName::Midpoint => Self {
                name,
                points: vec![[1.0 / 3.0, 1.0 / 3.0]],
                weights: vec![0.5],
            },
            RuleName::Gauss3 => Self {
                name,
                points: vec![
                    [1.0 / 6.0, 1.0 / 6.0],
                    [2.0 / 3.0, 1.0 / 6.0],
                    [1.0 / 6.0, 2.0 / 3.0],
                ],
                weights: vec![1.0 / 6.0; 3],
            },
            RuleName::Gauss7 => {
                let r = 15f64.sqrt();
                let (a1, b1, w1) = (
                    (9.0 - 2.0 * r) / 21.0,
                    (6.0 + r) / 21.0,
                    (155.0 + r) / 1200.0,
                );
                let (a2, b2, w2) = (
                    (9.0 + 2.0 * r) / 21.0,
                    (6.0 - r) / 21.0,
                    (155.0 - r) / 1200.0,
                );
                let w0 = 0.225;
                let mut points = vec![[1.0 / 3.0, 1.0 / 3.0]];
                let mut weights = vec![w0];
                for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
                    // barycentric (a,b,b) and permutations; (ξ,η) are the last two.
                    points.extend([[b, b], [a, b], [b, a]]);
                    weights.extend([w; 3]);
                }
                let weights = weights.into_iter().map(|w| 0.5 * w).collect();
                Self {
                    name,
                    points,
                    weights,
                }
            }
            RuleName::Oracle => {
                let (x, w) = gauss_legendre(8);
                let mut points = Vec::with_capacity(64);
                let mut weights = Vec::with_capacity(64);
                // Collapsed square: ξ = u, η = v(1-u), Jacobian (1-u).
                for i in 0..x.len() {
                    for j in 0..x.len() {
                        let u = x[i];
                        let v = x[j];
                        points.push([u, v * (1.0 - u)]);
                        weights.push(w[i] * w[j] * (1.0 - u));
                    }
                }
                Self {
                    name,
                    points,
                    weights,
                }
            }
        }
    }

    /// Maps the rule onto a physical triangle: yields `(point, weight)` pairs
    /// whose weights sum to the triangle area.
    pub fn on_triangle(&self, tri: &[Point; 3]) -> impl Iterator<Item = (Point, f64)> + '_ {
        let [a, b, c] = *tri;
        let e1 = [b[0] - a[0], b[1] - a[1]];
        let e2 = [c[0] - a[0], c[1] - a[1]];
        let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
        let tri_pts = (a, e1, e2);
        self.points.iter().zip(&self.weights).map(move |(p, &w)| {
            let (a, e1, e2) = tri_pts;
            (
                [
                    a[0] + e1[0] * p[0] + e2[0] * p[1],
                    a[1] + e1[1] * p[0] + e2[1] * p[1],
                ],
                w * jac,
            )
        })
    }

    pub fn integrate<F: FnMut(Point) -> f64>(&self, tri: &[Point; 3], mut f: F) -> f64 {
        self.on_triangle(tri).map(|(p, w)| w * f(p)).sum()
    }
}

/// Gauss–Legendre nodes and weights on [0,1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Integrates `f` over the segment `[a, b]` with an `n`-point Gauss rule.
pub fn integrate_segment<F: FnMut(Point) -> f64>(a: Point, b: Point, n: usize, mut f: F) -> f64 {
    let (x, w) = gauss_legendre(n);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    x.iter()
        .zip(&w)
        .map(|(&t, &wt)| wt * len * f([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    // ∫_T x^i y^j over the reference triangle = i! j! / (i + j + 2)!
    fn monomial_exact(i: u32, j: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(i) * fact(j) / fact(i + j + 2)
    }

    fn reference() -> [Point; 3] {
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    }

    fn check_degree(name: RuleName, degree: u32) {
        let rule = QuadratureRule::new(name);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 0.5).abs() < 1e-15);
        for i in 0..=degree {
            for j in 0..=(degree - i) {
                let q = rule.integrate(&reference(), |p| p[0].powi(i as i32) * p[1].powi(j as i32));
                let e = monomial_exact(i, j);
                assert!((q - e).abs() < 1e-14, "{name:?} x^{i} y^{j}: {q} vs {e}");
            }
        }
    }

    #[test]
    fn exactness_degrees() {
        check_degree(RuleName::Midpoint, 1);
        check_degree(RuleName::Gauss3, 2);
        check_degree(RuleName::Gauss7, 5);
        check_degree(RuleName::Oracle, 10);
    }

    #[test]
    fn gauss7_x2y3() {
        let q = QuadratureRule::new(RuleName::Gauss7)
            .integrate(&reference(), |p| p[0].powi(2) * p[1].powi(3));
        assert!((q - 2.0 * 6.0 / 5040.0).abs() < 1e-14);
    }

    #[test]
    fn gauss3_not_degree3() {
        let q = QuadratureRule::new(RuleName::Gauss3).integrate(&reference(), |p| p[0].powi(3));
        assert!((q - monomial_exact(3, 0)).abs() > 1e-6);
    }

    #[test]
    fn mapped_weights_sum_to_area() {
        let tri = [[0.2, 0.1], [1.3, 0.4], [0.5, 2.0]];
        let area = 0.5 * ((1.1 * 1.9) - (0.3 * 0.3));
        let rule = QuadratureRule::new(RuleName::Gauss7);
        let s: f64 = rule.on_triangle(&tri).map(|(_, w)| w).sum();
        assert!((s - area).abs() < 1e-14);
    }

    #[test]
    fn segment_rule() {
        for n in 1..8 {
            let (x, w) = gauss_legendre(n);
            assert_eq!(x.len(), n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        let v = integrate_segment([0.0, 0.0], [2.0, 0.0], 3, |p| p[0].powi(5));
        assert!((v - 64.0 / 6.0).abs() < 1e-12);
    }
}
