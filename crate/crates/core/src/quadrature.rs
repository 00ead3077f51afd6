//! Gauss–Legendre rules and collapsed (Duffy) Gauss rules on triangles.

use std::sync::OnceLock;

use thiserror::Error;

use crate::mesh::{signed_area, Point};

pub const MAX_DEGREE: usize = 9;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature degree {0} unsupported (max {MAX_DEGREE})")]
    UnsupportedDegree(usize),
}

/// Points and weights in physical coordinates. Interface rules carry one
/// unit normal per point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Option<Vec<Point>>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn append(&mut self, other: QuadratureRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
        if let Some(n) = other.normals {
            self.normals.get_or_insert_with(Vec::new).extend(n);
        }
    }
}

/// `n`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for i in 0..n {
        // Newton on P_n from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs.push(0.5 * (1.0 - x));
        ws.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    xs.reverse();
    ws.reverse();
    (xs, ws)
}

/// Number of Gauss points needed for exactness up to `degree` in 1D.
pub fn gauss_points_for_degree(degree: usize) -> usize {
    (degree + 2) / 2
}

/// Rule on the reference triangle `{(ξ,η): ξ,η ≥ 0, ξ+η ≤ 1}`.
#[derive(Clone, Debug)]
pub struct ReferenceRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

fn build_reference_rule(degree: usize) -> ReferenceRule {
    // ξ = u, η = v(1−u), dξdη = (1−u) du dv; the extra factor raises the
    // degree in u by one.
    let (ux, uw) = gauss_legendre(gauss_points_for_degree(degree + 1));
    let (vx, vw) = gauss_legendre(gauss_points_for_degree(degree));
    let mut points = Vec::with_capacity(ux.len() * vx.len());
    let mut weights = Vec::with_capacity(ux.len() * vx.len());
    for (u, wu) in ux.iter().zip(&uw) {
        for (v, wv) in vx.iter().zip(&vw) {
            points.push([*u, v * (1.0 - u)]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    ReferenceRule { points, weights }
}

pub fn reference_triangle_rule(degree: usize) -> Result<&'static ReferenceRule, QuadratureError> {
    static RULES: OnceLock<Vec<ReferenceRule>> = OnceLock::new();
    if degree > MAX_DEGREE {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    let rules = RULES.get_or_init(|| (0..=MAX_DEGREE).map(build_reference_rule).collect());
    Ok(&rules[degree])
}

/// Affine image of the reference rule on a triangle (either orientation).
pub fn triangle_rule(tri: &[Point; 3], degree: usize) -> Result<QuadratureRule, QuadratureError> {
    let reference = reference_triangle_rule(degree)?;
    let jac = 2.0 * signed_area(&tri[0], &tri[1], &tri[2]).abs();
    let (e1, e2) = (tri[1] - tri[0], tri[2] - tri[0]);
    Ok(QuadratureRule {
        points: reference.points.iter().map(|[s, t]| tri[0] + e1 * *s + e2 * *t).collect(),
        weights: reference.weights.iter().map(|w| w * jac).collect(),
        normals: None,
    })
}

/// Gauss rule on the segment `a → b`; weights carry arc length.
pub fn segment_rule(a: &Point, b: &Point, degree: usize) -> Result<QuadratureRule, QuadratureError> {
    if degree > MAX_DEGREE {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    let (xs, ws) = gauss_legendre(gauss_points_for_degree(degree));
    let len = (b - a).norm();
    Ok(QuadratureRule {
        points: xs.iter().map(|t| a + (b - a) * *t).collect(),
        weights: ws.iter().map(|w| w * len).collect(),
        normals: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫ ξ^a η^b over the reference triangle = a! b! / (a+b+2)!.
    fn reference_monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=6 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn reference_rules_exact_to_degree() {
        for degree in 0..=MAX_DEGREE {
            let r = reference_triangle_rule(degree).unwrap();
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = reference_monomial(a, b);
                    assert!((q - exact).abs() <= 1e-12 * exact, "deg {degree}: {a},{b}");
                }
            }
        }
    }

    #[test]
    fn degree_ten_rejected() {
        assert_eq!(reference_triangle_rule(10).unwrap_err(), QuadratureError::UnsupportedDegree(10));
        assert!(segment_rule(&Point::zeros(), &Point::new(1.0, 0.0), 10).is_err());
    }

    #[test]
    fn segment_integrals() {
        let r = segment_rule(&Point::new(0.5, 0.0), &Point::new(0.5, 0.5), 9).unwrap();
        assert_eq!(r.len(), 5);
        assert!((r.measure() - 0.5).abs() < 1e-15);
        assert!((r.integrate(|p| p.y) - 0.125).abs() < 1e-15);
    }
}
