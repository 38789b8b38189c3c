//! Quadrature on the reference triangle and tetrahedron.
//!
//! Rules of degree ≥ 2 are collapsed (Duffy) tensor products of Gauss–Legendre
//! rules; the degree-≤1 rules are the centroid rules.

use crate::error::{Error, Result};

pub const MAX_TRIANGLE_DEGREE: usize = 12;
pub const MAX_TET_DEGREE: usize = 8;

/// Quadrature rule over a reference simplex with `B` barycentric coordinates.
///
/// Weights sum to the reference measure: 1/2 for the triangle with vertices
/// (0,0), (1,0), (0,1) and 1/6 for the unit tetrahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const B: usize> {
    pub points: Vec<[f64; B]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

pub type TriangleRule = QuadratureRule<3>;
pub type TetRule = QuadratureRule<4>;

impl<const B: usize> QuadratureRule<B> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Iterates `(barycentric point, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64; B], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Cartesian coordinates of each point in the reference simplex.
    pub fn reference_point(bary: &[f64; B]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, v) in bary.iter().skip(1).enumerate() {
            out[k] = *v;
        }
        out
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Newton iteration on P_m from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 0 { 1.0 } else { p1 };
            let pm1 = if m <= 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    // ascending order on [0, 1]
    (nodes, weights)
}

/// Rule on the reference triangle exact for polynomials of total degree `degree`.
pub fn quadrature_triangle(degree: usize) -> Result<TriangleRule> {
    if degree > MAX_TRIANGLE_DEGREE {
        return Err(Error::UnsupportedQuadrature {
            shape: "triangle",
            degree,
            max: MAX_TRIANGLE_DEGREE,
        });
    }
    if degree <= 1 {
        return Ok(TriangleRule {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![0.5],
            exact_degree: 1,
        });
    }
    // x = u, y = (1 - u) v, Jacobian (1 - u): degree + 1 in u
    let m = (degree + 3) / 2;
    let (g, w) = gauss_legendre(m);
    let mut rule = TriangleRule {
        points: Vec::with_capacity(m * m),
        weights: Vec::with_capacity(m * m),
        exact_degree: 2 * m - 2,
    };
    for i in 0..m {
        for j in 0..m {
            let x = g[i];
            let y = (1.0 - g[i]) * g[j];
            rule.points.push([1.0 - x - y, x, y]);
            rule.weights.push(w[i] * w[j] * (1.0 - g[i]));
        }
    }
    Ok(rule)
}

/// Rule on the reference tetrahedron exact for polynomials of total degree `degree`.
pub fn quadrature_tet(degree: usize) -> Result<TetRule> {
    if degree > MAX_TET_DEGREE {
        return Err(Error::UnsupportedQuadrature {
            shape: "tetrahedron",
            degree,
            max: MAX_TET_DEGREE,
        });
    }
    if degree <= 1 {
        return Ok(TetRule {
            points: vec![[0.25; 4]],
            weights: vec![1.0 / 6.0],
            exact_degree: 1,
        });
    }
    // x = u, y = (1-u) v, z = (1-u)(1-v) w, Jacobian (1-u)^2 (1-v)
    let m = (degree + 4) / 2;
    let (g, w) = gauss_legendre(m);
    let mut rule = TetRule {
        points: Vec::with_capacity(m * m * m),
        weights: Vec::with_capacity(m * m * m),
        exact_degree: 2 * m - 3,
    };
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let (u, v, s) = (g[i], g[j], g[k]);
                let x = u;
                let y = (1.0 - u) * v;
                let z = (1.0 - u) * (1.0 - v) * s;
                rule.points.push([1.0 - x - y - z, x, y, z]);
                rule
                    .weights
                    .push(w[i] * w[j] * w[k] * (1.0 - u) * (1.0 - u) * (1.0 - v));
            }
        }
    }
    Ok(rule)
}
