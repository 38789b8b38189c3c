//! The quintic Argyris triangle.
//!
//! Argyris elements are not affine-equivalent, so each element builds its own
//! basis: the 21 degree-of-freedom functionals are applied to the 21 quintic
//! monomials in scaled local coordinates and the resulting matrix is inverted.
//!
//! Local DOF order: for vertex `k` (`6k .. 6k+6`) value, ∂x, ∂y, ∂xx, ∂xy, ∂yy;
//! then `18 + k` is the normal derivative at the midpoint of local edge `k`,
//! which joins local vertices `k` and `(k + 1) % 3`. Edge normals are global
//! (supplied by the caller), so no sign fix-up is needed at assembly.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};

pub const LOCAL_DOFS: usize = 21;

/// Derivative order of each local DOF functional.
pub const DOF_ORDER: [i32; LOCAL_DOFS] = [
    0, 1, 1, 2, 2, 2, 0, 1, 1, 2, 2, 2, 0, 1, 1, 2, 2, 2, 1, 1, 1,
];

/// Exponents `(i, j)` of the monomials `s^i t^j`, `i + j ≤ 5`.
const MONOMIALS: [(i32, i32); LOCAL_DOFS] = {
    let mut out = [(0, 0); LOCAL_DOFS];
    let mut k = 0;
    let mut d = 0;
    while d <= 5 {
        let mut j = 0;
        while j <= d {
            out[k] = (d - j, j);
            k += 1;
            j += 1;
        }
        d += 1;
    }
    out
};

/// Values and derivatives of one function: `[v, ∂x, ∂y, ∂xx, ∂xy, ∂yy]`.
pub type Jet = [f64; 6];

fn powi(x: f64, k: i32) -> f64 {
    if k < 0 {
        0.0
    } else {
        x.powi(k)
    }
}

/// Jets of all monomials at `(s, t)` with respect to `s, t`.
fn monomial_jets(s: f64, t: f64) -> [Jet; LOCAL_DOFS] {
    MONOMIALS.map(|(i, j)| {
        let (fi, fj) = (i as f64, j as f64);
        [
            powi(s, i) * powi(t, j),
            fi * powi(s, i - 1) * powi(t, j),
            fj * powi(s, i) * powi(t, j - 1),
            fi * (fi - 1.0) * powi(s, i - 2) * powi(t, j),
            fi * fj * powi(s, i - 1) * powi(t, j - 1),
            fj * (fj - 1.0) * powi(s, i) * powi(t, j - 2),
        ]
    })
}

#[derive(Debug, Clone)]
pub struct ArgyrisElement {
    center: [f64; 2],
    scale: f64,
    /// `coeffs[m][j]`: coefficient of monomial `m` in basis function `j`.
    coeffs: Box<[[f64; LOCAL_DOFS]; LOCAL_DOFS]>,
}

impl ArgyrisElement {
    /// `normals[k]` is the unit normal used by the DOF on local edge `k`.
    pub fn new(index: usize, vertices: [[f64; 2]; 3], normals: [[f64; 2]; 3]) -> Result<Self> {
        let [a, b, c] = vertices;
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let dist = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        let scale = dist(a, b).max(dist(b, c)).max(dist(c, a));
        if !(area2.abs() > 1e-12 * scale * scale) {
            return Err(Error::DegenerateElement(index));
        }
        let center = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        let local = |p: [f64; 2]| [(p[0] - center[0]) / scale, (p[1] - center[1]) / scale];

        // Vandermonde of the scaled functionals (derivatives taken in s, t)
        let mut v = Mat::<f64>::zeros(LOCAL_DOFS, LOCAL_DOFS);
        for k in 0..3 {
            let [s, t] = local(vertices[k]);
            let jets = monomial_jets(s, t);
            for (m, jet) in jets.iter().enumerate() {
                for d in 0..6 {
                    v[(6 * k + d, m)] = jet[d];
                }
            }
        }
        for k in 0..3 {
            let p = vertices[k];
            let q = vertices[(k + 1) % 3];
            let [s, t] = local([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            let n = normals[k];
            for (m, jet) in monomial_jets(s, t).iter().enumerate() {
                v[(18 + k, m)] = n[0] * jet[1] + n[1] * jet[2];
            }
        }
        let inv = v.partial_piv_lu().solve(Mat::<f64>::identity(LOCAL_DOFS, LOCAL_DOFS));
        let mut coeffs = Box::new([[0.0; LOCAL_DOFS]; LOCAL_DOFS]);
        for m in 0..LOCAL_DOFS {
            for j in 0..LOCAL_DOFS {
                let x = inv[(m, j)] * scale.powi(DOF_ORDER[j]);
                if !x.is_finite() {
                    return Err(Error::DegenerateElement(index));
                }
                coeffs[m][j] = x;
            }
        }
        Ok(Self {
            center,
            scale,
            coeffs,
        })
    }

    /// Jets of all 21 local basis functions at a physical point.
    pub fn basis(&self, p: [f64; 2]) -> [Jet; LOCAL_DOFS] {
        let h = self.scale;
        let s = (p[0] - self.center[0]) / h;
        let t = (p[1] - self.center[1]) / h;
        let mj = monomial_jets(s, t);
        let factors = [1.0, 1.0 / h, 1.0 / h, 1.0 / (h * h), 1.0 / (h * h), 1.0 / (h * h)];
        let mut out = [[0.0; 6]; LOCAL_DOFS];
        for (m, jet) in mj.iter().enumerate() {
            let row = &self.coeffs[m];
            for j in 0..LOCAL_DOFS {
                let c = row[j];
                if c != 0.0 {
                    for d in 0..6 {
                        out[j][d] += c * jet[d];
                    }
                }
            }
        }
        for jet in out.iter_mut() {
            for d in 0..6 {
                jet[d] *= factors[d];
            }
        }
        out
    }

    /// Jet of `Σ_j local[j] φ_j` at `p`.
    pub fn combine(&self, local: &[f64; LOCAL_DOFS], p: [f64; 2]) -> Jet {
        let basis = self.basis(p);
        let mut out = [0.0; 6];
        for (c, jet) in local.iter().zip(basis.iter()) {
            for d in 0..6 {
                out[d] += c * jet[d];
            }
        }
        out
    }
}

/// Applies the 21 local functionals to a function given by its jet.
pub fn apply_functionals(
    vertices: [[f64; 2]; 3],
    normals: [[f64; 2]; 3],
    jet: impl Fn([f64; 2]) -> Jet,
) -> [f64; LOCAL_DOFS] {
    let mut out = [0.0; LOCAL_DOFS];
    for k in 0..3 {
        let j = jet(vertices[k]);
        out[6 * k..6 * k + 6].copy_from_slice(&j);
    }
    for k in 0..3 {
        let p = vertices[k];
        let q = vertices[(k + 1) % 3];
        let j = jet([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        out[18 + k] = normals[k][0] * j[1] + normals[k][1] * j[2];
    }
    out
}
