//! Error norms of discrete fields against exact functions.

use crate::functions::{PlateFunction, VectorFunction};
use crate::plate::PlateField;
use crate::quadrature::{quadrature_tet, quadrature_triangle};
use crate::stokes::space::barycentric_gradients;
use crate::stokes::{FluidField, PressureField};
use crate::Result;

pub const PLATE_ERROR_DEGREE: usize = 12;
pub const FLUID_ERROR_DEGREE: usize = 6;

/// Which second-order seminorm the plate H² error uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum H2Seminorm {
    /// `(|e_xx|² + 2|e_xy|² + |e_yy|²)^{1/2}`.
    #[default]
    Hessian,
    /// `|Δe|`.
    Laplacian,
}

impl H2Seminorm {
    pub fn name(self) -> &'static str {
        match self {
            H2Seminorm::Hessian => "hessian",
            H2Seminorm::Laplacian => "laplacian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hessian" => Some(H2Seminorm::Hessian),
            "laplacian" => Some(H2Seminorm::Laplacian),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlateErrors {
    pub h2: f64,
    pub h1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FluidErrors {
    pub l2: f64,
    pub h1: f64,
    pub pressure_l2: f64,
}

/// Plate errors with elementwise quadrature of the given degree. With
/// `subdivisions = s` every triangle is split into `s²` congruent pieces first.
pub fn plate_error_norms_with(
    wh: &PlateField,
    exact: &dyn PlateFunction,
    mode: H2Seminorm,
    degree: usize,
    subdivisions: usize,
) -> Result<PlateErrors> {
    let space = wh.space();
    let rule = quadrature_triangle(degree)?;
    let mesh = space.mesh();
    let s = subdivisions.max(1);
    let mut acc = [0.0; 3];
    for t in 0..mesh.n_triangles() {
        let v = mesh.triangle_coords(t);
        let jac = 2.0 * mesh.signed_area(t).abs() / (s * s) as f64;
        for [a, b, c] in sub_triangles(s) {
            for (l, w) in rule.iter() {
                // barycentric point of the sub-triangle mapped to the parent
                let m = [0, 1, 2].map(|k| l[0] * a[k] + l[1] * b[k] + l[2] * c[k]);
                let p = [0, 1].map(|d| m[0] * v[0][d] + m[1] * v[1][d] + m[2] * v[2][d]);
                let e = exact.jet(p);
                let h = wh.jet_on(t, p);
                let d = [0, 1, 2].map(|k| e.hess[k] - h.hess[k]);
                acc[0] += w * jac
                    * match mode {
                        H2Seminorm::Hessian => d[0] * d[0] + 2.0 * d[1] * d[1] + d[2] * d[2],
                        H2Seminorm::Laplacian => (d[0] + d[2]).powi(2),
                    };
                acc[1] += w * jac * ((e.grad[0] - h.grad[0]).powi(2) + (e.grad[1] - h.grad[1]).powi(2));
                acc[2] += w * jac * (e.value - h.value).powi(2);
            }
        }
    }
    Ok(PlateErrors {
        h2: acc[0].sqrt(),
        h1: acc[1].sqrt(),
        l2: acc[2].sqrt(),
    })
}

pub fn plate_error_norms(wh: &PlateField, exact: &dyn PlateFunction, mode: H2Seminorm) -> Result<PlateErrors> {
    plate_error_norms_with(wh, exact, mode, PLATE_ERROR_DEGREE, 1)
}

/// Barycentric vertices of the `s²` sub-triangles of the reference triangle.
fn sub_triangles(s: usize) -> Vec<[[f64; 3]; 3]> {
    let node = |i: usize, j: usize| {
        let (a, b) = (i as f64 / s as f64, j as f64 / s as f64);
        [1.0 - a - b, a, b]
    };
    let mut out = Vec::with_capacity(s * s);
    for i in 0..s {
        for j in 0..s - i {
            out.push([node(i, j), node(i + 1, j), node(i, j + 1)]);
            if i + j + 1 < s {
                out.push([node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
            }
        }
    }
    out
}

/// Velocity L² and H¹-seminorm errors and the pressure L² error.
pub fn fluid_error_norms(
    uh: &FluidField,
    ph: &PressureField,
    exact_u: &dyn VectorFunction,
    exact_p: &dyn Fn([f64; 3]) -> f64,
) -> Result<FluidErrors> {
    fluid_error_norms_with(uh, ph, exact_u, exact_p, FLUID_ERROR_DEGREE)
}

pub fn fluid_error_norms_with(
    uh: &FluidField,
    ph: &PressureField,
    exact_u: &dyn VectorFunction,
    exact_p: &dyn Fn([f64; 3]) -> f64,
    degree: usize,
) -> Result<FluidErrors> {
    let space = uh.space();
    let mesh = space.mesh();
    let rule = quadrature_tet(degree)?;
    let mut acc = [0.0; 3];
    for t in 0..mesh.n_tets() {
        let (dl, vol) = barycentric_gradients(&mesh.tet_coords(t));
        for (l, w) in rule.iter() {
            let w = 6.0 * vol * w;
            let x = space.point(t, l);
            let (ue, ge) = (exact_u.value(x), exact_u.gradient(x));
            let (u, g) = (uh.value_on(t, l), uh.gradient_on(t, l, &dl));
            for i in 0..3 {
                acc[0] += w * (ue[i] - u[i]).powi(2);
                for j in 0..3 {
                    acc[1] += w * (ge[i][j] - g[i][j]).powi(2);
                }
            }
            acc[2] += w * (exact_p(x) - ph.value_on(t, l)).powi(2);
        }
    }
    Ok(FluidErrors {
        l2: acc[0].sqrt(),
        h1: acc[1].sqrt(),
        pressure_l2: acc[2].sqrt(),
    })
}
