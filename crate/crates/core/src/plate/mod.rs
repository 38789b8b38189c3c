//! Quintic Argyris discretization of the clamped plate.

pub mod element;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functions::{Jet2, PlateFunction};
use crate::linalg::{SparseCholesky, SparseMatrix, TripletBuilder};
use crate::mesh::Mesh2;
use crate::quadrature::{quadrature_triangle, TriangleRule};

pub use element::{apply_functionals, ArgyrisElement, Jet, LOCAL_DOFS};

/// Quadrature degree for `(Δψ, Δφ)`.
pub const BENDING_DEGREE: usize = 6;
/// Quadrature degree for mass and load terms.
pub const MASS_DEGREE: usize = 10;

/// Vertex DOF slots.
pub const VALUE: usize = 0;
pub const DX: usize = 1;
pub const DY: usize = 2;
pub const DXX: usize = 3;
pub const DXY: usize = 4;
pub const DYY: usize = 5;

/// The Argyris space on a [`Mesh2`] with its H²₀ constraint set.
#[derive(Debug)]
pub struct ArgyrisSpace {
    mesh: Mesh2,
    elements: Vec<ArgyrisElement>,
    dof_map: Vec<[usize; LOCAL_DOFS]>,
    edge_normals: Vec<[f64; 2]>,
    /// `+1` where the global edge normal is the element's outward normal.
    normal_orientation: Vec<[i8; 3]>,
    constrained: Vec<bool>,
    free: Vec<usize>,
    free_index: Vec<Option<usize>>,
}

const TOL: f64 = 1e-12;

fn on_line(c: f64) -> bool {
    c.abs() < TOL || (c - 1.0).abs() < TOL
}

impl ArgyrisSpace {
    pub fn new(mesh: Mesh2) -> Result<Self> {
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let n_dofs = 6 * nv + ne;

        // 90° counterclockwise rotation of the lo -> hi edge direction
        let edge_normals: Vec<[f64; 2]> = mesh
            .edges()
            .iter()
            .map(|&[a, b]| {
                let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
                let d = [q[0] - p[0], q[1] - p[1]];
                let l = d[0].hypot(d[1]);
                [-d[1] / l, d[0] / l]
            })
            .collect();

        let mut elements = Vec::with_capacity(mesh.n_triangles());
        let mut dof_map = Vec::with_capacity(mesh.n_triangles());
        let mut normal_orientation = Vec::with_capacity(mesh.n_triangles());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let coords = mesh.triangle_coords(t);
            let te = mesh.triangle_edges()[t];
            let normals = te.map(|e| edge_normals[e]);
            let mut orient = [0i8; 3];
            for k in 0..3 {
                let (p, q) = (coords[k], coords[(k + 1) % 3]);
                let outward = [q[1] - p[1], p[0] - q[0]];
                let dot = outward[0] * normals[k][0] + outward[1] * normals[k][1];
                orient[k] = if mesh.signed_area(t) * dot > 0.0 { 1 } else { -1 };
            }
            elements.push(ArgyrisElement::new(t, coords, normals)?);
            let mut map = [0; LOCAL_DOFS];
            for k in 0..3 {
                for d in 0..6 {
                    map[6 * k + d] = 6 * tri[k] + d;
                }
                map[18 + k] = 6 * nv + te[k];
            }
            dof_map.push(map);
            normal_orientation.push(orient);
        }

        let mut constrained = vec![false; n_dofs];
        for (v, p) in mesh.vertices().iter().enumerate() {
            let horizontal = on_line(p[1]);
            let vertical = on_line(p[0]);
            if !(horizontal || vertical) {
                continue;
            }
            for d in [VALUE, DX, DY, DXY] {
                constrained[6 * v + d] = true;
            }
            // along y = const the tangential second derivative is ∂xx
            if horizontal {
                constrained[6 * v + DXX] = true;
            }
            if vertical {
                constrained[6 * v + DYY] = true;
            }
        }
        for e in 0..ne {
            if mesh.is_boundary_edge(e) {
                constrained[6 * nv + e] = true;
            }
        }
        let mut free = Vec::new();
        let mut free_index = vec![None; n_dofs];
        for (i, &c) in constrained.iter().enumerate() {
            if !c {
                free_index[i] = Some(free.len());
                free.push(i);
            }
        }

        Ok(Self {
            mesh,
            elements,
            dof_map,
            edge_normals,
            normal_orientation,
            constrained,
            free,
            free_index,
        })
    }

    pub fn build(level: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(Mesh2::new(level)?)?))
    }

    pub fn mesh(&self) -> &Mesh2 {
        &self.mesh
    }

    pub fn element(&self, t: usize) -> &ArgyrisElement {
        &self.elements[t]
    }

    pub fn dof_map(&self) -> &[[usize; LOCAL_DOFS]] {
        &self.dof_map
    }

    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        self.edge_normals[e]
    }

    pub fn normal_orientation(&self) -> &[[i8; 3]] {
        &self.normal_orientation
    }

    /// Raw DOF count, `6 · #vertices + #edges`.
    pub fn n_dofs(&self) -> usize {
        self.constrained.len()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    /// Raw indices of the free DOFs, ascending.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    /// Raw DOF index of slot `d` at vertex `v`.
    pub fn vertex_dof(&self, v: usize, d: usize) -> usize {
        6 * v + d
    }

    pub fn edge_dof(&self, e: usize) -> usize {
        6 * self.mesh.n_vertices() + e
    }

    /// Element edge normals, in local edge order.
    pub fn element_normals(&self, t: usize) -> [[f64; 2]; 3] {
        self.mesh.triangle_edges()[t].map(|e| self.edge_normals[e])
    }

    /// Restricts a raw matrix to the free rows and columns.
    pub fn restrict_matrix(&self, a: &SparseMatrix) -> SparseMatrix {
        let out = a.select(&self.free, &self.free);
        if a.is_flagged_symmetric() {
            out.flagged_symmetric()
        } else {
            out
        }
    }

    pub fn restrict_vector(&self, v: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| v[i]).collect()
    }

    /// Embeds a free-DOF vector into the raw space, zero on constrained DOFs.
    pub fn extend_vector(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = v[k];
        }
        out
    }

    /// Local coefficients of a raw vector on triangle `t`.
    pub fn local(&self, t: usize, raw: &[f64]) -> [f64; LOCAL_DOFS] {
        self.dof_map[t].map(|i| raw[i])
    }

    /// Physical quadrature points and weights on triangle `t`.
    pub fn element_quadrature<'a>(
        &'a self,
        t: usize,
        rule: &'a TriangleRule,
    ) -> impl Iterator<Item = ([f64; 2], f64)> + 'a {
        let [a, b, c] = self.mesh.triangle_coords(t);
        let jac = 2.0 * self.mesh.signed_area(t).abs();
        rule.iter().map(move |(l, w)| {
            (
                [
                    l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
                    l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
                ],
                w * jac,
            )
        })
    }

    fn assemble_local(
        &self,
        degree: usize,
        kernel: impl Fn(&Jet, &Jet) -> f64,
    ) -> Result<SparseMatrix> {
        let rule = quadrature_triangle(degree)?;
        let n = self.n_dofs();
        let mut t = TripletBuilder::with_capacity(n, n, self.elements.len() * LOCAL_DOFS * LOCAL_DOFS);
        for (e, el) in self.elements.iter().enumerate() {
            let mut local = [[0.0; LOCAL_DOFS]; LOCAL_DOFS];
            for (p, w) in self.element_quadrature(e, &rule) {
                let basis = el.basis(p);
                for i in 0..LOCAL_DOFS {
                    for j in i..LOCAL_DOFS {
                        local[i][j] += w * kernel(&basis[i], &basis[j]);
                    }
                }
            }
            let map = &self.dof_map[e];
            for i in 0..LOCAL_DOFS {
                for j in i..LOCAL_DOFS {
                    t.add(map[i], map[j], local[i][j]);
                    if i != j {
                        t.add(map[j], map[i], local[i][j]);
                    }
                }
            }
        }
        Ok(t.build().flagged_symmetric())
    }

    /// Raw bending matrix `(Δψ, Δφ)`.
    pub fn assemble_bending(&self) -> Result<SparseMatrix> {
        self.assemble_local(BENDING_DEGREE, |a, b| (a[3] + a[5]) * (b[3] + b[5]))
    }

    /// Raw matrix of `(∇²ψ, ∇²φ)` with the full Hessian. On the constrained
    /// space it coincides with the bending matrix.
    pub fn assemble_hessian_energy(&self) -> Result<SparseMatrix> {
        self.assemble_local(BENDING_DEGREE, |a, b| a[3] * b[3] + 2.0 * a[4] * b[4] + a[5] * b[5])
    }

    /// Raw matrix of `(ψ, φ) + ρ (∇ψ, ∇φ)`.
    pub fn assemble_mass_rho(&self, rho: f64) -> Result<SparseMatrix> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be nonnegative, got {rho}")));
        }
        self.assemble_local(MASS_DEGREE, |a, b| a[0] * b[0] + rho * (a[1] * b[1] + a[2] * b[2]))
    }

    /// Raw load vector `(f, φ) + ρ (∇f, ∇φ)`.
    pub fn assemble_load(&self, f: &dyn PlateFunction, rho: f64) -> Result<Vec<f64>> {
        let rule = quadrature_triangle(MASS_DEGREE)?;
        let mut out = vec![0.0; self.n_dofs()];
        for (e, el) in self.elements.iter().enumerate() {
            let map = &self.dof_map[e];
            for (p, w) in self.element_quadrature(e, &rule) {
                let jf = f.jet(p);
                let basis = el.basis(p);
                for (i, b) in basis.iter().enumerate() {
                    out[map[i]] += w * (jf.value * b[0] + rho * (jf.grad[0] * b[1] + jf.grad[1] * b[2]));
                }
            }
        }
        Ok(out)
    }

    /// Raw vector of `∫_Ω φ_i`.
    pub fn mean_vector(&self) -> Result<Vec<f64>> {
        let one = |_: [f64; 2]| Jet2 {
            value: 1.0,
            ..Jet2::default()
        };
        self.assemble_load(&one, 0.0)
    }

    /// Raw Argyris interpolant: DOF functionals applied to `f`.
    pub fn interpolate_raw(&self, f: &dyn PlateFunction) -> Vec<f64> {
        let nv = self.mesh.n_vertices();
        let mut out = vec![0.0; self.n_dofs()];
        for (v, &p) in self.mesh.vertices().iter().enumerate() {
            let j = f.jet(p);
            out[6 * v..6 * v + 6].copy_from_slice(&[
                j.value, j.grad[0], j.grad[1], j.hess[0], j.hess[1], j.hess[2],
            ]);
        }
        for e in 0..self.mesh.n_edges() {
            let j = f.jet(self.mesh.edge_midpoint(e));
            let n = self.edge_normals[e];
            out[6 * nv + e] = n[0] * j.grad[0] + n[1] * j.grad[1];
        }
        out
    }

    /// Sparse matrix of free-basis values at `points`, one row per point.
    pub fn value_matrix(&self, points: &[[f64; 2]]) -> Result<SparseMatrix> {
        let mut t = TripletBuilder::with_capacity(points.len(), self.n_free(), points.len() * LOCAL_DOFS);
        for (r, &p) in points.iter().enumerate() {
            let tri = self.mesh.locate(p)?;
            let basis = self.elements[tri].basis(p);
            for (k, &i) in self.dof_map[tri].iter().enumerate() {
                if let Some(c) = self.free_index[i] {
                    if basis[k][0] != 0.0 {
                        t.add(r, c, basis[k][0]);
                    }
                }
            }
        }
        Ok(t.build())
    }
}

/// A function in the Argyris space, stored over all raw DOFs.
#[derive(Debug, Clone)]
pub struct PlateField {
    space: Arc<ArgyrisSpace>,
    coeffs: Vec<f64>,
}

impl PlateField {
    pub fn zero(space: Arc<ArgyrisSpace>) -> Self {
        let n = space.n_dofs();
        Self {
            space,
            coeffs: vec![0.0; n],
        }
    }

    /// From raw coefficients; constrained entries are kept as given.
    pub fn from_raw(space: Arc<ArgyrisSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} plate DOFs",
                coeffs.len(),
                space.n_dofs()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn from_free(space: Arc<ArgyrisSpace>, free: &[f64]) -> Result<Self> {
        if free.len() != space.n_free() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} free plate DOFs",
                free.len(),
                space.n_free()
            )));
        }
        let coeffs = space.extend_vector(free);
        Ok(Self { space, coeffs })
    }

    /// Interpolant of a function in H²₀: constrained DOFs are set to zero.
    pub fn interpolate(space: Arc<ArgyrisSpace>, f: &dyn PlateFunction) -> Self {
        let mut coeffs = space.interpolate_raw(f);
        for (i, c) in coeffs.iter_mut().enumerate() {
            if space.is_constrained(i) {
                *c = 0.0;
            }
        }
        Self { space, coeffs }
    }

    /// Interpolant keeping every raw DOF, for functions not vanishing on ∂Ω.
    pub fn interpolate_unconstrained(space: Arc<ArgyrisSpace>, f: &dyn PlateFunction) -> Self {
        let coeffs = space.interpolate_raw(f);
        Self { space, coeffs }
    }

    pub fn space(&self) -> &Arc<ArgyrisSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn free_coeffs(&self) -> Vec<f64> {
        self.space.restrict_vector(&self.coeffs)
    }

    /// `a · self + b · other`.
    pub fn axpby(&self, a: f64, other: &PlateField, b: f64) -> Result<PlateField> {
        if !Arc::ptr_eq(&self.space, &other.space) {
            return Err(Error::DimensionMismatch("plate fields on different spaces".into()));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            space: self.space.clone(),
            coeffs,
        })
    }

    /// Jet on a known triangle.
    pub fn jet_on(&self, t: usize, p: [f64; 2]) -> Jet2 {
        let j = self.space.elements[t].combine(&self.space.local(t, &self.coeffs), p);
        Jet2 {
            value: j[0],
            grad: [j[1], j[2]],
            hess: [j[3], j[4], j[5]],
        }
    }

    pub fn evaluate(&self, p: [f64; 2]) -> Result<Jet2> {
        let t = self.space.mesh.locate(p)?;
        Ok(self.jet_on(t, p))
    }

    pub fn gradient(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.evaluate(p)?.grad)
    }

    /// Hessian `[[xx, xy], [xy, yy]]`.
    pub fn hessian(&self, p: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        let h = self.evaluate(p)?.hess;
        Ok([[h[0], h[1]], [h[1], h[2]]])
    }

    /// `∫_Ω w`.
    pub fn integral(&self) -> Result<f64> {
        let m = self.space.mean_vector()?;
        Ok(m.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum())
    }
}

impl PlateFunction for PlateField {
    fn jet(&self, p: [f64; 2]) -> Jet2 {
        self.evaluate(p).unwrap_or_else(|_| Jet2::nan())
    }
}

/// Discrete biharmonic projection ξ_h: `(Δξ_h, Δψ) = (1, ψ)` for all ψ in X_h.
pub fn solve_xi(space: &Arc<ArgyrisSpace>) -> Result<PlateField> {
    let k = space.restrict_matrix(&space.assemble_bending()?);
    let rhs = space.restrict_vector(&space.mean_vector()?);
    let chol = SparseCholesky::factor(&k)?;
    let x = chol.solve(&rhs)?;
    PlateField::from_free(space.clone(), &x)
}

/// The inf-sup witness `β_h = |Δξ_h|`, evaluated by quadrature rather than
/// through `∫ξ_h` so the two can be compared.
pub fn discrete_infsup_constant(space: &Arc<ArgyrisSpace>) -> Result<f64> {
    let xi = solve_xi(space)?;
    laplacian_norm(&xi)
}

/// `|Δw|_{L²}` by elementwise quadrature.
pub fn laplacian_norm(w: &PlateField) -> Result<f64> {
    let space = w.space();
    let rule = quadrature_triangle(BENDING_DEGREE)?;
    let mut s = 0.0;
    for t in 0..space.mesh().n_triangles() {
        for (p, wt) in space.element_quadrature(t, &rule) {
            s += wt * w.jet_on(t, p).laplacian().powi(2);
        }
    }
    Ok(s.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quintic(p: [f64; 2]) -> Jet2 {
        // x²y³
        let [x, y] = p;
        Jet2 {
            value: x * x * y.powi(3),
            grad: [2.0 * x * y.powi(3), 3.0 * x * x * y * y],
            hess: [2.0 * y.powi(3), 6.0 * x * y * y, 6.0 * x * x * y],
        }
    }

    #[test]
    fn level_one_counts() {
        let s = ArgyrisSpace::build(1).unwrap();
        assert_eq!(s.n_dofs(), 38);
        // only the center vertex values and its 4 interior edges stay free
        assert_eq!(s.n_free(), 10);
    }

    #[test]
    fn constraints_on_bottom_edge() {
        let s = ArgyrisSpace::build(2).unwrap();
        let v = s
            .mesh()
            .vertices()
            .iter()
            .position(|p| (p[0] - 0.5).abs() < 1e-14 && p[1] == 0.0)
            .unwrap();
        for d in [VALUE, DX, DY, DXX, DXY] {
            assert!(s.is_constrained(s.vertex_dof(v, d)));
        }
        assert!(!s.is_constrained(s.vertex_dof(v, DYY)));
        let corner = 0;
        assert!((0..6).all(|d| s.is_constrained(s.vertex_dof(corner, d))));
    }

    #[test]
    fn interpolation_reproduces_quintic() {
        for level in [1, 3] {
            let s = ArgyrisSpace::build(level).unwrap();
            let f = PlateField::interpolate_unconstrained(s.clone(), &quintic);
            let j = f.evaluate([0.3, 0.4]).unwrap();
            assert!((j.value - 0.00576).abs() < 1e-12);
            for t in 0..s.mesh().n_triangles() {
                let c = s.mesh().triangle_coords(t);
                let p = [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0];
                let got = f.jet_on(t, p);
                let want = quintic(p);
                assert!((got.value - want.value).abs() < 1e-9);
                for k in 0..2 {
                    assert!((got.grad[k] - want.grad[k]).abs() < 1e-9);
                }
                for k in 0..3 {
                    assert!((got.hess[k] - want.hess[k]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_field_vanishes() {
        let s = ArgyrisSpace::build(2).unwrap();
        let f = PlateField::zero(s);
        assert_eq!(f.evaluate([0.37, 0.81]).unwrap(), Jet2::default());
    }

    #[test]
    fn normal_derivative_continuous_across_edges() {
        let s = ArgyrisSpace::build(3).unwrap();
        // a generic coefficient vector
        let c: Vec<f64> = (0..s.n_free()).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let f = PlateField::from_free(s.clone(), &c).unwrap();
        for e in 0..s.mesh().n_edges() {
            if let (t0, Some(t1)) = s.mesh().edge_triangles(e) {
                let [a, b] = s.mesh().edges()[e].map(|v| s.mesh().vertices()[v]);
                let n = s.edge_normal(e);
                for r in [0.5, 0.2, 0.9] {
                    let p = [a[0] + r * (b[0] - a[0]), a[1] + r * (b[1] - a[1])];
                    let (j0, j1) = (f.jet_on(t0, p), f.jet_on(t1, p));
                    let dn0 = n[0] * j0.grad[0] + n[1] * j0.grad[1];
                    let dn1 = n[0] * j1.grad[0] + n[1] * j1.grad[1];
                    assert!((j0.value - j1.value).abs() < 1e-10);
                    assert!((dn0 - dn1).abs() < 1e-10, "edge {e} at {r}: {dn0} vs {dn1}");
                }
            }
        }
    }

    fn kernel_dim(k: &SparseMatrix) -> usize {
        let eig = k.to_dense().self_adjoint_eigenvalues().unwrap();
        let max = eig.iter().cloned().fold(0.0, f64::max);
        eig.iter().filter(|e| e.abs() < 1e-8 * max).count()
    }

    #[test]
    fn hessian_energy_kernel_is_linears() {
        let s = ArgyrisSpace::build(1).unwrap();
        let h = s.assemble_hessian_energy().unwrap();
        assert!(h.symmetry_defect() <= 1e-12 * h.max_abs());
        assert_eq!(kernel_dim(&h), 3);
        let x = PlateField::interpolate_unconstrained(s.clone(), &|p: [f64; 2]| Jet2 {
            value: 2.0 - p[0] + 3.0 * p[1],
            grad: [-1.0, 3.0],
            hess: [0.0; 3],
        });
        let r = h.mul_vec(x.coeffs());
        assert!(r.iter().all(|v| v.abs() < 1e-10 * h.max_abs()));
    }

    #[test]
    fn bending_kernel_contains_harmonics() {
        let s = ArgyrisSpace::build(1).unwrap();
        let k = s.assemble_bending().unwrap();
        assert!(k.symmetry_defect() <= 1e-12 * k.max_abs());
        // every harmonic quintic lies in the kernel of (Δψ, Δφ)
        assert!(kernel_dim(&k) >= 11);
        let harmonic = |p: [f64; 2]| {
            let [x, y] = p;
            Jet2 {
                value: x * x * x - 3.0 * x * y * y,
                grad: [3.0 * x * x - 3.0 * y * y, -6.0 * x * y],
                hess: [6.0 * x, -6.0 * y, -6.0 * x],
            }
        };
        let f = PlateField::interpolate_unconstrained(s.clone(), &harmonic);
        assert!(k.mul_vec(f.coeffs()).iter().all(|v| v.abs() < 1e-10 * k.max_abs()));
    }

    #[test]
    fn bending_definite_on_constrained_space() {
        for level in [1, 2, 3] {
            let s = ArgyrisSpace::build(level).unwrap();
            let kf = s.restrict_matrix(&s.assemble_bending().unwrap());
            let hf = s.restrict_matrix(&s.assemble_hessian_energy().unwrap());
            assert!(SparseCholesky::factor(&kf).is_ok());
            let ef = kf.to_dense().self_adjoint_eigenvalues().unwrap();
            assert!(ef[0] > 0.0);
            // |Δw| = |∇²w| on H²₀
            let mut d = kf.to_dense();
            d.add_scaled(-1.0, &hf.to_dense());
            assert!(d.max_abs() < 1e-9 * kf.max_abs());
        }
    }

    #[test]
    fn bending_energy_of_quintic() {
        // ∫(Δ(x²y³))² = ∫ 4y⁶ + 24x²y⁴ + 36x⁴y² = 4/7 + 24/15 + 36/15
        let s = ArgyrisSpace::build(2).unwrap();
        let f = PlateField::interpolate_unconstrained(s.clone(), &quintic);
        let k = s.assemble_bending().unwrap();
        let e = k.bilinear(f.coeffs(), f.coeffs());
        let exact = 4.0 / 7.0 + 24.0 / 15.0 + 36.0 / 15.0;
        assert!((e - exact).abs() < 1e-10 * exact, "{e} vs {exact}");
    }

    #[test]
    fn mass_rho_matches_integrals_and_is_monotone() {
        let s = ArgyrisSpace::build(2).unwrap();
        let f = PlateField::interpolate_unconstrained(s.clone(), &quintic);
        let m1 = s.assemble_mass_rho(1.0).unwrap();
        // ∫x⁴y⁶ + ∫4x²y⁶ + 9x⁴y⁴ = 1/35 + 4/21 + 9/25
        let exact = 1.0 / 35.0 + 4.0 / 21.0 + 9.0 / 25.0;
        let v = m1.bilinear(f.coeffs(), f.coeffs());
        assert!((v - exact).abs() < 1e-12);
        let m0 = s.assemble_mass_rho(0.0).unwrap();
        let m2 = s.assemble_mass_rho(2.0).unwrap();
        for seed in 0..5 {
            let x: Vec<f64> = (0..s.n_dofs()).map(|i| (((i + 3) * (seed + 11) * 2654435761usize) % 1000) as f64 / 500.0 - 1.0).collect();
            let (a, b, c) = (m0.bilinear(&x, &x), m1.bilinear(&x, &x), m2.bilinear(&x, &x));
            assert!(a <= b && b <= c);
        }
        assert!(s.assemble_mass_rho(-0.1).is_err());
    }

    #[test]
    fn constraint_form_matches_quadrature() {
        let s = ArgyrisSpace::build(2).unwrap();
        let m = s.restrict_vector(&s.mean_vector().unwrap());
        let c: Vec<f64> = (0..s.n_free()).map(|i| ((i * 31) % 17) as f64 - 8.0).collect();
        let f = PlateField::from_free(s.clone(), &c).unwrap();
        let rule = quadrature_triangle(12).unwrap();
        let mut q = 0.0;
        for t in 0..s.mesh().n_triangles() {
            for (p, w) in s.element_quadrature(t, &rule) {
                q += w * f.jet_on(t, p).value;
            }
        }
        let r = 2.5;
        let b = -r * m.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        assert!((b + r * q).abs() <= 1e-10 * (r * q).abs());
    }

    #[test]
    fn xi_identity() {
        for level in [1, 2, 4] {
            let s = ArgyrisSpace::build(level).unwrap();
            let xi = solve_xi(&s).unwrap();
            let beta = discrete_infsup_constant(&s).unwrap();
            let integral = xi.integral().unwrap();
            assert!(beta > 0.0);
            assert!((integral - beta * beta).abs() <= 1e-9 * integral);
        }
    }

    #[test]
    fn value_matrix_reproduces_field() {
        let s = ArgyrisSpace::build(2).unwrap();
        let c: Vec<f64> = (0..s.n_free()).map(|i| (i as f64).sin()).collect();
        let f = PlateField::from_free(s.clone(), &c).unwrap();
        let pts = [[0.25, 0.25], [0.5, 0.5], [0.1, 0.7], [0.0, 0.3]];
        let g = s.value_matrix(&pts).unwrap();
        let v = g.mul_vec(&c);
        for (p, v) in pts.iter().zip(v) {
            assert!((f.evaluate(*p).unwrap().value - v).abs() < 1e-13);
        }
    }
}
