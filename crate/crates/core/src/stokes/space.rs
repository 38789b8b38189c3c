//! P2 velocity / P1 pressure spaces on [`Mesh3`] and fields over them.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh3, TET_EDGES};

/// Boundary class of a velocity node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    /// On the plate face `z = 0` (including its rim).
    Omega,
    /// On one of the rigid walls.
    S,
    Interior,
}

/// Local P2 node order: the four vertices, then the six edges in [`TET_EDGES`] order.
pub const P2_LOCAL: usize = 10;

/// P2 basis values at barycentric coordinates `l`.
pub fn p2_values(l: &[f64; 4]) -> [f64; P2_LOCAL] {
    let mut out = [0.0; P2_LOCAL];
    for i in 0..4 {
        out[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (k, [a, b]) in TET_EDGES.iter().enumerate() {
        out[4 + k] = 4.0 * l[*a] * l[*b];
    }
    out
}

/// P2 basis gradients given barycentric coordinates and their gradients.
pub fn p2_gradients(l: &[f64; 4], dl: &[[f64; 3]; 4]) -> [[f64; 3]; P2_LOCAL] {
    let mut out = [[0.0; 3]; P2_LOCAL];
    for i in 0..4 {
        let s = 4.0 * l[i] - 1.0;
        out[i] = dl[i].map(|d| s * d);
    }
    for (k, [a, b]) in TET_EDGES.iter().enumerate() {
        for c in 0..3 {
            out[4 + k][c] = 4.0 * (l[*b] * dl[*a][c] + l[*a] * dl[*b][c]);
        }
    }
    out
}

/// Gradients of the barycentric coordinates and the volume of a tetrahedron.
pub fn barycentric_gradients(v: &[[f64; 3]; 4]) -> ([[f64; 3]; 4], f64) {
    let e = |k: usize| [v[k][0] - v[0][0], v[k][1] - v[0][1], v[k][2] - v[0][2]];
    let (a, b, c) = (e(1), e(2), e(3));
    let cross = |u: [f64; 3], w: [f64; 3]| {
        [
            u[1] * w[2] - u[2] * w[1],
            u[2] * w[0] - u[0] * w[2],
            u[0] * w[1] - u[1] * w[0],
        ]
    };
    let bc = cross(b, c);
    let det = a[0] * bc[0] + a[1] * bc[1] + a[2] * bc[2];
    // rows of the inverse Jacobian
    let g1 = bc.map(|x| x / det);
    let g2 = cross(c, a).map(|x| x / det);
    let g3 = cross(a, b).map(|x| x / det);
    let g0 = [0, 1, 2].map(|k| -(g1[k] + g2[k] + g3[k]));
    ([g0, g1, g2, g3], det / 6.0)
}

/// Taylor–Hood space: vector P2 velocity, scalar P1 pressure.
#[derive(Debug)]
pub struct TaylorHoodSpace {
    mesh: Mesh3,
    nodes: Vec<[f64; 3]>,
    classes: Vec<NodeClass>,
    tet_nodes: Vec<[usize; P2_LOCAL]>,
    /// Omega nodes strictly inside the plate, in node order.
    trace_nodes: Vec<usize>,
    trace_index: Vec<Option<usize>>,
}

const TOL: f64 = 1e-12;

impl TaylorHoodSpace {
    pub fn new(mesh: Mesh3) -> Self {
        let nv = mesh.n_vertices();
        let mut nodes: Vec<[f64; 3]> = mesh.vertices().to_vec();
        for &[a, b] in mesh.edges() {
            let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
            nodes.push([0, 1, 2].map(|c| 0.5 * (p[c] + q[c])));
        }
        let classes: Vec<NodeClass> = nodes
            .iter()
            .map(|p| {
                let wall = |c: f64| c.abs() < TOL || (c - 1.0).abs() < TOL;
                if p[2].abs() < TOL {
                    NodeClass::Omega
                } else if wall(p[0]) || wall(p[1]) || (p[2] + 1.0).abs() < TOL {
                    NodeClass::S
                } else {
                    NodeClass::Interior
                }
            })
            .collect();
        let tet_nodes = mesh
            .tets()
            .iter()
            .zip(mesh.tet_edges())
            .map(|(t, e)| {
                let mut out = [0; P2_LOCAL];
                out[..4].copy_from_slice(t);
                for k in 0..6 {
                    out[4 + k] = nv + e[k];
                }
                out
            })
            .collect();
        let mut trace_nodes = Vec::new();
        let mut trace_index = vec![None; nodes.len()];
        for (i, p) in nodes.iter().enumerate() {
            let inside = p[0] > TOL && p[0] < 1.0 - TOL && p[1] > TOL && p[1] < 1.0 - TOL;
            if classes[i] == NodeClass::Omega && inside {
                trace_index[i] = Some(trace_nodes.len());
                trace_nodes.push(i);
            }
        }
        Self {
            mesh,
            nodes,
            classes,
            tet_nodes,
            trace_nodes,
            trace_index,
        }
    }

    pub fn build(level: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(Mesh3::new(level)?)))
    }

    pub fn mesh(&self) -> &Mesh3 {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Velocity DOF count `3 · (#vertices + #edges)`; DOF `3 · node + c`.
    pub fn n_velocity(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn node_class(&self, node: usize) -> NodeClass {
        self.classes[node]
    }

    pub fn tet_nodes(&self) -> &[[usize; P2_LOCAL]] {
        &self.tet_nodes
    }

    /// Omega nodes with `(x, y)` inside the open square; these carry the plate trace.
    pub fn trace_nodes(&self) -> &[usize] {
        &self.trace_nodes
    }

    pub fn trace_index(&self, node: usize) -> Option<usize> {
        self.trace_index[node]
    }

    /// Plate coordinates of the trace nodes.
    pub fn trace_points(&self) -> Vec<[f64; 2]> {
        self.trace_nodes
            .iter()
            .map(|&n| [self.nodes[n][0], self.nodes[n][1]])
            .collect()
    }

    /// Physical point of barycentric coordinates `l` in tet `t`.
    pub fn point(&self, t: usize, l: &[f64; 4]) -> [f64; 3] {
        let v = self.mesh.tet_coords(t);
        [0, 1, 2].map(|c| (0..4).map(|k| l[k] * v[k][c]).sum())
    }
}

/// Vector P2 field; coefficient `3 · node + c`.
#[derive(Debug, Clone)]
pub struct FluidField {
    space: Arc<TaylorHoodSpace>,
    coeffs: Vec<f64>,
}

impl FluidField {
    pub fn zero(space: Arc<TaylorHoodSpace>) -> Self {
        let n = space.n_velocity();
        Self {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coeffs(space: Arc<TaylorHoodSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_velocity() {
            return Err(Error::DimensionMismatch(format!(
                "{} velocity coefficients for {} DOFs",
                coeffs.len(),
                space.n_velocity()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn space(&self) -> &Arc<TaylorHoodSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn node_value(&self, node: usize) -> [f64; 3] {
        [0, 1, 2].map(|c| self.coeffs[3 * node + c])
    }

    /// Value on tet `t` at barycentric `l`.
    pub fn value_on(&self, t: usize, l: &[f64; 4]) -> [f64; 3] {
        let n = p2_values(l);
        let nodes = &self.space.tet_nodes[t];
        let mut out = [0.0; 3];
        for (k, &node) in nodes.iter().enumerate() {
            for c in 0..3 {
                out[c] += n[k] * self.coeffs[3 * node + c];
            }
        }
        out
    }

    /// Gradient `g[i][j] = ∂u_i/∂x_j` on tet `t`.
    pub fn gradient_on(&self, t: usize, l: &[f64; 4], dl: &[[f64; 3]; 4]) -> [[f64; 3]; 3] {
        let g = p2_gradients(l, dl);
        let nodes = &self.space.tet_nodes[t];
        let mut out = [[0.0; 3]; 3];
        for (k, &node) in nodes.iter().enumerate() {
            for i in 0..3 {
                let u = self.coeffs[3 * node + i];
                for j in 0..3 {
                    out[i][j] += u * g[k][j];
                }
            }
        }
        out
    }

    pub fn value(&self, p: [f64; 3]) -> Result<[f64; 3]> {
        let (t, l) = self.space.mesh.locate(p)?;
        Ok(self.value_on(t, &l))
    }

    pub fn gradient(&self, p: [f64; 3]) -> Result<[[f64; 3]; 3]> {
        let (t, l) = self.space.mesh.locate(p)?;
        let (dl, _) = barycentric_gradients(&self.space.mesh.tet_coords(t));
        Ok(self.gradient_on(t, &l, &dl))
    }
}

/// P1 pressure field.
#[derive(Debug, Clone)]
pub struct PressureField {
    space: Arc<TaylorHoodSpace>,
    coeffs: Vec<f64>,
    mean_zero: bool,
}

impl PressureField {
    pub fn new(space: Arc<TaylorHoodSpace>, coeffs: Vec<f64>, mean_zero: bool) -> Result<Self> {
        if coeffs.len() != space.n_pressure() {
            return Err(Error::DimensionMismatch(format!(
                "{} pressure coefficients for {} DOFs",
                coeffs.len(),
                space.n_pressure()
            )));
        }
        Ok(Self {
            space,
            coeffs,
            mean_zero,
        })
    }

    pub fn zero(space: Arc<TaylorHoodSpace>) -> Self {
        let n = space.n_pressure();
        Self {
            space,
            coeffs: vec![0.0; n],
            mean_zero: true,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    pub fn value_on(&self, t: usize, l: &[f64; 4]) -> f64 {
        let v = self.space.mesh.tets()[t];
        (0..4).map(|k| l[k] * self.coeffs[v[k]]).sum()
    }

    pub fn value(&self, p: [f64; 3]) -> Result<f64> {
        let (t, l) = self.space.mesh.locate(p)?;
        Ok(self.value_on(t, &l))
    }

    /// `∫_O p` (P1 is integrated exactly by the vertex average).
    pub fn integral(&self) -> f64 {
        let mesh = &self.space.mesh;
        (0..mesh.n_tets())
            .map(|t| {
                let v = mesh.tets()[t];
                mesh.tet_volume(t) * v.iter().map(|&k| self.coeffs[k]).sum::<f64>() / 4.0
            })
            .sum()
    }

    /// Adds a constant; the mean-zero flag is cleared unless `c == 0`.
    pub fn add_constant(&self, c: f64) -> Self {
        Self {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|p| p + c).collect(),
            mean_zero: self.mean_zero && c == 0.0,
        }
    }

    /// Subtracts the mean (`meas(O) = 1`).
    pub fn project_mean_zero(&self) -> Self {
        let m = self.integral();
        let mut out = self.add_constant(-m);
        out.mean_zero = true;
        out
    }
}
