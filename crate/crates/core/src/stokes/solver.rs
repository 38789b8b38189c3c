//! Stokes resolvent forms, the factored saddle system and the discrete solution maps.

use std::sync::Arc;

use super::space::{
    barycentric_gradients, p2_gradients, p2_values, FluidField, NodeClass, PressureField,
    TaylorHoodSpace, P2_LOCAL,
};
use crate::error::{Error, Result};
use crate::functions::{PlateFunction, VectorFunction};
use crate::linalg::{pcg, DenseMatrix, SparseCholesky, SparseLdlt, SparseMatrix, TripletBuilder, SOLVE_TOLERANCE};
use crate::mesh::FaceTag;
use crate::quadrature::{quadrature_tet, quadrature_triangle};

/// Quadrature degree of the Taylor–Hood forms.
pub const FORM_DEGREE: usize = 4;
/// Quadrature degree for volume forces.
pub const LOAD_DEGREE: usize = 6;

/// Assembled Taylor–Hood forms over all nodes (no boundary conditions).
#[derive(Debug, Clone)]
pub struct StokesForms {
    pub lambda: f64,
    /// `λ(μ, φ) + (∇μ, ∇φ)` on velocity DOFs.
    pub a: SparseMatrix,
    /// `B[q][3a + c] = −∫ ∂_c N_a L_q`.
    pub b: SparseMatrix,
    /// Scalar P2 mass and stiffness matrices.
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    /// `∫ L_q`.
    pub pressure_moments: Vec<f64>,
}

pub fn assemble_stokes_forms(space: &TaylorHoodSpace, lambda: f64) -> Result<StokesForms> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let rule = quadrature_tet(FORM_DEGREE)?;
    let mesh = space.mesh();
    let nn = space.n_nodes();
    let np = space.n_pressure();
    let nt = mesh.n_tets();
    let mut mt = TripletBuilder::with_capacity(nn, nn, nt * P2_LOCAL * P2_LOCAL);
    let mut kt = TripletBuilder::with_capacity(nn, nn, nt * P2_LOCAL * P2_LOCAL);
    let mut bt = TripletBuilder::with_capacity(np, 3 * nn, nt * 4 * 3 * P2_LOCAL);
    let mut moments = vec![0.0; np];
    for t in 0..nt {
        let v = mesh.tet_coords(t);
        let (dl, vol) = barycentric_gradients(&v);
        if !(vol > 0.0) {
            return Err(Error::DegenerateElement(t));
        }
        let nodes = space.tet_nodes()[t];
        let verts = mesh.tets()[t];
        let mut lm = [[0.0; P2_LOCAL]; P2_LOCAL];
        let mut lk = [[0.0; P2_LOCAL]; P2_LOCAL];
        let mut lb = [[[0.0; 3]; P2_LOCAL]; 4];
        for (l, w) in rule.iter() {
            let w = 6.0 * vol * w;
            let n = p2_values(l);
            let g = p2_gradients(l, &dl);
            for i in 0..P2_LOCAL {
                for j in 0..P2_LOCAL {
                    lm[i][j] += w * n[i] * n[j];
                    lk[i][j] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]);
                }
                for q in 0..4 {
                    for c in 0..3 {
                        lb[q][i][c] -= w * g[i][c] * l[q];
                    }
                }
            }
        }
        for i in 0..P2_LOCAL {
            for j in 0..P2_LOCAL {
                mt.add(nodes[i], nodes[j], lm[i][j]);
                kt.add(nodes[i], nodes[j], lk[i][j]);
            }
        }
        for q in 0..4 {
            moments[verts[q]] += vol / 4.0;
            for i in 0..P2_LOCAL {
                for c in 0..3 {
                    bt.add(verts[q], 3 * nodes[i] + c, lb[q][i][c]);
                }
            }
        }
    }
    let mass = mt.build().flagged_symmetric();
    let stiffness = kt.build().flagged_symmetric();
    let mut at = TripletBuilder::with_capacity(3 * nn, 3 * nn, 3 * stiffness.nnz());
    for (r, c, v) in stiffness.triplets() {
        let m = mass.get(r, c);
        for k in 0..3 {
            at.add(3 * r + k, 3 * c + k, lambda * m + v);
        }
    }
    Ok(StokesForms {
        lambda,
        a: at.build().flagged_symmetric(),
        b: bt.build(),
        mass,
        stiffness,
        pressure_moments: moments,
    })
}

/// Result of one Stokes resolvent solve.
#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub velocity: FluidField,
    pub pressure: PressureField,
    /// Multiplier of the mean-zero pressure row.
    pub multiplier: f64,
}

/// How the fluid saddle system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluidBackend {
    /// Direct up to [`DIRECT_NODE_LIMIT`] velocity nodes, Schur CG above.
    #[default]
    Auto,
    /// Sparse `LDLᵀ` of the whole saddle matrix.
    Direct,
    /// Sparse Cholesky of the scalar velocity block and preconditioned CG on
    /// the pressure Schur complement. Much less memory than `Direct`.
    SchurCg,
}

/// Largest P2 node count factored directly under [`FluidBackend::Auto`].
pub const DIRECT_NODE_LIMIT: usize = 5_000;

/// Default relative residual of the pressure Schur complement iteration.
pub const SCHUR_TOLERANCE: f64 = 1e-13;
const SCHUR_MAX_ITERATIONS: usize = 2000;

enum Backend {
    Direct { matrix: SparseMatrix, ldlt: SparseLdlt },
    Schur(SchurCg),
}

/// The velocity block is `I₃ ⊗ A_s` on interior nodes, so one scalar
/// factorization serves all three components.
struct SchurCg {
    a: SparseMatrix,
    chol: SparseCholesky,
    b: [SparseMatrix; 3],
    bt: [SparseMatrix; 3],
    moments: Vec<f64>,
    tolerance: f64,
}

impl SchurCg {
    fn new(forms: &StokesForms, interior: &[usize]) -> Result<Self> {
        let np = forms.pressure_moments.len();
        let all_p: Vec<usize> = (0..np).collect();
        let first: Vec<usize> = interior.iter().map(|&n| 3 * n).collect();
        let a = forms.a.select(&first, &first).flagged_symmetric();
        let chol = SparseCholesky::factor(&a)?;
        let b = [0, 1, 2].map(|c| {
            let cols: Vec<usize> = interior.iter().map(|&n| 3 * n + c).collect();
            forms.b.select(&all_p, &cols)
        });
        let bt = [0, 1, 2].map(|c| b[c].transpose());
        Ok(Self {
            a,
            chol,
            b,
            bt,
            moments: forms.pressure_moments.clone(),
            tolerance: SCHUR_TOLERANCE,
        })
    }

    /// `A⁻¹` applied to the three components of a node-major velocity vector.
    fn velocity_solve(&self, f: &[[f64; 3]]) -> Result<Vec<Vec<f64>>> {
        let cols: Vec<Vec<f64>> = (0..3).map(|c| f.iter().map(|v| v[c]).collect()).collect();
        self.chol.solve_many(&cols)
    }

    fn divergence(&self, u: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.moments.len()];
        for c in 0..3 {
            for (o, v) in out.iter_mut().zip(self.b[c].mul_vec(&u[c])) {
                *o += v;
            }
        }
        out
    }

    fn gradient(&self, p: &[f64]) -> Vec<[f64; 3]> {
        let g: Vec<Vec<f64>> = (0..3).map(|c| self.bt[c].mul_vec(p)).collect();
        (0..g[0].len()).map(|k| [g[0][k], g[1][k], g[2][k]]).collect()
    }

    /// Same unknown layout as the direct saddle matrix:
    /// `[u (node-major, 3 per interior node), p, σ]`.
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let np = self.moments.len();
        let ni = self.a.shape().0;
        let f: Vec<[f64; 3]> = (0..ni).map(|k| [rhs[3 * k], rhs[3 * k + 1], rhs[3 * k + 2]]).collect();
        let g = &rhs[3 * ni..3 * ni + np];
        let v = self.velocity_solve(&f)?;
        let mut r: Vec<f64> = self.divergence(&v).iter().zip(g).map(|(a, b)| a - b).collect();
        let total: f64 = self.moments.iter().sum();
        let sigma = -r.iter().sum::<f64>() / total;
        for (x, m) in r.iter_mut().zip(&self.moments) {
            *x += sigma * m;
        }
        let schur = |q: &[f64]| -> Result<Vec<f64>> {
            let w = self.velocity_solve(&self.gradient(q))?;
            Ok(self.divergence(&w))
        };
        let lumped = |q: &[f64]| -> Result<Vec<f64>> { Ok(q.iter().zip(&self.moments).map(|(x, m)| x / m).collect()) };
        let mut p = pcg(schur, lumped, &r, self.tolerance, SCHUR_MAX_ITERATIONS, "pressure Schur complement")?.x;
        let mean = p.iter().zip(&self.moments).map(|(a, b)| a * b).sum::<f64>() / total;
        p.iter_mut().for_each(|x| *x -= mean);
        let bp = self.gradient(&p);
        let rhs_u: Vec<[f64; 3]> = f.iter().zip(&bp).map(|(a, b)| [0, 1, 2].map(|c| a[c] - b[c])).collect();
        let u = self.velocity_solve(&rhs_u)?;
        let mut x = Vec::with_capacity(rhs.len());
        for k in 0..ni {
            x.extend([u[0][k], u[1][k], u[2][k]]);
        }
        x.extend_from_slice(&p);
        x.push(sigma);
        self.check(rhs, &x)?;
        Ok(x)
    }

    fn check(&self, rhs: &[f64], x: &[f64]) -> Result<()> {
        let np = self.moments.len();
        let ni = self.a.shape().0;
        let u: Vec<Vec<f64>> = (0..3).map(|c| (0..ni).map(|k| x[3 * k + c]).collect()).collect();
        let p = &x[3 * ni..3 * ni + np];
        let sigma = x[3 * ni + np];
        let bp = self.gradient(p);
        let mut res = 0.0;
        for c in 0..3 {
            let au = self.a.mul_vec(&u[c]);
            for k in 0..ni {
                res += (au[k] + bp[k][c] - rhs[3 * k + c]).powi(2);
            }
        }
        let div = self.divergence(&u);
        for q in 0..np {
            res += (div[q] + sigma * self.moments[q] - rhs[3 * ni + q]).powi(2);
        }
        let pm: f64 = p.iter().zip(&self.moments).map(|(a, b)| a * b).sum();
        res += pm * pm;
        let nb = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = res.sqrt() / nb.max(f64::MIN_POSITIVE);
        let tolerance = SOLVE_TOLERANCE.max(100.0 * self.tolerance);
        if nb > 0.0 && rel > tolerance {
            return Err(Error::NotConverged {
                context: "Schur complement fluid solve".into(),
                residual: rel,
                tolerance,
            });
        }
        Ok(())
    }
}

/// The Stokes resolvent saddle system with homogeneous-S / prescribed-Ω velocity,
/// mean-zero pressure via a scalar multiplier, factored once.
pub struct StokesSolver {
    space: Arc<TaylorHoodSpace>,
    forms: StokesForms,
    /// Velocity DOFs solved for (all components of interior nodes).
    unknown: Vec<usize>,
    backend: Backend,
    trace_dofs: Vec<usize>,
    a_trace: SparseMatrix,
    bt_trace: SparseMatrix,
}

impl StokesSolver {
    pub fn new(space: Arc<TaylorHoodSpace>, lambda: f64) -> Result<Self> {
        Self::with_backend(space, lambda, FluidBackend::Auto)
    }

    pub fn with_backend(space: Arc<TaylorHoodSpace>, lambda: f64, backend: FluidBackend) -> Result<Self> {
        let forms = assemble_stokes_forms(&space, lambda)?;
        let nn = space.n_nodes();
        let np = space.n_pressure();
        let interior: Vec<usize> = (0..nn).filter(|&n| space.node_class(n) == NodeClass::Interior).collect();
        let unknown: Vec<usize> = interior.iter().flat_map(|&n| [3 * n, 3 * n + 1, 3 * n + 2]).collect();
        let direct = match backend {
            FluidBackend::Auto => nn <= DIRECT_NODE_LIMIT,
            FluidBackend::Direct => true,
            FluidBackend::SchurCg => false,
        };
        let backend = if direct {
            let matrix = saddle_matrix(&forms, &unknown, 3 * nn, np);
            let nu = unknown.len();
            let mut signs = vec![1i8; nu];
            signs.resize(nu + np + 1, -1);
            let ldlt = SparseLdlt::factor(&matrix, &signs).map_err(|e| match e {
                Error::Singular { pivot, .. } => Error::Singular {
                    context: "Taylor–Hood saddle system".into(),
                    pivot,
                },
                other => other,
            })?;
            Backend::Direct { matrix, ldlt }
        } else {
            Backend::Schur(SchurCg::new(&forms, &interior)?)
        };
        let trace_dofs: Vec<usize> = space.trace_nodes().iter().map(|&n| 3 * n + 2).collect();
        let all_v: Vec<usize> = (0..3 * nn).collect();
        let all_p: Vec<usize> = (0..np).collect();
        let a_trace = forms.a.select(&trace_dofs, &all_v);
        let bt_trace = forms.b.select(&all_p, &trace_dofs).transpose();
        Ok(Self {
            space,
            forms,
            unknown,
            backend,
            trace_dofs,
            a_trace,
            bt_trace,
        })
    }

    /// Relative tolerance of the Schur complement iteration; ignored by the
    /// direct backend.
    pub fn set_iterative_tolerance(&mut self, tolerance: f64) {
        if let Backend::Schur(s) = &mut self.backend {
            s.tolerance = tolerance;
        }
    }

    pub fn backend(&self) -> FluidBackend {
        match self.backend {
            Backend::Direct { .. } => FluidBackend::Direct,
            Backend::Schur(_) => FluidBackend::SchurCg,
        }
    }

    pub fn space(&self) -> &Arc<TaylorHoodSpace> {
        &self.space
    }

    pub fn forms(&self) -> &StokesForms {
        &self.forms
    }

    pub fn lambda(&self) -> f64 {
        self.forms.lambda
    }

    /// The factored saddle matrix (interior velocity, pressure, multiplier);
    /// only assembled by the direct backend.
    pub fn matrix(&self) -> Option<&SparseMatrix> {
        match &self.backend {
            Backend::Direct { matrix, .. } => Some(matrix),
            Backend::Schur(_) => None,
        }
    }

    pub fn n_trace(&self) -> usize {
        self.trace_dofs.len()
    }

    /// Velocity vector that is `trace` (z-component) on interior Ω nodes, zero elsewhere.
    pub fn dirichlet_vector(&self, trace: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.space.n_velocity()];
        for (k, &d) in self.trace_dofs.iter().enumerate() {
            g[d] = trace[k];
        }
        g
    }

    fn rhs(&self, trace: &[f64], load: Option<&[f64]>, datum: f64) -> (Vec<f64>, Vec<f64>) {
        let np = self.space.n_pressure();
        let g = self.dirichlet_vector(trace);
        let ag = self.forms.a.mul_vec(&g);
        let bg = self.forms.b.mul_vec(&g);
        let mut rhs = Vec::with_capacity(self.unknown.len() + np + 1);
        for &d in &self.unknown {
            rhs.push(load.map_or(0.0, |f| f[d]) - ag[d]);
        }
        for q in 0..np {
            rhs.push(-datum * self.forms.pressure_moments[q] - bg[q]);
        }
        rhs.push(0.0);
        (g, rhs)
    }

    fn unpack(&self, mut g: Vec<f64>, x: &[f64]) -> Result<StokesSolution> {
        let nu = self.unknown.len();
        let np = self.space.n_pressure();
        for (k, &d) in self.unknown.iter().enumerate() {
            g[d] = x[k];
        }
        Ok(StokesSolution {
            velocity: FluidField::from_coeffs(self.space.clone(), g)?,
            pressure: PressureField::new(self.space.clone(), x[nu..nu + np].to_vec(), true)?,
            multiplier: x[nu + np],
        })
    }

    fn check_inputs(&self, trace: &[f64], load: Option<&[f64]>) -> Result<()> {
        if trace.len() != self.n_trace() {
            return Err(Error::DimensionMismatch(format!(
                "{} trace values for {} trace nodes",
                trace.len(),
                self.n_trace()
            )));
        }
        if let Some(f) = load {
            if f.len() != self.space.n_velocity() {
                return Err(Error::DimensionMismatch("velocity load length".into()));
            }
        }
        Ok(())
    }

    /// Solves with velocity `[0,0,trace]` on Ω, zero on S, load vector `load`
    /// (tested against velocity DOFs) and constant divergence datum `datum`.
    pub fn solve(&self, trace: &[f64], load: Option<&[f64]>, datum: f64) -> Result<StokesSolution> {
        self.check_inputs(trace, load)?;
        let (g, rhs) = self.rhs(trace, load, datum);
        let x = match &self.backend {
            Backend::Direct { ldlt, .. } => ldlt.solve_checked(&rhs, SOLVE_TOLERANCE)?,
            Backend::Schur(s) => s.solve(&rhs)?,
        };
        self.unpack(g, &x)
    }

    /// Zero-load solves sharing the factorization.
    pub fn solve_many(&self, traces: &[Vec<f64>]) -> Result<Vec<StokesSolution>> {
        let mut gs = Vec::with_capacity(traces.len());
        let mut rhs = Vec::with_capacity(traces.len());
        for tr in traces {
            self.check_inputs(tr, None)?;
            let (g, r) = self.rhs(tr, None, 0.0);
            gs.push(g);
            rhs.push(r);
        }
        let xs = match &self.backend {
            Backend::Direct { ldlt, .. } => ldlt.solve_many(&rhs)?,
            Backend::Schur(s) => rhs.iter().map(|r| s.solve(r)).collect::<Result<Vec<_>>>()?,
        };
        gs.into_iter().zip(xs).map(|(g, x)| self.unpack(g, &x)).collect()
    }

    /// Discrete normal-stress functional on the trace DOFs:
    /// `(A u + Bᵀ p − load)` restricted to the z-components of the trace nodes.
    pub fn traction(&self, sol: &StokesSolution, load: Option<&[f64]>) -> Vec<f64> {
        let mut t = self.a_trace.mul_vec(sol.velocity.coeffs());
        let bp = self.bt_trace.mul_vec(sol.pressure.coeffs());
        for (k, v) in t.iter_mut().enumerate() {
            *v += bp[k];
            if let Some(f) = load {
                *v -= f[self.trace_dofs[k]];
            }
        }
        t
    }

    /// Discrete Dirichlet-to-Neumann matrix `T`: `T γ` is the traction of the
    /// zero-load solution with trace `γ`. One solve per trace node.
    pub fn dtn_matrix(&self) -> Result<DenseMatrix> {
        const BATCH: usize = 32;
        let n = self.n_trace();
        let mut out = DenseMatrix::zeros(n, n);
        let mut start = 0;
        while start < n {
            let end = (start + BATCH).min(n);
            let traces: Vec<Vec<f64>> = (start..end)
                .map(|j| {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    e
                })
                .collect();
            for (j, sol) in (start..end).zip(self.solve_many(&traces)?) {
                for (k, v) in self.traction(&sol, None).into_iter().enumerate() {
                    out[(k, j)] = v;
                }
            }
            start = end;
        }
        Ok(out)
    }

    /// `(f, N_a e_c)` for every velocity DOF.
    pub fn assemble_load(&self, f: &dyn VectorFunction) -> Result<Vec<f64>> {
        assemble_velocity_load(&self.space, f)
    }

    /// `B u`: pressure moments of `−div u`.
    pub fn divergence_moments(&self, u: &FluidField) -> Vec<f64> {
        self.forms.b.mul_vec(u.coeffs())
    }

    /// Discrete `f̃_h(φ) = f̃₀h(φ) + γ₀⁺(φ)` and `π̃_h(φ)`.
    pub fn solve_map_f(&self, phi: &dyn PlateFunction) -> Result<(FluidField, PressureField)> {
        let trace = self.trace_values(phi);
        let datum = omega_integral(&self.space, phi)?;
        let sol = self.solve(&trace, None, datum)?;
        Ok((sol.velocity, sol.pressure))
    }

    /// Discrete `μ̃_h(u*)` and `q̃_h(u*)`.
    pub fn solve_map_mu(&self, ustar: &dyn VectorFunction) -> Result<(FluidField, PressureField)> {
        let load = self.assemble_load(ustar)?;
        let sol = self.solve(&vec![0.0; self.n_trace()], Some(&load), 0.0)?;
        Ok((sol.velocity, sol.pressure))
    }

    pub fn trace_values(&self, phi: &dyn PlateFunction) -> Vec<f64> {
        self.space.trace_points().iter().map(|&p| phi.value(p)).collect()
    }
}

/// `[A Bᵀ 0; B 0 m; 0 mᵀ 0]` restricted to the unknown velocity DOFs.
fn saddle_matrix(forms: &StokesForms, unknown: &[usize], n_velocity: usize, np: usize) -> SparseMatrix {
    let mut index = vec![usize::MAX; n_velocity];
    for (k, &d) in unknown.iter().enumerate() {
        index[d] = k;
    }
    let nu = unknown.len();
    let dim = nu + np + 1;
    let mut t = TripletBuilder::with_capacity(dim, dim, forms.a.nnz() + 2 * forms.b.nnz() + 2 * np);
    for (r, c, v) in forms.a.triplets() {
        let (ri, ci) = (index[r], index[c]);
        if ri != usize::MAX && ci != usize::MAX {
            t.add(ri, ci, v);
        }
    }
    for (q, c, v) in forms.b.triplets() {
        let ci = index[c];
        if ci != usize::MAX {
            t.add(nu + q, ci, v);
            t.add(ci, nu + q, v);
        }
    }
    for (q, &m) in forms.pressure_moments.iter().enumerate() {
        t.add(nu + np, nu + q, m);
        t.add(nu + q, nu + np, m);
    }
    t.build().flagged_symmetric()
}

/// `(f, N_a e_c)` by tet quadrature of degree [`LOAD_DEGREE`].
pub fn assemble_velocity_load(space: &TaylorHoodSpace, f: &dyn VectorFunction) -> Result<Vec<f64>> {
    let rule = quadrature_tet(LOAD_DEGREE)?;
    let mesh = space.mesh();
    let mut out = vec![0.0; space.n_velocity()];
    for t in 0..mesh.n_tets() {
        let vol = mesh.tet_volume(t);
        let nodes = space.tet_nodes()[t];
        for (l, w) in rule.iter() {
            let w = 6.0 * vol * w;
            let fv = f.value(space.point(t, l));
            let n = p2_values(l);
            for (k, &node) in nodes.iter().enumerate() {
                for c in 0..3 {
                    out[3 * node + c] += w * n[k] * fv[c];
                }
            }
        }
    }
    Ok(out)
}

/// Trace lifting `γ₀⁺(φ)`: `[0, 0, φ]` at every Ω node, zero elsewhere.
pub fn lift_trace(space: &Arc<TaylorHoodSpace>, phi: &dyn PlateFunction) -> Result<FluidField> {
    let mut c = vec![0.0; space.n_velocity()];
    for (node, p) in space.nodes().iter().enumerate() {
        if space.node_class(node) == NodeClass::Omega {
            let v = phi.value([p[0], p[1]]);
            if !v.is_finite() {
                return Err(Error::PointOutsidePlate { x: p[0], y: p[1] });
            }
            c[3 * node + 2] = v;
        }
    }
    FluidField::from_coeffs(space.clone(), c)
}

/// `∫_Ω φ` over the Ω faces of the fluid mesh.
pub fn omega_integral(space: &TaylorHoodSpace, phi: &dyn PlateFunction) -> Result<f64> {
    let rule = quadrature_triangle(10)?;
    let mesh = space.mesh();
    let mut s = 0.0;
    for (f, tag) in mesh.face_tags().iter().enumerate() {
        if *tag != FaceTag::Omega {
            continue;
        }
        let v = mesh.faces()[f].map(|k| mesh.vertices()[k]);
        let area = mesh.face_area(f);
        for (l, w) in rule.iter() {
            let p = [0, 1].map(|c| l[0] * v[0][c] + l[1] * v[1][c] + l[2] * v[2][c]);
            s += 2.0 * area * w * phi.value(p);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Jet2, Zero};

    fn bump(p: [f64; 2]) -> Jet2 {
        let [x, y] = p;
        let v = x * x * (1.0 - x) * (1.0 - x) * y * y * (1.0 - y) * (1.0 - y) * 16.0;
        Jet2 {
            value: v,
            ..Jet2::default()
        }
    }

    fn solver(level: usize, lambda: f64) -> StokesSolver {
        StokesSolver::new(TaylorHoodSpace::build(level).unwrap(), lambda).unwrap()
    }

    #[test]
    fn forms_basic_properties() {
        let s = TaylorHoodSpace::build(1).unwrap();
        let f = assemble_stokes_forms(&s, 2.0).unwrap();
        assert!(f.a.symmetry_defect() <= 1e-12 * f.a.max_abs());
        // constant velocity: A c = λ M c
        let mut c = vec![0.0; s.n_velocity()];
        for node in 0..s.n_nodes() {
            c[3 * node] = 1.5;
        }
        let ac = f.a.mul_vec(&c);
        let ones = vec![1.5; s.n_nodes()];
        let mc = f.mass.mul_vec(&ones);
        for node in 0..s.n_nodes() {
            assert!((ac[3 * node] - 2.0 * mc[node]).abs() < 1e-13);
        }
        // total mass and pressure moments
        let total: f64 = f.pressure_moments.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!(assemble_stokes_forms(&s, 0.0).is_err());
    }

    #[test]
    fn divergence_form_matches_quadrature() {
        // u = (z(z+1), 0, 0) is divergence free; u = (0, 0, z²) has div 2z
        let s = TaylorHoodSpace::build(1).unwrap();
        let f = assemble_stokes_forms(&s, 1.0).unwrap();
        let mut u = vec![0.0; s.n_velocity()];
        let mut w = vec![0.0; s.n_velocity()];
        for (node, p) in s.nodes().iter().enumerate() {
            u[3 * node] = p[2] * (p[2] + 1.0);
            w[3 * node + 2] = p[2] * p[2];
        }
        assert!(f.b.mul_vec(&u).iter().all(|v| v.abs() < 1e-13));
        let bw = f.b.mul_vec(&w);
        // −∫ 2z L_q by an independent rule
        let rule = quadrature_tet(8).unwrap();
        let mesh = s.mesh();
        let mut want = vec![0.0; s.n_pressure()];
        for t in 0..mesh.n_tets() {
            let vol = mesh.tet_volume(t);
            for (l, wt) in rule.iter() {
                let z = s.point(t, l)[2];
                for q in 0..4 {
                    want[mesh.tets()[t][q]] -= 6.0 * vol * wt * 2.0 * z * l[q];
                }
            }
        }
        for (a, b) in bw.iter().zip(&want) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let st = solver(1, 1.0);
        let sol = st.solve(&vec![0.0; st.n_trace()], None, 0.0).unwrap();
        assert!(sol.velocity.coeffs().iter().all(|&v| v == 0.0));
        assert!(sol.pressure.coeffs().iter().all(|&v| v == 0.0));
        let (u, p) = st.solve_map_mu(&Zero).unwrap();
        assert!(u.coeffs().iter().all(|&v| v == 0.0));
        assert!(p.coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn map_f_trace_and_gauge() {
        let st = solver(2, 1.0);
        let (u, p) = st.solve_map_f(&bump).unwrap();
        let space = st.space();
        for (node, x) in space.nodes().iter().enumerate() {
            let v = u.node_value(node);
            match space.node_class(node) {
                NodeClass::S => assert_eq!(v, [0.0; 3]),
                NodeClass::Omega => {
                    assert_eq!(v[0], 0.0);
                    assert_eq!(v[1], 0.0);
                    assert!((v[2] - bump([x[0], x[1]]).value).abs() < 1e-15);
                }
                NodeClass::Interior => {}
            }
        }
        assert!(p.is_mean_zero());
        assert!(p.integral().abs() < 1e-10);
    }

    #[test]
    fn divergence_datum_is_absorbed_by_multiplier() {
        let st = solver(2, 1.0);
        let tr = st.trace_values(&bump);
        let a = st.solve(&tr, None, 0.0).unwrap();
        let b = st.solve(&tr, None, 0.7).unwrap();
        for (x, y) in a.velocity.coeffs().iter().zip(b.velocity.coeffs()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.multiplier - b.multiplier - 0.7).abs() < 1e-12);
    }

    #[test]
    fn dtn_matrix_is_symmetric_and_gives_energy() {
        let st = solver(1, 1.5);
        let t = st.dtn_matrix().unwrap();
        assert!(t.symmetry_defect() < 1e-10 * t.max_abs());
        // γᵀTγ = ã(u, u) for the solution with trace γ
        let tr = st.trace_values(&bump);
        let sol = st.solve(&tr, None, 0.0).unwrap();
        let e = st.forms().a.bilinear(sol.velocity.coeffs(), sol.velocity.coeffs());
        let tg = t.mul_vec(&tr);
        let q: f64 = tr.iter().zip(&tg).map(|(a, b)| a * b).sum();
        assert!((e - q).abs() < 1e-10 * e);
    }

    #[test]
    fn factorization_reuse_matches_individual_solves() {
        let st = solver(1, 1.0);
        let n = st.n_trace();
        let traces: Vec<Vec<f64>> = (0..100)
            .map(|k| (0..n).map(|j| ((k * 13 + j * 7) % 11) as f64 / 11.0 - 0.5).collect())
            .collect();
        let many = st.solve_many(&traces).unwrap();
        for (tr, m) in traces.iter().zip(&many) {
            let one = st.solve(tr, None, 0.0).unwrap();
            for (a, b) in one.velocity.coeffs().iter().zip(m.velocity.coeffs()) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in one.pressure.coeffs().iter().zip(m.pressure.coeffs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn level_one_matches_dense_solve() {
        let st = solver(1, 1.0);
        let tr = st.trace_values(&bump);
        let sol = st.solve(&tr, None, 0.0).unwrap();
        let (_, rhs) = st.rhs(&tr, None, 0.0);
        let x = st.matrix().unwrap().to_dense().lu_solve(&rhs).unwrap();
        let nu = st.unknown.len();
        for (k, &d) in st.unknown.iter().enumerate() {
            assert!((sol.velocity.coeffs()[d] - x[k]).abs() < 1e-12);
        }
        for q in 0..st.space().n_pressure() {
            assert!((sol.pressure.coeffs()[q] - x[nu + q]).abs() < 1e-12);
        }
        // discrete divergence equation holds: B u = −σ m
        let bu = st.divergence_moments(&sol.velocity);
        for (q, v) in bu.iter().enumerate() {
            assert!((v + sol.multiplier * st.forms().pressure_moments[q]).abs() < 1e-10);
        }
    }

    #[test]
    fn schur_backend_matches_direct() {
        let space = TaylorHoodSpace::build(2).unwrap();
        let direct = StokesSolver::with_backend(space.clone(), 1.3, FluidBackend::Direct).unwrap();
        let iter = StokesSolver::with_backend(space, 1.3, FluidBackend::SchurCg).unwrap();
        assert_eq!(iter.backend(), FluidBackend::SchurCg);
        assert!(iter.matrix().is_none());
        let force = |p: [f64; 3]| [p[1] * p[2], 1.0 - p[0], p[0] * p[1]];
        struct F<G>(G);
        impl<G: Fn([f64; 3]) -> [f64; 3] + Send + Sync> VectorFunction for F<G> {
            fn value(&self, p: [f64; 3]) -> [f64; 3] {
                (self.0)(p)
            }
            fn gradient(&self, _: [f64; 3]) -> [[f64; 3]; 3] {
                [[0.0; 3]; 3]
            }
        }
        let load = direct.assemble_load(&F(force)).unwrap();
        let tr = direct.trace_values(&bump);
        let a = direct.solve(&tr, Some(&load), 0.4).unwrap();
        let b = iter.solve(&tr, Some(&load), 0.4).unwrap();
        let scale = a.velocity.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.velocity.coeffs().iter().zip(b.velocity.coeffs()) {
            assert!((x - y).abs() < 1e-9 * scale);
        }
        let pscale = a.pressure.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.pressure.coeffs().iter().zip(b.pressure.coeffs()) {
            assert!((x - y).abs() < 1e-8 * pscale);
        }
        assert!((a.multiplier - b.multiplier).abs() < 1e-9);
        let tz = iter.traction(&b, Some(&load));
        let td = direct.traction(&a, Some(&load));
        for (x, y) in tz.iter().zip(&td) {
            assert!((x - y).abs() < 1e-8 * td.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }

    #[test]
    fn lifting_properties() {
        let s = TaylorHoodSpace::build(2).unwrap();
        let zero = lift_trace(&s, &Zero).unwrap();
        assert!(zero.coeffs().iter().all(|&v| v == 0.0));
        let l = lift_trace(&s, &bump).unwrap();
        for (node, p) in s.nodes().iter().enumerate() {
            let v = l.node_value(node);
            match s.node_class(node) {
                NodeClass::Omega => assert_eq!(v, [0.0, 0.0, bump([p[0], p[1]]).value]),
                _ => assert_eq!(v, [0.0; 3]),
            }
        }
    }

    #[test]
    fn omega_integral_of_bump() {
        let s = TaylorHoodSpace::build(2).unwrap();
        // 16 (1/30)²
        let i = omega_integral(&s, &bump).unwrap();
        assert!((i - 16.0 / 900.0).abs() < 1e-14);
    }
}
