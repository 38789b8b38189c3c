//! The reduced plate saddle problem and recovery of the fluid unknowns.
//!
//! The fluid maps enter `a_λ` only through `λ ã_λ(f̃_h(ψ), f̃_h(φ))`. For
//! discrete solutions with mean-zero pressure this equals `λ γψᵀ T γφ`, where
//! `γ` samples a plate function at the interior Ω velocity nodes and `T` is the
//! discrete Dirichlet-to-Neumann matrix of [`StokesSolver::dtn_matrix`]. The
//! same identity turns the fluid part of the load into trace pairings.

use std::sync::Arc;

use crate::functions::{PlateFunction, VectorFunction};
use crate::linalg::{pcg, DenseCholesky, DenseMatrix, SparseMatrix};
use crate::plate::{ArgyrisSpace, PlateField};
use crate::quadrature::quadrature_triangle;
use crate::stokes::{FluidBackend, FluidField, PressureField, StokesSolution, StokesSolver};
use crate::{Error, Result};

/// How the second plate datum enters the load.
#[derive(Clone)]
pub enum SecondDatum {
    /// `w₂*` itself; `(P_ρ w₂*, φ)` is integrated by parts.
    Plain(Arc<dyn PlateFunction>),
    /// `P_ρ w₂*` supplied directly, paired with `φ` in L².
    Preconditioned(Arc<dyn PlateFunction>),
}

/// Right-hand side `[w₁*, w₂*, u*]` of the resolvent problem.
#[derive(Clone)]
pub struct ResolventData {
    pub lambda: f64,
    pub rho: f64,
    pub w1_star: Arc<dyn PlateFunction>,
    pub w2_star: SecondDatum,
    pub u_star: Arc<dyn VectorFunction>,
}

impl ResolventData {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be nonnegative, got {}", self.rho)));
        }
        Ok(())
    }

    /// Raw plate vector of `(P_ρ w₂*, φ_i)`.
    fn second_load(&self, space: &ArgyrisSpace) -> Result<Vec<f64>> {
        match &self.w2_star {
            SecondDatum::Plain(f) => space.assemble_load(f.as_ref(), self.rho),
            SecondDatum::Preconditioned(g) => space.assemble_load(g.as_ref(), 0.0),
        }
    }
}

/// How the fluid term `λΓᵀTΓ` of the reduced matrix is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReducedMode {
    /// `Dense` with a direct fluid backend, `MatrixFree` otherwise.
    #[default]
    Auto,
    /// Assemble the DtN matrix (one fluid solve per trace node) and factor densely.
    Dense,
    /// Projected CG where every product costs one fluid solve.
    MatrixFree,
}

/// Default relative tolerance of the matrix-free reduced iteration.
pub const REDUCED_TOLERANCE: f64 = 1e-11;
const REDUCED_MAX_ITERATIONS: usize = 500;

/// Level-dependent operators shared by every right-hand side: the plate
/// matrices on free DOFs, the trace sampling matrix and the DtN matrix.
pub struct CoupledOperators {
    plate: Arc<ArgyrisSpace>,
    stokes: StokesSolver,
    rho: f64,
    mass: SparseMatrix,
    bending: SparseMatrix,
    /// Free plate basis values at the interior Ω velocity nodes.
    gamma: SparseMatrix,
    /// `T` and `ΓᵀTΓ`; absent in matrix-free mode.
    dtn: Option<(DenseMatrix, DenseMatrix)>,
    /// `b_i = −∫ φ_i` on free DOFs.
    constraint: Vec<f64>,
    tolerance: f64,
}

impl CoupledOperators {
    pub fn new(plate: Arc<ArgyrisSpace>, stokes: StokesSolver, rho: f64) -> Result<Self> {
        Self::with_mode(plate, stokes, rho, ReducedMode::Auto)
    }

    pub fn with_mode(plate: Arc<ArgyrisSpace>, stokes: StokesSolver, rho: f64, mode: ReducedMode) -> Result<Self> {
        let mass = plate.restrict_matrix(&plate.assemble_mass_rho(rho)?);
        let bending = plate.restrict_matrix(&plate.assemble_bending()?);
        let gamma = plate.value_matrix(&stokes.space().trace_points())?;
        let dense = match mode {
            ReducedMode::Auto => stokes.backend() == FluidBackend::Direct,
            ReducedMode::Dense => true,
            ReducedMode::MatrixFree => false,
        };
        let dtn = if dense {
            let t = stokes.dtn_matrix()?;
            let fluid = sandwich(&gamma, &t);
            Some((t, fluid))
        } else {
            None
        };
        let constraint = plate
            .restrict_vector(&plate.mean_vector()?)
            .into_iter()
            .map(|v| -v)
            .collect();
        Ok(Self {
            plate,
            stokes,
            rho,
            mass,
            bending,
            gamma,
            dtn,
            constraint,
            tolerance: REDUCED_TOLERANCE,
        })
    }

    /// Builds plate and fluid spaces on the same level and factors the fluid system.
    pub fn build(level: usize, lambda: f64, rho: f64) -> Result<Self> {
        let plate = ArgyrisSpace::build(level)?;
        let fluid = crate::stokes::TaylorHoodSpace::build(level)?;
        let stokes = StokesSolver::new(fluid, lambda)?;
        Self::new(plate, stokes, rho)
    }

    pub fn plate(&self) -> &Arc<ArgyrisSpace> {
        &self.plate
    }

    pub fn stokes(&self) -> &StokesSolver {
        &self.stokes
    }

    pub fn lambda(&self) -> f64 {
        self.stokes.lambda()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Tolerance of the matrix-free iteration. The inner fluid iteration is
    /// run a hundred times tighter.
    pub fn set_iterative_tolerance(&mut self, tolerance: f64) -> Result<()> {
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!("tolerance must lie in (0, 1), got {tolerance}")));
        }
        self.tolerance = tolerance;
        self.stokes.set_iterative_tolerance(1e-2 * tolerance);
        Ok(())
    }

    pub fn mode(&self) -> ReducedMode {
        if self.dtn.is_some() {
            ReducedMode::Dense
        } else {
            ReducedMode::MatrixFree
        }
    }

    pub fn dtn(&self) -> Option<&DenseMatrix> {
        self.dtn.as_ref().map(|(t, _)| t)
    }

    pub fn gamma(&self) -> &SparseMatrix {
        &self.gamma
    }

    /// Trace values of a plate field at the interior Ω velocity nodes.
    pub fn trace_of(&self, w: &PlateField) -> Vec<f64> {
        self.gamma.mul_vec(&w.free_coeffs())
    }

    /// `A = λ² M_ρ + K + λ ΓᵀTΓ`. With `include_fluid = false` the fluid term
    /// is dropped, which is always available.
    pub fn matrix(&self, include_fluid: bool) -> Result<DenseMatrix> {
        let lambda = self.lambda();
        let n = self.plate.n_free();
        let mut a = DenseMatrix::zeros(n, n);
        a.add_sparse_scaled(lambda * lambda, &self.mass);
        a.add_sparse_scaled(1.0, &self.bending);
        if include_fluid {
            let (_, fluid) = self.dtn.as_ref().ok_or_else(|| {
                Error::InvalidParameter("reduced matrix is not assembled in matrix-free mode".into())
            })?;
            a.add_scaled(lambda, fluid);
        }
        Ok(a)
    }

    /// `A w` without forming `A`; the fluid part costs one fluid solve.
    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        let lambda = self.lambda();
        let mut out = self.bending.mul_vec(w);
        for (o, m) in out.iter_mut().zip(self.mass.mul_vec(w)) {
            *o += lambda * lambda * m;
        }
        let trace = self.gamma.mul_vec(w);
        let t = match &self.dtn {
            Some((dtn, _)) => dtn.mul_vec(&trace),
            None => {
                let sol = self.stokes.solve(&trace, None, 0.0)?;
                self.stokes.traction(&sol, None)
            }
        };
        for (o, f) in out.iter_mut().zip(self.gamma.mul_transpose_vec(&t)) {
            *o += lambda * f;
        }
        Ok(out)
    }

    pub fn constraint(&self) -> &[f64] {
        &self.constraint
    }

    fn check_data(&self, data: &ResolventData) -> Result<()> {
        data.validate()?;
        if (data.lambda - self.lambda()).abs() > 1e-14 * self.lambda() || data.rho != self.rho {
            return Err(Error::InvalidParameter(format!(
                "data (λ={}, ρ={}) do not match the operators (λ={}, ρ={})",
                data.lambda,
                data.rho,
                self.lambda(),
                self.rho
            )));
        }
        Ok(())
    }

    /// Solves the fluid problems that do not depend on the test function.
    pub fn fluid_cache(&self, data: &ResolventData) -> Result<FluidCache> {
        self.check_data(data)?;
        let w1_star_h = PlateField::interpolate(self.plate.clone(), data.w1_star.as_ref());
        let trace = self.trace_of(&w1_star_h);
        let f_w1 = self.stokes.solve(&trace, None, w1_star_h.integral()?)?;
        let load = self.stokes.assemble_load(data.u_star.as_ref())?;
        let mu = self.stokes.solve(&vec![0.0; self.stokes.n_trace()], Some(&load), 0.0)?;
        let mu_traction = self.stokes.traction(&mu, Some(&load));
        Ok(FluidCache {
            w1_star_h,
            w1_trace: trace,
            f_w1,
            mu,
            load,
            mu_traction,
        })
    }

    /// Load vector `F` on free DOFs.
    pub fn load(&self, data: &ResolventData, cache: &FluidCache) -> Result<Vec<f64>> {
        self.check_data(data)?;
        let lambda = data.lambda;
        let first = self.plate.assemble_load(data.w1_star.as_ref(), self.rho)?;
        let second = data.second_load(&self.plate)?;
        let plate_part: Vec<f64> = first.iter().zip(&second).map(|(a, b)| lambda * a + b).collect();
        let mut f = self.plate.restrict_vector(&plate_part);
        let mut trace_load = self.stokes.traction(&cache.f_w1, None);
        for (t, m) in trace_load.iter_mut().zip(&cache.mu_traction) {
            *t -= m;
        }
        let fluid = self.gamma.mul_transpose_vec(&trace_load);
        for (a, b) in f.iter_mut().zip(&fluid) {
            *a += b;
        }
        Ok(f)
    }

    /// Evaluates the load functional directly on a plate field `phi` by
    /// solving for `f̃_h(φ)` and pairing fluid fields with the Stokes forms.
    pub fn apply_f(&self, data: &ResolventData, phi: &PlateField, cache: &FluidCache) -> Result<f64> {
        self.check_data(data)?;
        let lambda = data.lambda;
        let f_phi = self.stokes.solve(&self.trace_of(phi), None, phi.integral()?)?;
        let a = &self.stokes.forms().a;
        let v = f_phi.velocity.coeffs();
        let fluid = a.bilinear(cache.f_w1.velocity.coeffs(), v) - a.bilinear(cache.mu.velocity.coeffs(), v)
            + dot(&cache.load, v);
        let first = self.plate.assemble_load(data.w1_star.as_ref(), self.rho)?;
        let second = data.second_load(&self.plate)?;
        let plate: f64 = phi
            .coeffs()
            .iter()
            .zip(first.iter().zip(&second))
            .map(|(c, (a, b))| c * (lambda * a + b))
            .sum();
        Ok(fluid + plate)
    }

    /// Assembles the reduced saddle system for `data`.
    pub fn reduced_system(&self, data: &ResolventData) -> Result<ReducedSystem> {
        let cache = self.fluid_cache(data)?;
        let load = self.load(data, &cache)?;
        Ok(ReducedSystem {
            matrix: self.matrix(true)?,
            constraint: self.constraint.clone(),
            load,
            cache,
        })
    }

    /// Solves the resolvent problem and recovers every unknown.
    pub fn solve(&self, data: &ResolventData) -> Result<CoupledSolution> {
        if self.dtn.is_none() {
            let cache = self.fluid_cache(data)?;
            let load = self.load(data, &cache)?;
            let (w, c, _) = self.solve_matrix_free(&load)?;
            return self.recover(data, &cache, &w, c);
        }
        let system = self.reduced_system(data)?;
        let (w, c) = system.solve_schur()?;
        self.recover(data, &system.cache, &w, c)
    }

    /// `A w + c b = F`, `bᵀw = 0` by CG on `b^⊥`, preconditioned with the
    /// constrained inverse of `λ²M_ρ + K`. Returns `(w, c, iterations)`.
    pub fn solve_matrix_free(&self, load: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
        let b = &self.constraint;
        let bb = dot(b, b);
        let project = |v: &mut Vec<f64>| {
            let s = dot(b, v) / bb;
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= s * y);
        };
        let plain: DenseCholesky = self.matrix(false)?.cholesky()?;
        let pb = plain.solve(b);
        let bpb = dot(b, &pb);
        let precondition = |r: &[f64]| -> Result<Vec<f64>> {
            let mut z = plain.solve(r);
            let s = dot(b, &z) / bpb;
            z.iter_mut().zip(&pb).for_each(|(x, y)| *x -= s * y);
            Ok(z)
        };
        let apply = |v: &[f64]| -> Result<Vec<f64>> {
            let mut out = self.apply(v)?;
            project(&mut out);
            Ok(out)
        };
        let mut rhs = load.to_vec();
        project(&mut rhs);
        let result = pcg(apply, precondition, &rhs, self.tolerance, REDUCED_MAX_ITERATIONS, "reduced plate system")?;
        let mut w = result.x;
        project(&mut w);
        let aw = self.apply(&w)?;
        let c = b.iter().zip(load.iter().zip(&aw)).map(|(bi, (f, a))| bi * (f - a)).sum::<f64>() / bb;
        Ok((w, c, result.iterations))
    }

    /// `w₂h = λw₁h − I_h w₁*`, then `u_h`, `p_h` from one fluid solve with
    /// trace `w₂h` and load `u*`.
    pub fn recover(&self, data: &ResolventData, cache: &FluidCache, w1_free: &[f64], c_tilde: f64) -> Result<CoupledSolution> {
        let w1h = PlateField::from_free(self.plate.clone(), w1_free)?;
        let w2h = w1h.axpby(data.lambda, &cache.w1_star_h, -1.0)?;
        let trace = self.trace_of(&w2h);
        let sol = self.stokes.solve(&trace, Some(&cache.load), w2h.integral()?)?;
        let ph = sol.pressure.add_constant(c_tilde);
        Ok(CoupledSolution {
            w1h,
            w2h,
            uh: sol.velocity,
            ph,
            c_tilde,
        })
    }
}

/// Fluid solutions for the data: `f̃_h(I_h w₁*)`, `μ̃_h(u*)` and the
/// assembled force.
pub struct FluidCache {
    pub w1_star_h: PlateField,
    pub w1_trace: Vec<f64>,
    pub f_w1: StokesSolution,
    pub mu: StokesSolution,
    /// `(u*, N_a e_c)` on all velocity DOFs.
    pub load: Vec<f64>,
    pub mu_traction: Vec<f64>,
}

/// `[A b; bᵀ 0] [w; c] = [F; 0]` on free plate DOFs.
pub struct ReducedSystem {
    pub matrix: DenseMatrix,
    pub constraint: Vec<f64>,
    pub load: Vec<f64>,
    pub cache: FluidCache,
}

impl ReducedSystem {
    /// Eliminates the scalar multiplier: `c = bᵀA⁻¹F / bᵀA⁻¹b`.
    pub fn solve_schur(&self) -> Result<(Vec<f64>, f64)> {
        let chol = self.matrix.cholesky().map_err(|_| Error::Singular {
            context: "reduced plate matrix is not positive definite".into(),
            pivot: None,
        })?;
        let x = chol.solve(&self.load);
        let y = chol.solve(&self.constraint);
        let by = dot(&self.constraint, &y);
        if !(by > 0.0) {
            return Err(Error::Singular {
                context: "constraint Schur complement".into(),
                pivot: None,
            });
        }
        let c = dot(&self.constraint, &x) / by;
        let w = x.iter().zip(&y).map(|(a, b)| a - c * b).collect();
        Ok((w, c))
    }

    /// Solves the bordered matrix directly.
    pub fn solve_direct(&self) -> Result<(Vec<f64>, f64)> {
        let n = self.load.len();
        let k = DenseMatrix::from_fn(n + 1, n + 1, |r, c| match (r < n, c < n) {
            (true, true) => self.matrix[(r, c)],
            (true, false) => self.constraint[r],
            (false, true) => self.constraint[c],
            (false, false) => 0.0,
        });
        let mut rhs = self.load.clone();
        rhs.push(0.0);
        let mut x = k.lu_solve(&rhs)?;
        let c = x.pop().unwrap_or_default();
        Ok((x, c))
    }

    /// Relative residual of both block rows.
    pub fn residual(&self, w: &[f64], c: f64) -> f64 {
        let aw = self.matrix.mul_vec(w);
        let r1: f64 = aw
            .iter()
            .zip(&self.constraint)
            .zip(&self.load)
            .map(|((a, b), f)| (a + c * b - f).powi(2))
            .sum();
        let r2 = dot(&self.constraint, w).powi(2);
        let nf = dot(&self.load, &self.load).max(f64::MIN_POSITIVE);
        ((r1 + r2) / nf).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct CoupledSolution {
    pub w1h: PlateField,
    pub w2h: PlateField,
    pub uh: FluidField,
    pub ph: PressureField,
    pub c_tilde: f64,
}

/// Terms of the discrete energy balance
/// `λ‖x_h‖² + ‖∇u_h‖² = (x*, x_h)` in the `H_ρ` inner product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    pub lambda_norm_sq: f64,
    pub dissipation: f64,
    pub pairing: f64,
}

impl EnergyBalance {
    pub fn residual(&self) -> f64 {
        self.lambda_norm_sq + self.dissipation - self.pairing
    }

    /// Residual relative to `λ‖x_h‖²`.
    pub fn relative_residual(&self) -> f64 {
        self.residual().abs() / self.lambda_norm_sq.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn energy_balance(ops: &CoupledOperators, data: &ResolventData, sol: &CoupledSolution) -> Result<EnergyBalance> {
    ops.check_data(data)?;
    let plate = ops.plate();
    let w1 = sol.w1h.coeffs();
    let w2 = sol.w2h.coeffs();
    let bending = plate.assemble_bending()?;
    let mass = plate.assemble_mass_rho(data.rho)?;
    let forms = ops.stokes().forms();
    let (u_l2, u_h1) = velocity_norms_sq(forms, &sol.uh);
    let norm_sq = bending.bilinear(w1, w1) + mass.bilinear(w2, w2) + u_l2;
    let pairing = laplacian_pairing(plate, data.w1_star.as_ref(), &sol.w1h)?
        + dot(&data.second_load(plate)?, w2)
        + dot(&ops.stokes().assemble_load(data.u_star.as_ref())?, sol.uh.coeffs());
    Ok(EnergyBalance {
        lambda_norm_sq: data.lambda * norm_sq,
        dissipation: u_h1,
        pairing,
    })
}

/// `(‖u‖², ‖∇u‖²)` from the scalar P2 mass and stiffness matrices.
pub fn velocity_norms_sq(forms: &crate::stokes::StokesForms, u: &FluidField) -> (f64, f64) {
    let nn = forms.mass.shape().0;
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for c in 0..3 {
        let uc: Vec<f64> = (0..nn).map(|a| u.coeffs()[3 * a + c]).collect();
        l2 += forms.mass.bilinear(&uc, &uc);
        h1 += forms.stiffness.bilinear(&uc, &uc);
    }
    (l2, h1)
}

/// `(Δf, Δw)` for an exact `f` by elementwise quadrature.
fn laplacian_pairing(space: &ArgyrisSpace, f: &dyn PlateFunction, w: &PlateField) -> Result<f64> {
    let rule = quadrature_triangle(crate::plate::MASS_DEGREE)?;
    let mut s = 0.0;
    for t in 0..space.mesh().n_triangles() {
        for (p, wt) in space.element_quadrature(t, &rule) {
            s += wt * f.jet(p).laplacian() * w.jet_on(t, p).laplacian();
        }
    }
    Ok(s)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `GᵀTG` for sparse `G` and dense `T`.
fn sandwich(g: &SparseMatrix, t: &DenseMatrix) -> DenseMatrix {
    let (m, n) = g.shape();
    // TG, column by column over the rows of G
    let mut tg = DenseMatrix::zeros(m, n);
    for k in 0..m {
        for (c, v) in g.row(k) {
            for r in 0..m {
                tg[(r, c)] += t[(r, k)] * v;
            }
        }
    }
    let mut out = DenseMatrix::zeros(n, n);
    for k in 0..m {
        for (r, v) in g.row(k) {
            for c in 0..n {
                out[(r, c)] += v * tg[(k, c)];
            }
        }
    }
    // symmetrize away rounding
    for r in 0..n {
        for c in r + 1..n {
            let s = 0.5 * (out[(r, c)] + out[(c, r)]);
            out[(r, c)] = s;
            out[(c, r)] = s;
        }
    }
    out
}
