//! Manufactured-solution studies: errors per level, observed rates and the
//! discrete inf-sup witness.

pub mod manufactured;
pub mod norms;
pub mod report;

use std::sync::Arc;

pub use manufactured::ManufacturedCase;
pub use norms::{
    fluid_error_norms, fluid_error_norms_with, plate_error_norms, plate_error_norms_with, FluidErrors, H2Seminorm,
    PlateErrors, FLUID_ERROR_DEGREE, PLATE_ERROR_DEGREE,
};
pub use report::{observed_rate, ConvergenceReport, LevelRecord, RateRow};

use crate::coupled::{energy_balance, CoupledOperators, CoupledSolution, REDUCED_TOLERANCE};
use crate::plate::{laplacian_norm, solve_xi, ArgyrisSpace, PlateField};
use crate::stokes::{FluidBackend, NodeClass, StokesSolver, TaylorHoodSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub h2_seminorm: H2Seminorm,
    /// Fluid level for each plate level; `None` ties them together.
    pub fluid_levels: Option<Vec<usize>>,
    pub backend: FluidBackend,
    pub plate_error_degree: usize,
    /// Each plate triangle is split into `s²` pieces for the error integrals.
    pub plate_error_subdivisions: usize,
    pub fluid_error_degree: usize,
    /// Relative tolerance of the iterative solvers.
    pub tolerance: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            h2_seminorm: H2Seminorm::Hessian,
            fluid_levels: None,
            backend: FluidBackend::Auto,
            plate_error_degree: PLATE_ERROR_DEGREE,
            plate_error_subdivisions: 1,
            fluid_error_degree: FLUID_ERROR_DEGREE,
            tolerance: REDUCED_TOLERANCE,
        }
    }
}

pub fn validate_levels(levels: &[usize]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("no refinement levels given".into()));
    }
    if levels.contains(&0) {
        return Err(Error::InvalidLevel(0));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("levels must be strictly increasing: {levels:?}")));
    }
    Ok(())
}

/// Everything computed for one level of the manufactured case.
pub struct LevelRun {
    pub operators: CoupledOperators,
    pub solution: CoupledSolution,
    pub record: LevelRecord,
}

pub fn run_level(case: &ManufacturedCase, level: usize, fluid_level: usize, options: &StudyOptions) -> Result<LevelRun> {
    let plate = ArgyrisSpace::build(level).map_err(|e| e.at_level(level, "plate space"))?;
    let fluid = TaylorHoodSpace::build(fluid_level).map_err(|e| e.at_level(level, "fluid space"))?;
    let stokes = StokesSolver::with_backend(fluid, case.lambda, options.backend)
        .map_err(|e| e.at_level(level, "fluid factorization"))?;
    let mut ops = CoupledOperators::new(plate, stokes, case.rho).map_err(|e| e.at_level(level, "reduced operators"))?;
    ops.set_iterative_tolerance(options.tolerance)?;
    let data = case.data();
    let sol = ops.solve(&data).map_err(|e| e.at_level(level, "coupled solve"))?;
    let plate_err = plate_error_norms_with(
        &sol.w1h,
        &case.w1,
        options.h2_seminorm,
        options.plate_error_degree,
        options.plate_error_subdivisions,
    )
    .map_err(|e| e.at_level(level, "plate errors"))?;
    let fluid_err = fluid_error_norms_with(&sol.uh, &sol.ph, &case.u, &|_| 0.0, options.fluid_error_degree)
        .map_err(|e| e.at_level(level, "fluid errors"))?;
    let energy = energy_balance(&ops, &data, &sol).map_err(|e| e.at_level(level, "energy balance"))?;
    let h2 = laplacian_norm(&sol.w1h)?;
    let record = LevelRecord {
        level,
        fluid_level,
        plate_elements: ops.plate().mesh().n_triangles(),
        fluid_elements: ops.stokes().space().mesh().n_tets(),
        char_length: ops.plate().mesh().characteristic_length(),
        plate: plate_err,
        fluid: fluid_err,
        energy_residual: energy.residual().abs(),
        energy_scale: energy.lambda_norm_sq,
        c_tilde: sol.c_tilde,
        constraint_defect: sol.w1h.integral()?.abs() / h2.max(f64::MIN_POSITIVE),
        trace_defect: trace_defect(&sol),
    };
    Ok(LevelRun {
        operators: ops,
        solution: sol,
        record,
    })
}

/// Max nodal mismatch between `u_h` and `[0, 0, w₂h]` on Ω and `0` on S.
pub fn trace_defect(sol: &CoupledSolution) -> f64 {
    let space = sol.uh.space();
    let mut worst: f64 = 0.0;
    for (node, p) in space.nodes().iter().enumerate() {
        let u = sol.uh.node_value(node);
        match space.node_class(node) {
            NodeClass::Omega => {
                let w = sol.w2h.evaluate([p[0], p[1]]).map(|j| j.value).unwrap_or(f64::NAN);
                worst = worst.max((u[2] - w).abs()).max(u[0].abs()).max(u[1].abs());
            }
            NodeClass::S => worst = u.iter().fold(worst, |m, v| m.max(v.abs())),
            NodeClass::Interior => {}
        }
    }
    worst
}

pub fn convergence_study(levels: &[usize], lambda: f64, rho: f64, options: &StudyOptions) -> Result<ConvergenceReport> {
    convergence_study_with(levels, lambda, rho, options, |_| Ok(()))
}

/// Like [`convergence_study`], handing every finished level to `each` before
/// its operators are dropped.
pub fn convergence_study_with(
    levels: &[usize],
    lambda: f64,
    rho: f64,
    options: &StudyOptions,
    mut each: impl FnMut(&LevelRun) -> Result<()>,
) -> Result<ConvergenceReport> {
    validate_levels(levels)?;
    let fluid_levels = match &options.fluid_levels {
        Some(f) if f.len() != levels.len() => {
            return Err(Error::InvalidParameter(format!(
                "{} fluid levels for {} plate levels",
                f.len(),
                levels.len()
            )))
        }
        Some(f) => f.clone(),
        None => levels.to_vec(),
    };
    let case = ManufacturedCase::new(lambda, rho)?;
    let mut records = Vec::with_capacity(levels.len());
    for (&level, &fluid_level) in levels.iter().zip(&fluid_levels) {
        let run = run_level(&case, level, fluid_level, options)?;
        each(&run)?;
        records.push(run.record);
    }
    Ok(ConvergenceReport {
        case: if rho == 0.0 { "paper-rho0".into() } else { "paper-rho".into() },
        lambda,
        rho,
        h2_seminorm: options.h2_seminorm,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSupRecord {
    pub level: usize,
    /// `β_h = |Δξ_h|`.
    pub beta: f64,
    /// `∫ξ_h`, which equals `β_h²`.
    pub xi_integral: f64,
}

impl InfSupRecord {
    pub fn identity_defect(&self) -> f64 {
        (self.xi_integral - self.beta * self.beta).abs() / (self.beta * self.beta)
    }
}

pub fn infsup_record(level: usize) -> Result<InfSupRecord> {
    let space: Arc<ArgyrisSpace> = ArgyrisSpace::build(level)?;
    let xi = solve_xi(&space).map_err(|e| e.at_level(level, "biharmonic solve"))?;
    Ok(InfSupRecord {
        level,
        beta: laplacian_norm(&xi)?,
        xi_integral: xi.integral()?,
    })
}

pub fn infsup_study(levels: &[usize]) -> Result<Vec<InfSupRecord>> {
    validate_levels(levels)?;
    levels.iter().map(|&l| infsup_record(l)).collect()
}

/// `|Δ(ξ_h − ξ_ref)|`, integrated over the reference mesh. Every reference
/// triangle lies inside one coarse triangle, so the integrand is polynomial
/// on each piece.
pub fn xi_laplacian_distance(coarse: &PlateField, reference: &PlateField) -> Result<f64> {
    let fine = reference.space();
    let mesh = coarse.space().mesh();
    let rule = crate::quadrature::quadrature_triangle(6)?;
    let mut acc = 0.0;
    for t in 0..fine.mesh().n_triangles() {
        let v = fine.mesh().triangle_coords(t);
        let centroid = [0, 1].map(|d| (v[0][d] + v[1][d] + v[2][d]) / 3.0);
        let host = mesh.locate(centroid)?;
        for (p, w) in fine.element_quadrature(t, &rule) {
            let d = coarse.jet_on(host, p).laplacian() - reference.jet_on(t, p).laplacian();
            acc += w * d * d;
        }
    }
    Ok(acc.sqrt())
}

/// `ξ_h` at each level compared with `ξ` at `reference_level`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiConvergence {
    pub records: Vec<InfSupRecord>,
    pub reference: InfSupRecord,
    /// `|Δ(ξ_h − ξ_ref)|` per level.
    pub distances: Vec<f64>,
}

impl XiConvergence {
    /// Observed orders of `|Δ(ξ_h − ξ_ref)|` between consecutive levels.
    pub fn orders(&self) -> Vec<f64> {
        self.records
            .windows(2)
            .zip(self.distances.windows(2))
            .map(|(r, d)| observed_rate(d[0], d[1], 1.0 / r[0].level as f64, 1.0 / r[1].level as f64))
            .collect()
    }
}

pub fn xi_convergence(levels: &[usize], reference_level: usize) -> Result<XiConvergence> {
    validate_levels(levels)?;
    let last = *levels.last().unwrap_or(&0);
    if reference_level <= last || reference_level % last != 0 {
        return Err(Error::InvalidParameter(format!(
            "reference level {reference_level} must be a multiple of every level and finer than {last}"
        )));
    }
    if levels.iter().any(|l| reference_level % l != 0) {
        return Err(Error::InvalidParameter(format!(
            "reference level {reference_level} is not a multiple of every level in {levels:?}"
        )));
    }
    let fine_space = ArgyrisSpace::build(reference_level)?;
    let fine = solve_xi(&fine_space).map_err(|e| e.at_level(reference_level, "biharmonic solve"))?;
    let reference = InfSupRecord {
        level: reference_level,
        beta: laplacian_norm(&fine)?,
        xi_integral: fine.integral()?,
    };
    let mut records = Vec::with_capacity(levels.len());
    let mut distances = Vec::with_capacity(levels.len());
    for &level in levels {
        let space = ArgyrisSpace::build(level)?;
        let xi = solve_xi(&space).map_err(|e| e.at_level(level, "biharmonic solve"))?;
        records.push(InfSupRecord {
            level,
            beta: laplacian_norm(&xi)?,
            xi_integral: xi.integral()?,
        });
        distances.push(xi_laplacian_distance(&xi, &fine)?);
    }
    Ok(XiConvergence {
        records,
        reference,
        distances,
    })
}

/// Observed orders of `|β_h − β_ref|` between consecutive levels.
pub fn infsup_orders(records: &[InfSupRecord], reference: f64) -> Vec<f64> {
    records
        .windows(2)
        .map(|w| {
            observed_rate(
                (w[0].beta - reference).abs(),
                (w[1].beta - reference).abs(),
                1.0 / w[0].level as f64,
                1.0 / w[1].level as f64,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_validation() {
        assert!(validate_levels(&[1, 2, 4]).is_ok());
        assert!(validate_levels(&[]).is_err());
        assert!(validate_levels(&[2, 2]).is_err());
        assert!(matches!(validate_levels(&[0, 1]), Err(Error::InvalidLevel(0))));
    }

    #[test]
    fn two_level_study_has_one_rate_row() {
        let r = convergence_study(&[1, 2], 1.0, 0.0, &StudyOptions::default()).unwrap();
        assert_eq!(r.records.len(), 2);
        assert_eq!(r.rates().len(), 1);
        for rec in &r.records {
            assert!(rec.constraint_defect < 1e-10);
            assert!(rec.trace_defect < 1e-12);
        }
    }

    #[test]
    fn fluid_level_override() {
        let opts = StudyOptions {
            fluid_levels: Some(vec![2]),
            ..StudyOptions::default()
        };
        let r = convergence_study(&[1], 1.0, 0.0, &opts).unwrap();
        assert_eq!(r.records[0].fluid_elements, 192);
        assert_eq!(r.records[0].plate_elements, 4);
        let bad = StudyOptions {
            fluid_levels: Some(vec![1, 2]),
            ..StudyOptions::default()
        };
        assert!(convergence_study(&[1], 1.0, 0.0, &bad).is_err());
    }

    #[test]
    fn xi_distance_to_itself_vanishes_and_matches_orthogonality() {
        let c = xi_convergence(&[1, 2], 4).unwrap();
        assert_eq!(c.distances.len(), 2);
        assert!(c.distances[1] < c.distances[0]);
        let space = ArgyrisSpace::build(2).unwrap();
        let xi = solve_xi(&space).unwrap();
        assert!(xi_laplacian_distance(&xi, &xi).unwrap() < 1e-14);
        assert!(xi_convergence(&[1, 3], 4).is_err());
    }

    #[test]
    fn infsup_identity_and_positivity() {
        for r in infsup_study(&[1, 2, 4]).unwrap() {
            assert!(r.beta > 0.0);
            assert!(r.identity_defect() < 1e-9, "{r:?}");
        }
    }
}
