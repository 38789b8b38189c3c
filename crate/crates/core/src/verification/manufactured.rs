//! Closed-form coupled solution on the unit square / unit cube with zero pressure.

use std::sync::Arc;

use crate::coupled::{ResolventData, SecondDatum};
use crate::functions::{ExactPlateFunction, ExactVectorField, Poly, SeparableField};
use crate::{Error, Result};

/// `x^a (x − 1)^b`.
fn power_pair(a: u32, b: u32) -> Poly {
    &Poly::monomial(a as usize) * &Poly::from_coeffs(&[-1.0, 1.0]).pow(b)
}

fn poly(c: &[f64]) -> Poly {
    Poly::from_coeffs(c)
}

#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub lambda: f64,
    pub rho: f64,
    pub w1: ExactPlateFunction,
    pub w2: ExactPlateFunction,
    pub u: ExactVectorField,
    /// `λ w₁ − w₂`.
    pub w1_star: ExactPlateFunction,
    /// `λ w₂ + Δ²w₁`.
    pub w2_star: ExactPlateFunction,
    /// `P_ρ w₂* = λ (w₂ − ρ Δw₂) + Δ²w₁`, the datum paired with test functions.
    pub w2_star_rho: ExactPlateFunction,
    /// `λ u − Δu`.
    pub u_star: ExactVectorField,
}

/// Pieces of the closed forms, kept separate so tests can compare them.
pub struct ClosedForms {
    pub w1: SeparableField,
    pub w2: SeparableField,
    pub u1: SeparableField,
    pub u3: SeparableField,
}

pub fn closed_forms() -> ClosedForms {
    let x4 = power_pair(4, 4);
    let odd = poly(&[-1.0, 2.0]);
    let y4 = power_pair(4, 4);
    let w1 = SeparableField::planar(-1.0, &x4 * &odd, y4.clone());

    let a = &(&power_pair(2, 2) * &odd) * &poly(&[1.0, -6.0, 6.0]);
    let b = &power_pair(2, 2) * &poly(&[3.0, -14.0, 14.0]);
    let w2 = &SeparableField::planar(12.0, a, y4.clone()) + &SeparableField::planar(4.0, &x4 * &odd, b.clone());

    let gz = poly(&[0.0, 0.0, -30.0, -60.0, -30.0]);
    let hz = poly(&[-1.0, 0.0, 0.0, -10.0, -15.0, -6.0]);
    let u1x = &SeparableField::planar(2.0, &power_pair(3, 3) * &poly(&[2.0, -9.0, 9.0]), y4)
        + &SeparableField::planar(0.8, power_pair(5, 5), b);
    let u1 = u1x.times_z(&gz);
    let u3 = w2.times_z(&hz).scale(-1.0);
    ClosedForms { w1, w2, u1, u3 }
}

impl ManufacturedCase {
    pub fn new(lambda: f64, rho: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be nonnegative, got {rho}")));
        }
        let ClosedForms { w1, w2, u1, u3 } = closed_forms();
        let bilap = w1.laplacian_2d().laplacian_2d();
        let w1_star = &w1.scale(lambda) - &w2;
        let w2_star = &w2.scale(lambda) + &bilap;
        let w2_star_rho = &(&w2.scale(lambda) - &w2.laplacian_2d().scale(lambda * rho)) + &bilap;
        let u = [u1, SeparableField::default(), u3];
        let u_star = [0, 1, 2].map(|c| &u[c].scale(lambda) - &u[c].laplacian_3d());
        Ok(Self {
            lambda,
            rho,
            w1: ExactPlateFunction::new(w1),
            w2: ExactPlateFunction::new(w2),
            u: ExactVectorField::new(u),
            w1_star: ExactPlateFunction::new(w1_star),
            w2_star: ExactPlateFunction::new(w2_star),
            w2_star_rho: ExactPlateFunction::new(w2_star_rho),
            u_star: ExactVectorField::new(u_star),
        })
    }

    /// Resolvent data for the coupled solver. For `ρ > 0` the second datum is
    /// passed as `P_ρ w₂*`.
    pub fn data(&self) -> ResolventData {
        let w2_star = if self.rho > 0.0 {
            SecondDatum::Preconditioned(Arc::new(self.w2_star_rho.clone()))
        } else {
            SecondDatum::Plain(Arc::new(self.w2_star.clone()))
        };
        ResolventData {
            lambda: self.lambda,
            rho: self.rho,
            w1_star: Arc::new(self.w1_star.clone()),
            w2_star,
            u_star: Arc::new(self.u_star.clone()),
        }
    }

    /// `Δ²w₁ + (Δu)·ν` on the plate, `ν = e_z`.
    pub fn interface_balance(&self, p: [f64; 2]) -> f64 {
        let q = [p[0], p[1], 0.0];
        self.w1.field().laplacian_2d().laplacian_2d().eval(q) + self.u.components()[2].laplacian_3d().eval(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{PlateFunction, VectorFunction};

    #[test]
    fn w2_is_minus_laplacian_of_w1() {
        let f = closed_forms();
        let lap = f.w1.laplacian_2d();
        for &(x, y) in &[(0.1, 0.2), (0.37, 0.81), (0.5, 0.5), (0.9, 0.05)] {
            let q = [x, y, 0.0];
            assert!((f.w2.eval(q) + lap.eval(q)).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetry_and_zeros() {
        let c = ManufacturedCase::new(1.0, 0.0).unwrap();
        for k in 0..=10 {
            let y = k as f64 / 10.0;
            assert_eq!(c.w1.value([0.5, y]), 0.0);
        }
        // odd about x = 1/2
        let a = c.w2.value([0.3, 0.6]);
        let b = c.w2.value([0.7, 0.6]);
        assert!((a + b).abs() < 1e-16);
    }

    #[test]
    fn fluid_traces() {
        let c = ManufacturedCase::new(1.0, 0.0).unwrap();
        let p = [0.23, 0.71];
        let u = c.u.value([p[0], p[1], 0.0]);
        assert_eq!(u[0], 0.0);
        assert!((u[2] - c.w2.value(p)).abs() < 1e-16);
        assert_eq!(c.u.value([0.4, 0.3, -1.0]), [0.0; 3]);
        assert!(c.u.value([0.0, 0.3, -0.4]).iter().all(|v| v.abs() < 1e-16));
    }

    #[test]
    fn data_definitions() {
        let lambda = 2.5;
        let c = ManufacturedCase::new(lambda, 0.0).unwrap();
        let p = [0.31, 0.47];
        assert!((c.w1_star.value(p) - (lambda * c.w1.value(p) - c.w2.value(p))).abs() < 1e-16);
        let z = [0.31, 0.47, -0.6];
        let lap = [0, 1, 2].map(|k| c.u.components()[k].laplacian_3d().eval(z));
        let us = c.u_star.value(z);
        let u = c.u.value(z);
        for k in 0..3 {
            assert!((us[k] - (lambda * u[k] - lap[k])).abs() < 1e-14);
        }
        assert!(ManufacturedCase::new(0.0, 0.0).is_err());
        assert!(ManufacturedCase::new(1.0, -0.1).is_err());
    }

    #[test]
    fn rho_datum_reduces_to_plain_at_zero() {
        let c = ManufacturedCase::new(1.0, 0.0).unwrap();
        let p = [0.2, 0.9];
        assert_eq!(c.w2_star_rho.value(p), c.w2_star.value(p));
        assert!(matches!(c.data().w2_star, SecondDatum::Plain(_)));
        let r = ManufacturedCase::new(1.0, 0.1).unwrap();
        assert!(matches!(r.data().w2_star, SecondDatum::Preconditioned(_)));
    }

    #[test]
    fn exact_derivatives_match_finite_differences() {
        let c = ManufacturedCase::new(1.0, 0.0).unwrap();
        let h = 1e-5;
        for &p in &[[0.21, 0.33], [0.6, 0.15], [0.77, 0.52]] {
            let j = c.w1.jet(p);
            let fd = (c.w1.value([p[0] + h, p[1]]) - c.w1.value([p[0] - h, p[1]])) / (2.0 * h);
            assert!((fd - j.grad[0]).abs() <= 1e-5 * j.grad[0].abs().max(1e-6));
            let q = [p[0], p[1], -0.4];
            let g = c.u.gradient(q);
            let fd = (c.u.value([q[0], q[1], q[2] + h])[2] - c.u.value([q[0], q[1], q[2] - h])[2]) / (2.0 * h);
            assert!((fd - g[2][2]).abs() <= 1e-5 * g[2][2].abs().max(1e-6));
        }
    }
}
