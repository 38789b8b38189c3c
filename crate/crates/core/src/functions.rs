//! Pointwise-evaluable data on the plate and in the fluid, and the exact
//! polynomial algebra used to build manufactured solutions.

use std::ops::{Add, Mul, Neg, Sub};

/// Value, gradient and Hessian `[xx, xy, yy]` of a plate function at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

impl Jet2 {
    pub fn laplacian(&self) -> f64 {
        self.hess[0] + self.hess[2]
    }

    pub fn nan() -> Self {
        Self {
            value: f64::NAN,
            grad: [f64::NAN; 2],
            hess: [f64::NAN; 3],
        }
    }
}

/// A scalar function on the plate with derivatives up to second order.
pub trait PlateFunction: Send + Sync {
    fn jet(&self, p: [f64; 2]) -> Jet2;

    fn value(&self, p: [f64; 2]) -> f64 {
        self.jet(p).value
    }
}

impl<F> PlateFunction for F
where
    F: Fn([f64; 2]) -> Jet2 + Send + Sync,
{
    fn jet(&self, p: [f64; 2]) -> Jet2 {
        self(p)
    }
}

/// A vector field in the fluid domain; `gradient[i][j] = ∂u_i / ∂x_j`.
pub trait VectorFunction: Send + Sync {
    fn value(&self, p: [f64; 3]) -> [f64; 3];

    fn gradient(&self, p: [f64; 3]) -> [[f64; 3]; 3];
}

/// The zero function, usable as plate or fluid data.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl PlateFunction for Zero {
    fn jet(&self, _: [f64; 2]) -> Jet2 {
        Jet2::default()
    }
}

impl VectorFunction for Zero {
    fn value(&self, _: [f64; 3]) -> [f64; 3] {
        [0.0; 3]
    }

    fn gradient(&self, _: [f64; 3]) -> [[f64; 3]; 3] {
        [[0.0; 3]; 3]
    }
}

/// Univariate polynomial, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    /// `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Poly(c)
    }

    /// Builds a polynomial from ascending coefficients.
    pub fn from_coeffs(c: &[f64]) -> Self {
        Poly(c.to_vec())
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Poly::constant(1.0), |acc, _| &acc * self)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.0.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn scale(&self, s: f64) -> Self {
        Poly(self.0.iter().map(|c| c * s).collect())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.0.len().max(rhs.0.len());
        Poly(
            (0..n)
                .map(|k| self.0.get(k).unwrap_or(&0.0) + rhs.0.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &rhs.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut c = vec![0.0; self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly(c)
    }
}

/// `coef · px(x) · py(y) · pz(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTerm {
    pub coef: f64,
    pub px: Poly,
    pub py: Poly,
    pub pz: Poly,
}

/// Finite sum of separable terms; derivatives are exact.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeparableField(pub Vec<SeparableTerm>);

impl SeparableField {
    pub fn term(coef: f64, px: Poly, py: Poly, pz: Poly) -> Self {
        SeparableField(vec![SeparableTerm { coef, px, py, pz }])
    }

    /// A field depending on `(x, y)` only.
    pub fn planar(coef: f64, px: Poly, py: Poly) -> Self {
        Self::term(coef, px, py, Poly::constant(1.0))
    }

    pub fn eval(&self, p: [f64; 3]) -> f64 {
        self.0
            .iter()
            .map(|t| t.coef * t.px.eval(p[0]) * t.py.eval(p[1]) * t.pz.eval(p[2]))
            .sum()
    }

    /// `∂^a_x ∂^b_y ∂^c_z`.
    pub fn derivative(&self, a: usize, b: usize, c: usize) -> Self {
        SeparableField(
            self.0
                .iter()
                .map(|t| SeparableTerm {
                    coef: t.coef,
                    px: t.px.nth_derivative(a),
                    py: t.py.nth_derivative(b),
                    pz: t.pz.nth_derivative(c),
                })
                .collect(),
        )
    }

    pub fn laplacian_2d(&self) -> Self {
        &self.derivative(2, 0, 0) + &self.derivative(0, 2, 0)
    }

    pub fn laplacian_3d(&self) -> Self {
        &self.laplacian_2d() + &self.derivative(0, 0, 2)
    }

    /// Multiplies every term by a polynomial in `z`.
    pub fn times_z(&self, pz: &Poly) -> Self {
        SeparableField(
            self.0
                .iter()
                .map(|t| SeparableTerm {
                    pz: &t.pz * pz,
                    ..t.clone()
                })
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        SeparableField(
            self.0
                .iter()
                .map(|t| SeparableTerm {
                    coef: t.coef * s,
                    ..t.clone()
                })
                .collect(),
        )
    }

    pub fn plate_jet(&self, p: [f64; 2]) -> Jet2 {
        let q = [p[0], p[1], 0.0];
        Jet2 {
            value: self.eval(q),
            grad: [self.derivative(1, 0, 0).eval(q), self.derivative(0, 1, 0).eval(q)],
            hess: [
                self.derivative(2, 0, 0).eval(q),
                self.derivative(1, 1, 0).eval(q),
                self.derivative(0, 2, 0).eval(q),
            ],
        }
    }
}

impl Add for &SeparableField {
    type Output = SeparableField;
    fn add(self, rhs: &SeparableField) -> SeparableField {
        let mut t = self.0.clone();
        t.extend(rhs.0.iter().cloned());
        SeparableField(t)
    }
}

impl Sub for &SeparableField {
    type Output = SeparableField;
    fn sub(self, rhs: &SeparableField) -> SeparableField {
        self + &rhs.scale(-1.0)
    }
}

impl Neg for &SeparableField {
    type Output = SeparableField;
    fn neg(self) -> SeparableField {
        self.scale(-1.0)
    }
}

/// A plate function with precomputed exact derivative fields.
#[derive(Debug, Clone)]
pub struct ExactPlateFunction {
    value: SeparableField,
    dx: SeparableField,
    dy: SeparableField,
    dxx: SeparableField,
    dxy: SeparableField,
    dyy: SeparableField,
}

impl ExactPlateFunction {
    pub fn new(f: SeparableField) -> Self {
        Self {
            dx: f.derivative(1, 0, 0),
            dy: f.derivative(0, 1, 0),
            dxx: f.derivative(2, 0, 0),
            dxy: f.derivative(1, 1, 0),
            dyy: f.derivative(0, 2, 0),
            value: f,
        }
    }

    pub fn field(&self) -> &SeparableField {
        &self.value
    }
}

impl PlateFunction for ExactPlateFunction {
    fn jet(&self, p: [f64; 2]) -> Jet2 {
        let q = [p[0], p[1], 0.0];
        Jet2 {
            value: self.value.eval(q),
            grad: [self.dx.eval(q), self.dy.eval(q)],
            hess: [self.dxx.eval(q), self.dxy.eval(q), self.dyy.eval(q)],
        }
    }
}

/// A vector field with exact componentwise gradients.
#[derive(Debug, Clone)]
pub struct ExactVectorField {
    components: [SeparableField; 3],
    gradients: [[SeparableField; 3]; 3],
}

impl ExactVectorField {
    pub fn new(components: [SeparableField; 3]) -> Self {
        let gradients = [0, 1, 2].map(|i| {
            [
                components[i].derivative(1, 0, 0),
                components[i].derivative(0, 1, 0),
                components[i].derivative(0, 0, 1),
            ]
        });
        Self {
            components,
            gradients,
        }
    }

    pub fn components(&self) -> &[SeparableField; 3] {
        &self.components
    }

    pub fn divergence(&self, p: [f64; 3]) -> f64 {
        (0..3).map(|i| self.gradients[i][i].eval(p)).sum()
    }
}

impl VectorFunction for ExactVectorField {
    fn value(&self, p: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| self.components[i].eval(p))
    }

    fn gradient(&self, p: [f64; 3]) -> [[f64; 3]; 3] {
        [0, 1, 2].map(|i| [0, 1, 2].map(|j| self.gradients[i][j].eval(p)))
    }
}
