//! Sparse and dense matrices plus the direct solvers used by the assemblers.
//!
//! Storage is our own compressed-row form; factorizations are delegated to
//! `faer` (supernodal sparse LU with partial pivoting for the indefinite
//! saddle systems, sparse/dense Cholesky for the definite plate blocks).

use dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};

use crate::error::{Error, Result};

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        }
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::with_capacity(n, n, n);
        for i in 0..n {
            b.add(i, i, 1.0);
        }
        b.build().flagged_symmetric()
    }

    /// Marks the matrix as symmetric (the caller vouches for it).
    pub fn flagged_symmetric(mut self) -> Self {
        self.symmetric = true;
        self
    }

    pub fn is_flagged_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `selfᵀ x`.
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut out = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[c] += v * x[r];
            }
        }
        out
    }

    /// `xᵀ self y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::with_capacity(self.n_cols, self.n_rows, self.nnz());
        for (r, c, v) in self.triplets() {
            b.add(c, r, v);
        }
        let mut t = b.build();
        t.symmetric = self.symmetric;
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|`.
    pub fn symmetry_defect(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Restricts to the given rows and columns (in the given order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut b = TripletBuilder::new(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    b.add(i, col_map[c], v);
                }
            }
        }
        let mut out = b.build();
        out.symmetric = self.symmetric && rows == cols;
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trips: Vec<_> = self
            .triplets()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &trips)
            .map_err(|e| Error::DimensionMismatch(format!("sparse conversion: {e:?}")))
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.n_cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.n_cols + c]
    }
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for r in 0..n_rows {
            for c in 0..n_cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self[(r, c)]).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..self.n_rows {
            for c in 0..r {
                d = d.max((self[(r, c)] - self[(c, r)]).abs());
            }
        }
        d
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &DenseMatrix) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add_sparse_scaled(&mut self, alpha: f64, other: &SparseMatrix) {
        assert_eq!(self.shape(), other.shape());
        for (r, c, v) in other.triplets() {
            self[(r, c)] += alpha * v;
        }
    }

    /// `selfᵀ * other`.
    pub fn transpose_mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_rows, other.n_rows);
        let out = self.to_faer().transpose() * other.to_faer();
        Self::from_faer(&out)
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, other.n_rows);
        let out = self.to_faer() * other.to_faer();
        Self::from_faer(&out)
    }

    pub fn self_adjoint_eigenvalues(&self) -> Result<Vec<f64>> {
        self.to_faer()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::NotConverged {
                context: format!("eigenvalues: {e:?}"),
                residual: f64::NAN,
                tolerance: 0.0,
            })
    }

    /// Solves `self x = rhs` with partial-pivoting LU.
    pub fn lu_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let a = self.to_faer();
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = a.partial_piv_lu().solve(&b);
        let x: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular {
                context: "dense LU".into(),
                pivot: None,
            });
        }
        Ok(x)
    }

    pub fn cholesky(&self) -> Result<DenseCholesky> {
        let llt = self.to_faer().llt(Side::Lower).map_err(|e| Error::Singular {
            context: format!("dense Cholesky ({e:?})"),
            pivot: None,
        })?;
        Ok(DenseCholesky { llt })
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.n_rows, self.n_cols, |r, c| self[(r, c)])
    }

    fn from_faer(m: &Mat<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

/// Dense `LLᵀ` factorization.
pub struct DenseCholesky {
    llt: faer::linalg::solvers::Llt<f64>,
}

impl DenseCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.llt.solve(&b);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

fn to_cols(rhs: &[Vec<f64>], n: usize) -> Mat<f64> {
    Mat::from_fn(n, rhs.len(), |i, j| rhs[j][i])
}

fn from_cols(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)]).collect())
        .collect()
}

fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

/// Default relative residual accepted from a direct solve.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Sparse LU factorization with partial pivoting, reusable for many right-hand sides.
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let (n, m) = a.shape();
        if n != m {
            return Err(Error::DimensionMismatch(format!("LU of {n}x{m} matrix")));
        }
        let lu = a.to_faer()?.sp_lu().map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::Singular {
                context: "sparse LU".into(),
                pivot: Some(index),
            },
            other => Error::Singular {
                context: format!("sparse LU ({other:?})"),
                pivot: None,
            },
        })?;
        Ok(Self { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_many(std::slice::from_ref(&rhs.to_vec()))?.remove(0))
    }

    /// Solves for each column; the factorization is shared.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rhs.iter().any(|b| b.len() != self.n) {
            return Err(Error::DimensionMismatch("right-hand side length".into()));
        }
        let mut b = to_cols(rhs, self.n);
        self.lu.solve_in_place(b.as_mut());
        let out = from_cols(&b);
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Singular {
                context: "sparse LU solve produced non-finite values".into(),
                pivot: None,
            });
        }
        Ok(out)
    }

    /// Solve followed by a residual check against `a`.
    pub fn solve_checked(&self, a: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        let x = self.solve(rhs)?;
        let res = relative_residual(a, &x, rhs);
        if res > tol {
            return Err(Error::NotConverged {
                context: "sparse LU".into(),
                residual: res,
                tolerance: tol,
            });
        }
        Ok(x)
    }
}

/// Sparse `LDLᵀ` of a symmetric indefinite matrix with a fill-reducing (AMD)
/// ordering.
///
/// No pivoting is done. If the plain factorization breaks down, it is retried
/// with pivots whose sign disagrees with `signs` replaced by `±δ`. Solves run
/// iterative refinement against the exact matrix.
pub struct SparseLdlt {
    matrix: SparseMatrix,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    n: usize,
}

/// Refinement stops once the relative residual drops below this value.
const REFINE_TOLERANCE: f64 = 1e-14;
const REFINE_MAX_STEPS: usize = 20;

impl SparseLdlt {
    /// `signs[i]` is the expected sign (`1` or `-1`) of pivot `i`.
    pub fn factor(a: &SparseMatrix, signs: &[i8]) -> Result<Self> {
        let (n, m) = a.shape();
        if n != m || signs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "LDLT of {n}x{m} matrix with {} signs",
                signs.len()
            )));
        }
        // lower triangle only, with every diagonal entry present in the pattern
        let mut trips: Vec<_> = a
            .triplets()
            .filter(|(r, c, _)| r > c)
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        trips.extend((0..n).map(|i| Triplet::new(i, i, a.get(i, i))));
        let lower = SparseColMat::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::DimensionMismatch(format!("sparse conversion: {e:?}")))?;
        let symbolic = factorize_symbolic_cholesky(
            lower.symbolic(),
            Side::Lower,
            SymmetricOrdering::Amd,
            Default::default(),
        )
        .map_err(|e| Error::Singular {
            context: format!("symbolic LDLT ({e:?})"),
            pivot: None,
        })?;
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let par = Par::Seq;
        let mut mem = MemBuffer::new(
            symbolic.factorize_numeric_ldlt_scratch::<f64>(par, Default::default()),
        );
        let mut values = vec![0.0; symbolic.len_val()];
        let mut attempt = |values: &mut [f64], signs: Option<&[i8]>| {
            symbolic
                .factorize_numeric_ldlt(
                    values,
                    lower.as_ref(),
                    Side::Lower,
                    LdltRegularization {
                        dynamic_regularization_signs: signs,
                        dynamic_regularization_delta: 1e-9 * scale,
                        dynamic_regularization_epsilon: 1e-12 * scale,
                    },
                    par,
                    MemStack::new(&mut mem),
                    Default::default(),
                )
                .map(|_| ())
        };
        // the plain factorization succeeds for the saddle systems used here;
        // sign-driven regularization is the fallback when it hits a zero pivot
        if attempt(&mut values, None).is_err() {
            values.iter_mut().for_each(|v| *v = 0.0);
            attempt(&mut values, Some(signs)).map_err(|e| Error::Singular {
                context: format!("sparse LDLT ({e:?})"),
                pivot: None,
            })?;
        }
        Ok(Self {
            matrix: a.clone(),
            symbolic,
            values,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn apply_inverse(&self, b: &mut Mat<f64>) {
        let par = Par::Seq;
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(b.ncols(), par));
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            b.as_mut(),
            par,
            MemStack::new(&mut mem),
        );
    }

    /// Solves every column with iterative refinement against the exact matrix.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rhs.iter().any(|b| b.len() != self.n) {
            return Err(Error::DimensionMismatch("right-hand side length".into()));
        }
        let mut x = to_cols(rhs, self.n);
        self.apply_inverse(&mut x);
        let mut out = from_cols(&x);
        let mut active: Vec<usize> = (0..rhs.len()).collect();
        for _ in 0..REFINE_MAX_STEPS {
            let mut residuals = Vec::new();
            let mut still = Vec::new();
            for &j in &active {
                let ax = self.matrix.mul_vec(&out[j]);
                let r: Vec<f64> = rhs[j].iter().zip(&ax).map(|(b, y)| b - y).collect();
                let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nb = rhs[j].iter().map(|v| v * v).sum::<f64>().sqrt();
                if nr > REFINE_TOLERANCE * nb {
                    residuals.push(r);
                    still.push(j);
                }
            }
            if still.is_empty() {
                break;
            }
            let mut d = to_cols(&residuals, self.n);
            self.apply_inverse(&mut d);
            for (k, &j) in still.iter().enumerate() {
                for i in 0..self.n {
                    out[j][i] += d[(i, k)];
                }
            }
            active = still;
        }
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Singular {
                context: "sparse LDLT solve produced non-finite values".into(),
                pivot: None,
            });
        }
        Ok(out)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_many(std::slice::from_ref(&rhs.to_vec()))?.remove(0))
    }

    /// Solve followed by a residual check.
    pub fn solve_checked(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        let x = self.solve(rhs)?;
        let res = relative_residual(&self.matrix, &x, rhs);
        if res > tol {
            return Err(Error::NotConverged {
                context: "sparse LDLT with refinement".into(),
                residual: res,
                tolerance: tol,
            });
        }
        Ok(x)
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SparseCholesky {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SparseCholesky {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let (n, m) = a.shape();
        if n != m {
            return Err(Error::DimensionMismatch(format!("Cholesky of {n}x{m} matrix")));
        }
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Singular {
                context: format!("sparse Cholesky ({e:?})"),
                pivot: None,
            })?;
        Ok(Self { llt, n })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch("right-hand side length".into()));
        }
        let mut b = to_cols(std::slice::from_ref(&rhs.to_vec()), self.n);
        self.llt.solve_in_place(b.as_mut());
        Ok(from_cols(&b).remove(0))
    }

    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rhs.iter().any(|b| b.len() != self.n) {
            return Err(Error::DimensionMismatch("right-hand side length".into()));
        }
        let mut b = to_cols(rhs, self.n);
        self.llt.solve_in_place(b.as_mut());
        Ok(from_cols(&b))
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Outcome of [`pcg`].
#[derive(Debug, Clone)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for a symmetric positive (semi)definite
/// operator, started from zero. Stops when `‖r‖ ≤ tol ‖b‖`.
pub fn pcg(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    mut precondition: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    tol: f64,
    max_iterations: usize,
    context: &str,
) -> Result<PcgResult> {
    let n = b.len();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, c)| a * c).sum::<f64>();
    let nb = norm(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok(PcgResult {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut z = precondition(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for k in 0..max_iterations {
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Singular {
                context: format!("{context}: operator not positive on search direction"),
                pivot: None,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / nb;
        if rel <= tol {
            return Ok(PcgResult {
                x,
                iterations: k + 1,
                relative_residual: rel,
            });
        }
        z = precondition(&r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        context: format!("{context} after {max_iterations} iterations"),
        residual: norm(&r) / nb,
        tolerance: tol,
    })
}

/// Sparse saddle-point system `[A Bᵀ; B 0] [x; y] = [f; g]`.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub rhs_f: Vec<f64>,
    pub rhs_g: Vec<f64>,
}

impl SaddleSystem {
    pub fn new(a: SparseMatrix, b: SparseMatrix, rhs_f: Vec<f64>, rhs_g: Vec<f64>) -> Result<Self> {
        let (n, m) = a.shape();
        let (k, l) = b.shape();
        if n != m || l != n || rhs_f.len() != n || rhs_g.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "saddle blocks A {n}x{m}, B {k}x{l}, f {}, g {}",
                rhs_f.len(),
                rhs_g.len()
            )));
        }
        if !a.is_flagged_symmetric() {
            return Err(Error::InvalidParameter(
                "saddle block A must be flagged symmetric".into(),
            ));
        }
        Ok(Self { a, b, rhs_f, rhs_g })
    }

    /// The full symmetric block matrix.
    pub fn block_matrix(&self) -> SparseMatrix {
        let n = self.a.shape().0;
        let k = self.b.shape().0;
        let mut t = TripletBuilder::with_capacity(n + k, n + k, self.a.nnz() + 2 * self.b.nnz());
        for (r, c, v) in self.a.triplets() {
            t.add(r, c, v);
        }
        for (r, c, v) in self.b.triplets() {
            t.add(n + r, c, v);
            t.add(c, n + r, v);
        }
        t.build().flagged_symmetric()
    }

    /// Direct solve; returns `(x, y)`.
    pub fn solve(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.a.shape().0;
        let k = self.block_matrix();
        let lu = SparseLu::factor(&k)?;
        let mut rhs = self.rhs_f.clone();
        rhs.extend_from_slice(&self.rhs_g);
        let mut sol = lu.solve_checked(&k, &rhs, SOLVE_TOLERANCE)?;
        let y = sol.split_off(n);
        Ok((sol, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i > 0 {
                b.add(i, i - 1, -1.0);
                b.add(i - 1, i, -1.0);
            }
        }
        b.build().flagged_symmetric()
    }

    #[test]
    fn builder_sums_duplicates_and_sorts() {
        let mut b = TripletBuilder::new(2, 3);
        b.add(1, 2, 1.0);
        b.add(0, 1, 2.0);
        b.add(1, 0, 3.0);
        b.add(1, 2, 4.0);
        let m = b.build();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 5.0);
        let cols: Vec<_> = m.row(1).map(|(c, _)| c).collect();
        assert_eq!(cols, [0, 2]);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![2.0, 8.0]);
        assert_eq!(m.mul_transpose_vec(&[1.0, 1.0]), vec![3.0, 2.0, 5.0]);
    }

    #[test]
    fn pcg_solves_spd_system() {
        let a = laplacian_1d(30);
        let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let diag: Vec<f64> = (0..30).map(|i| a.get(i, i)).collect();
        let res = pcg(
            |v| Ok(a.mul_vec(v)),
            |r| Ok(r.iter().zip(&diag).map(|(x, d)| x / d).collect()),
            &b,
            1e-13,
            100,
            "test",
        )
        .unwrap();
        assert!(res.iterations <= 30);
        assert!(relative_residual(&a, &res.x, &b) < 1e-12);
        let zero = pcg(|v| Ok(a.mul_vec(v)), |r| Ok(r.to_vec()), &vec![0.0; 30], 1e-12, 10, "t").unwrap();
        assert_eq!(zero.iterations, 0);
        let fail = pcg(|v| Ok(a.mul_vec(v)), |r| Ok(r.to_vec()), &b, 1e-14, 2, "t");
        assert!(matches!(fail, Err(Error::NotConverged { .. })));
    }

    #[test]
    fn identity_solve() {
        let id = SparseMatrix::identity(4);
        let lu = SparseLu::factor(&id).unwrap();
        let b = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(lu.solve(&b).unwrap(), b);
    }

    #[test]
    fn hand_eliminated_saddle() {
        // A = I2, B = [1 1], f = 0, g = 2: x = -Bᵀy, Bx = -2y = 2
        let a = SparseMatrix::identity(2);
        let mut bb = TripletBuilder::new(1, 2);
        bb.add(0, 0, 1.0);
        bb.add(0, 1, 1.0);
        let sys = SaddleSystem::new(a, bb.build(), vec![0.0, 0.0], vec![2.0]).unwrap();
        let (x, y) = sys.solve().unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!((y[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn factor_once_solve_many() {
        let a = laplacian_1d(30);
        let lu = SparseLu::factor(&a).unwrap();
        let rhs: Vec<Vec<f64>> = (0..5)
            .map(|k| (0..30).map(|i| ((i * (k + 1)) as f64).sin()).collect())
            .collect();
        let batch = lu.solve_many(&rhs).unwrap();
        for (b, x) in rhs.iter().zip(&batch) {
            let single = lu.solve(b).unwrap();
            for (p, q) in single.iter().zip(x) {
                assert!((p - q).abs() < 1e-12);
            }
            assert!(relative_residual(&a, x, b) < 1e-12);
        }
    }

    #[test]
    fn cholesky_matches_lu() {
        let a = laplacian_1d(20);
        let b: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let x1 = SparseCholesky::factor(&a).unwrap().solve(&b).unwrap();
        let x2 = SparseLu::factor(&a).unwrap().solve(&b).unwrap();
        let x3 = a.to_dense().cholesky().unwrap().solve(&b);
        let x4 = a.to_dense().lu_solve(&b).unwrap();
        for i in 0..20 {
            assert!((x1[i] - x2[i]).abs() < 1e-10);
            assert!((x1[i] - x3[i]).abs() < 1e-10);
            assert!((x1[i] - x4[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_reported() {
        let mut b = TripletBuilder::new(3, 3);
        b.add(0, 0, 1.0);
        b.add(1, 1, 1.0);
        let m = b.build();
        assert!(matches!(SparseLu::factor(&m), Err(Error::Singular { .. })));
        let neg = {
            let mut b = TripletBuilder::new(2, 2);
            b.add(0, 0, -1.0);
            b.add(1, 1, 1.0);
            b.build().to_dense()
        };
        assert!(neg.cholesky().is_err());
    }

    #[test]
    fn symmetry_and_select() {
        let a = laplacian_1d(5);
        assert_eq!(a.symmetry_defect(), 0.0);
        let s = a.select(&[1, 2], &[1, 2]);
        assert_eq!(s.to_dense(), DenseMatrix::from_fn(2, 2, |r, c| if r == c { 2.0 } else { -1.0 }));
        assert!(s.is_flagged_symmetric());
        assert_eq!(a.transpose(), a);
    }
}
