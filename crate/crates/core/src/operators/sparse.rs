use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::Basis;
use crate::error::{Error, Result};

/// Entries below this magnitude are dropped at assembly.
pub const DROP_TOLERANCE: f64 = 1e-15;

/// Complex sparse matrix in compressed-row form, tagged with the basis it
/// acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
    basis_tag: String,
}

impl SparseOperator {
    pub fn zeros(dim: usize, basis_tag: &str) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            values: Vec::new(),
            basis_tag: basis_tag.to_string(),
        }
    }

    pub fn identity(dim: usize, basis_tag: &str) -> Self {
        Self::diagonal(basis_tag, (0..dim).map(|_| 1.0).collect())
    }

    pub fn diagonal(basis_tag: &str, diag: Vec<f64>) -> Self {
        let dim = diag.len();
        let triplets = diag
            .into_iter()
            .enumerate()
            .map(|(i, d)| (i, i, Complex64::new(d, 0.0)))
            .collect();
        Self::from_triplets(dim, basis_tag, triplets)
    }

    /// Canonicalizes `(row, col, value)` triplets: duplicates summed, tiny
    /// entries dropped.
    pub fn from_triplets(
        dim: usize,
        basis_tag: &str,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        triplets.par_sort_unstable_by_key(|(r, c, _)| (*r, *c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "index ({r}, {c}) out of range {dim}");
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                values.push(v);
            }
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(values) {
            if v.norm() >= DROP_TOLERANCE {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            cols: keep_cols,
            values: keep_vals,
            basis_tag: basis_tag.to_string(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn basis_tag(&self) -> &str {
        &self.basis_tag
    }

    pub fn check_basis(&self, basis: &Basis) -> Result<()> {
        if self.basis_tag != basis.tag() || self.dim != basis.len() {
            return Err(Error::BasisMismatch {
                expected: basis.tag().to_string(),
                found: self.basis_tag.clone(),
            });
        }
        Ok(())
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i).re).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim);
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *out = acc;
        });
    }

    /// `⟨x|A|x⟩`.
    pub fn expectation(&self, x: &[Complex64]) -> Complex64 {
        let ax = self.matvec(x);
        x.iter().zip(&ax).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn adjoint(&self) -> Self {
        let triplets = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, &self.basis_tag, triplets)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.linear_combination(&[(Complex64::new(1.0, 0.0), self), (Complex64::new(1.0, 0.0), other)])
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.linear_combination(&[(Complex64::new(1.0, 0.0), self), (Complex64::new(-1.0, 0.0), other)])
    }

    fn linear_combination(&self, terms: &[(Complex64, &Self)]) -> Self {
        let mut triplets = Vec::new();
        for (w, op) in terms {
            assert_eq!(op.dim, self.dim, "dimension mismatch");
            triplets.extend(op.triplets().map(|(r, c, v)| (r, c, v * w)));
        }
        Self::from_triplets(self.dim, &self.basis_tag, triplets)
    }

    pub fn sum<'a>(dim: usize, basis_tag: &str, ops: impl IntoIterator<Item = &'a Self>) -> Self {
        let mut triplets = Vec::new();
        for op in ops {
            assert_eq!(op.dim, dim, "dimension mismatch");
            triplets.extend(op.triplets());
        }
        Self::from_triplets(dim, basis_tag, triplets)
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let rows: Vec<Vec<(usize, usize, Complex64)>> = (0..self.dim)
            .into_par_iter()
            .map(|r| {
                let mut acc: HashMap<usize, Complex64> = HashMap::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        *acc.entry(c).or_default() += a * b;
                    }
                }
                acc.into_iter().map(|(c, v)| (r, c, v)).collect()
            })
            .collect();
        Self::from_triplets(self.dim, &self.basis_tag, rows.into_iter().flatten().collect())
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    /// Largest `|A − A†|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn from_dense(m: &DMatrix<Complex64>, basis_tag: &str) -> Self {
        let mut triplets = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                triplets.push((r, c, m[(r, c)]));
            }
        }
        Self::from_triplets(m.nrows(), basis_tag, triplets)
    }

    /// Re-tags an operator, e.g. after restricting to an equal-sized basis.
    pub fn with_tag(mut self, basis_tag: &str) -> Self {
        self.basis_tag = basis_tag.to_string();
        self
    }

    /// Principal submatrix on `indices`.
    pub fn restrict(&self, indices: &[usize], basis_tag: &str) -> Self {
        let mut position = vec![usize::MAX; self.dim];
        for (i, &k) in indices.iter().enumerate() {
            position[k] = i;
        }
        let triplets = indices
            .iter()
            .enumerate()
            .flat_map(|(i, &r)| {
                let position = &position;
                self.row(r)
                    .filter(move |(c, _)| position[*c] != usize::MAX)
                    .map(move |(c, v)| (i, position[c], v))
            })
            .collect();
        Self::from_triplets(indices.len(), basis_tag, triplets)
    }

    /// Coordinate text: one `row col re im` line per stored entry.
    pub fn to_coo_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# basis {}", self.basis_tag);
        let _ = writeln!(s, "# dim {} nnz {}", self.dim, self.nnz());
        for (r, c, v) in self.triplets() {
            let _ = writeln!(s, "{r} {c} {:e} {:e}", v.re, v.im);
        }
        s
    }
}
