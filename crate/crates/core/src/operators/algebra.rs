//! Second-quantized operator expressions acting on packed basis states.
//!
//! A [`Monomial`] is a coefficient times a product of elementary link and
//! fermion operators; each maps a product state to at most one product state.
//! Fermion signs come from the Jordan–Wigner string over modes ordered
//! vertex-major with `C` before `D`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{Basis, Layout};
use crate::operators::sparse::SparseOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Elem {
    Lz(usize),
    Plus(usize),
    Minus(usize),
    Create(usize),
    Annihilate(usize),
}

impl Elem {
    pub fn adjoint(self) -> Self {
        match self {
            Elem::Lz(l) => Elem::Lz(l),
            Elem::Plus(l) => Elem::Minus(l),
            Elem::Minus(l) => Elem::Plus(l),
            Elem::Create(m) => Elem::Annihilate(m),
            Elem::Annihilate(m) => Elem::Create(m),
        }
    }

    #[inline]
    pub fn apply(self, layout: &Layout, code: u64) -> Option<(u64, f64)> {
        let l = layout.l as i64;
        let ll = (l * (l + 1)) as f64;
        match self {
            Elem::Lz(link) => {
                let m = layout.m(code, link);
                (m != 0).then_some((code, m as f64))
            }
            Elem::Plus(link) => {
                let m = layout.m(code, link);
                (m < l).then(|| {
                    (
                        layout.with_m(code, link, m + 1),
                        (ll - (m * (m + 1)) as f64).sqrt(),
                    )
                })
            }
            Elem::Minus(link) => {
                let m = layout.m(code, link);
                (m > -l).then(|| {
                    (
                        layout.with_m(code, link, m - 1),
                        (ll - (m * (m - 1)) as f64).sqrt(),
                    )
                })
            }
            Elem::Create(mode) => {
                if layout.occupied(code, mode) {
                    None
                } else {
                    Some((code | 1 << mode, jw_sign(code, mode)))
                }
            }
            Elem::Annihilate(mode) => {
                if layout.occupied(code, mode) {
                    Some((code & !(1 << mode), jw_sign(code, mode)))
                } else {
                    None
                }
            }
        }
    }
}

/// `(−1)^(number of occupied modes below mode)`.
#[inline]
fn jw_sign(code: u64, mode: usize) -> f64 {
    let below = code & ((1u64 << mode) - 1);
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `coeff · A₁ A₂ … A_k`; stored in application order (rightmost first).
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: Complex64,
    ops: Vec<Elem>,
}

impl Monomial {
    /// Product written left to right, as in `c†_a c_b L₊`.
    pub fn product(coeff: Complex64, factors: &[Elem]) -> Self {
        Self {
            coeff,
            ops: factors.iter().rev().copied().collect(),
        }
    }

    pub fn scalar(coeff: Complex64) -> Self {
        Self { coeff, ops: Vec::new() }
    }

    /// Factors left to right.
    pub fn factors(&self) -> Vec<Elem> {
        self.ops.iter().rev().copied().collect()
    }

    pub fn adjoint(&self) -> Self {
        // (A₁…A_k)† = A_k†…A₁†: application order becomes the reversed adjoints
        Self {
            coeff: self.coeff.conj(),
            ops: self.ops.iter().rev().map(|e| e.adjoint()).collect(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            coeff: self.coeff * factor,
            ops: self.ops.clone(),
        }
    }

    /// `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut ops = other.ops.clone();
        ops.extend_from_slice(&self.ops);
        Self {
            coeff: self.coeff * other.coeff,
            ops,
        }
    }

    #[inline]
    pub fn apply(&self, layout: &Layout, code: u64) -> Option<(u64, Complex64)> {
        let mut c = code;
        let mut amp = self.coeff;
        for e in &self.ops {
            let (next, a) = e.apply(layout, c)?;
            c = next;
            amp *= a;
        }
        Some((c, amp))
    }
}

pub type DiagonalFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// Sum of monomials plus diagonal functionals of the product state.
#[derive(Clone, Default)]
pub struct OpSum {
    pub monomials: Vec<Monomial>,
    pub diagonals: Vec<DiagonalFn>,
}

impl std::fmt::Debug for OpSum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpSum")
            .field("monomials", &self.monomials.len())
            .field("diagonals", &self.diagonals.len())
            .finish()
    }
}

impl OpSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, m: Monomial) {
        self.monomials.push(m);
    }

    pub fn push_diagonal(&mut self, f: DiagonalFn) {
        self.diagonals.push(f);
    }

    pub fn extend(&mut self, other: OpSum) {
        self.monomials.extend(other.monomials);
        self.diagonals.extend(other.diagonals);
    }

    /// Adds `X + X†` for every monomial of `x`.
    pub fn push_plus_hc(&mut self, x: Monomial) {
        let h = x.adjoint();
        self.monomials.push(x);
        self.monomials.push(h);
    }

    /// Adds `X − X†`.
    pub fn push_minus_hc(&mut self, x: Monomial) {
        let h = x.adjoint().scaled(Complex64::new(-1.0, 0.0));
        self.monomials.push(x);
        self.monomials.push(h);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let monomials = self
            .monomials
            .iter()
            .map(|m| m.scaled(Complex64::new(factor, 0.0)))
            .collect();
        let diagonals = self
            .diagonals
            .iter()
            .map(|d| {
                let d = Arc::clone(d);
                Arc::new(move |c| factor * d(c)) as DiagonalFn
            })
            .collect();
        Self {
            monomials,
            diagonals,
        }
    }

    /// Product of two monomial-only sums.
    pub fn mul(&self, other: &Self) -> Self {
        assert!(
            self.diagonals.is_empty() && other.diagonals.is_empty(),
            "products of diagonal functionals are not supported"
        );
        let monomials = self
            .monomials
            .iter()
            .flat_map(|a| other.monomials.iter().map(move |b| a.mul(b)))
            .collect();
        Self {
            monomials,
            diagonals: Vec::new(),
        }
    }

    /// `(new_code, amplitude)` pairs produced from `code`, diagonal part first.
    pub fn apply(&self, layout: &Layout, code: u64, out: &mut Vec<(u64, Complex64)>) {
        let diag: f64 = self.diagonals.iter().map(|d| d(code)).sum();
        if diag != 0.0 {
            out.push((code, Complex64::new(diag, 0.0)));
        }
        for m in &self.monomials {
            if let Some(hit) = m.apply(layout, code) {
                out.push(hit);
            }
        }
    }

    /// Matrix of `P · self · P` on `basis`: images outside the basis are
    /// dropped. Assembly runs in parallel over columns.
    pub fn assemble(&self, basis: &Basis) -> SparseOperator {
        let layout = *basis.layout();
        let triplets: Vec<(usize, usize, Complex64)> = basis
            .codes()
            .par_iter()
            .enumerate()
            .flat_map_iter(|(col, &code)| {
                let mut hits = Vec::new();
                self.apply(&layout, code, &mut hits);
                hits.into_iter()
                    .filter_map(move |(img, amp)| basis.index_of(img).map(|row| (row, col, amp)))
            })
            .collect();
        SparseOperator::from_triplets(basis.len(), basis.tag(), triplets)
    }
}
