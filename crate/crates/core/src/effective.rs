//! Effective Hamiltonian of the Gauss-constrained primitive theory.
//!
//! The constraint `H0 = λΣG²` is diagonal in the product basis, so the
//! second-order block Hamiltonian
//! `H_eff = PVP − Σ_q PV|q⟩⟨q|VP / (E_q − E_0)` is contracted state by state.
//! [`exact_effective`] solves the full decoupling problem instead, to all
//! orders, for convergence studies.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisKind};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::operators::{
    dirac_shape, electric_shape, heff_analytic_expr, hg_expr, hopping_shape, magnetic_shape, mass_shape,
    mu_renormalization_shape, primitive_boson_expr, primitive_fermion_expr, CouplingSet, Model,
    MuRenormalization, OpSum, SparseOperator,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `H = H0 + V` on a basis closed under `V`.
#[derive(Debug, Clone)]
pub struct PerturbationSplit {
    pub h0: SparseOperator,
    pub v: SparseOperator,
    pub basis: Basis,
    pub frame: Frame,
}

impl PerturbationSplit {
    pub fn new(h0: SparseOperator, v: SparseOperator, basis: Basis, frame: Frame) -> Result<Self> {
        h0.check_basis(&basis)?;
        v.check_basis(&basis)?;
        if !h0.is_diagonal() {
            return Err(Error::InvalidSplit("H0 must be diagonal".into()));
        }
        if !v.is_hermitian(1e-12 * v.max_abs().max(1.0)) {
            return Err(Error::InvalidSplit("V is not hermitian".into()));
        }
        Ok(Self { h0, v, basis, frame })
    }

    pub fn from_exprs(h0: &OpSum, v: &OpSum, basis: Basis, frame: Frame) -> Result<Self> {
        let h0 = h0.assemble(&basis);
        let v = v.assemble(&basis);
        Self::new(h0, v, basis, frame)
    }

    /// `H0 = H_G`, `V = H_p^b + H_p^f`.
    pub fn primitive(couplings: &CouplingSet, frame: Frame, basis: Basis) -> Result<Self> {
        let model = Model::for_basis(&basis, frame);
        let mut v = primitive_boson_expr(couplings, &model);
        v.extend(primitive_fermion_expr(couplings, &model));
        Self::from_exprs(&hg_expr(couplings, &model), &v, basis, frame)
    }
}

/// Positions of the states with `H0 = 0`.
pub fn ground_projector(h0: &SparseOperator, basis: &Basis) -> Result<Vec<usize>> {
    h0.check_basis(basis)?;
    let d = h0.diagonal_values();
    let scale = d.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    Ok((0..d.len()).filter(|&i| d[i].abs() <= 1e-12 * scale).collect())
}

/// An operator together with the sector basis it acts on.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub basis: Basis,
    pub op: SparseOperator,
}

fn ground_sector(split: &PerturbationSplit) -> Result<(Vec<usize>, Basis)> {
    let p = ground_projector(&split.h0, &split.basis)?;
    if p.is_empty() {
        return Err(Error::InvalidSplit("H0 has no zero-energy states".into()));
    }
    let codes = p.iter().map(|&i| split.basis.code(i)).collect();
    let kind = BasisKind::Sector {
        frame: split.frame,
        target_g: vec![0; split.basis.geometry().num_vertices()],
    };
    let sector = Basis::from_codes(split.basis.geometry_arc(), split.basis.l(), kind, codes)?;
    Ok((p, sector))
}

/// Second-order block Hamiltonian on the ground sector of `H0`.
pub fn schrieffer_wolff2(split: &PerturbationSplit) -> Result<SectorOperator> {
    let (p, sector) = ground_sector(split)?;
    let n = split.basis.len();
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in p.iter().enumerate() {
        pos[i] = k;
    }
    let e = split.h0.diagonal_values();
    let scale = e.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let v = &split.v;

    let columns: Vec<Result<Vec<(usize, usize, Complex64)>>> = p
        .par_iter()
        .enumerate()
        .map(|(j, &pj)| {
            let mut out = Vec::new();
            // t_q = V_{q j} / E_q over excited q; V is hermitian so column j is the conjugate row
            let mut t: HashMap<usize, Complex64> = HashMap::new();
            for (q, vjq) in v.row(pj) {
                if pos[q] != usize::MAX {
                    out.push((pos[q], j, vjq.conj()));
                    continue;
                }
                if e[q].abs() <= 1e-12 * scale {
                    return Err(Error::InvalidSplit(format!(
                        "excited state {q} reached with zero H0 energy"
                    )));
                }
                *t.entry(q).or_insert(ZERO) += vjq.conj() / e[q];
            }
            let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
            for (q, tq) in t {
                for (i, vqi) in v.row(q) {
                    if pos[i] != usize::MAX {
                        // V_{iq} = conj(V_{qi})
                        *acc.entry(pos[i]).or_insert(ZERO) -= vqi.conj() * tq;
                    }
                }
            }
            out.extend(acc.into_iter().map(|(i, a)| (i, j, a)));
            Ok(out)
        })
        .collect();
    let mut triplets = Vec::new();
    for c in columns {
        triplets.extend(c?);
    }
    let op = SparseOperator::from_triplets(sector.len(), sector.tag(), triplets);
    Ok(SectorOperator { basis: sector, op })
}

/// Convergence controls for [`exact_effective`].
#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-14,
        }
    }
}

/// Hermitian effective Hamiltonian on the ground sector to all orders.
///
/// Solves `H_QP + H_QQ X = X (H_PP + H_PQ X)` for the decoupling map `X`
/// by preconditioned fixed-point iteration, then returns
/// `S^{-1/2} (P + X)† H (P + X) S^{-1/2}` with `S = 1 + X†X`. Its spectrum is
/// the part of the spectrum of `H0 + V` adiabatically connected to the
/// ground sector.
pub fn exact_effective(split: &PerturbationSplit, options: ExactOptions) -> Result<SectorOperator> {
    let (p, sector) = ground_sector(split)?;
    let n = split.basis.len();
    let np = p.len();
    let mut is_p = vec![false; n];
    for &i in &p {
        is_p[i] = true;
    }
    let q: Vec<usize> = (0..n).filter(|&i| !is_p[i]).collect();
    let nq = q.len();
    let h = split.h0.add(&split.v);
    let diag: Vec<f64> = (0..n).map(|i| h.get(i, i).re).collect();
    let e_ref = p.iter().map(|&i| diag[i]).sum::<f64>() / np as f64;
    let precond: Vec<f64> = q.iter().map(|&i| diag[i] - e_ref).collect();
    if precond.iter().any(|d| d.abs() < 1e-12) {
        return Err(Error::InvalidSplit("excited state degenerate with the ground sector".into()));
    }

    let mut x = DMatrix::<Complex64>::zeros(nq, np);
    // Y = H (P + X), split into its P and Q rows
    let apply = |x: &DMatrix<Complex64>| -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let cols: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..np)
            .into_par_iter()
            .map(|j| {
                let mut full = vec![ZERO; n];
                full[p[j]] = Complex64::new(1.0, 0.0);
                for (k, &qi) in q.iter().enumerate() {
                    full[qi] = x[(k, j)];
                }
                let y = h.matvec(&full);
                (p.iter().map(|&i| y[i]).collect(), q.iter().map(|&i| y[i]).collect())
            })
            .collect();
        let mut yp = DMatrix::zeros(np, np);
        let mut yq = DMatrix::zeros(nq, np);
        for (j, (a, b)) in cols.into_iter().enumerate() {
            yp.set_column(j, &DVector::from_vec(a));
            yq.set_column(j, &DVector::from_vec(b));
        }
        (yp, yq)
    };

    let scale = h.max_abs().max(1.0);
    let mut converged = false;
    let mut yp = DMatrix::zeros(np, np);
    let mut yq = DMatrix::zeros(nq, np);
    for _ in 0..options.max_iterations {
        (yp, yq) = apply(&x);
        let residual = &yq - &x * &yp;
        let r = residual.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if r <= options.tolerance * scale {
            converged = true;
            break;
        }
        for k in 0..nq {
            let d = precond[k];
            for j in 0..np {
                x[(k, j)] -= residual[(k, j)] / d;
            }
        }
        if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "decoupling iteration did not reach {:e} in {} steps",
            options.tolerance, options.max_iterations
        )));
    }
    let projected = &yp + x.adjoint() * &yq;
    let s = DMatrix::<Complex64>::identity(np, np) + x.adjoint() * &x;
    let eig = s.symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| Complex64::new(1.0 / v.sqrt(), 0.0)));
    let s_inv_sqrt = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    let heff = &s_inv_sqrt * projected * &s_inv_sqrt;
    let heff = (&heff + heff.adjoint()) * Complex64::new(0.5, 0.0);
    let op = SparseOperator::from_dense(&heff, sector.tag());
    Ok(SectorOperator { basis: sector, op })
}

/// Fitted versus analytic coefficient of one dictionary term.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TermMatch {
    pub fitted: f64,
    pub analytic: f64,
    pub relative_deviation: f64,
}

/// One matrix element left over after subtracting the fitted terms.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResidualEntry {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectiveReport {
    pub basis_tag: String,
    pub dimension: usize,
    pub matched_terms: BTreeMap<String, TermMatch>,
    /// Dictionary terms with no support on this instance.
    pub absent_terms: Vec<String>,
    pub residual_norm: f64,
    pub residual: Vec<ResidualEntry>,
    #[serde(skip)]
    pub derived: Option<SparseOperator>,
}

impl EffectiveReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

pub const DICTIONARY: [&str; 6] = [
    "electric",
    "magnetic",
    "dirac",
    "mass",
    "mu_renormalization",
    "eta_squared",
];

/// Shapes of the term dictionary, each with unit coefficient.
pub fn dictionary_shapes(model: &Model) -> Vec<(&'static str, OpSum)> {
    let hop = hopping_shape(model);
    vec![
        ("electric", electric_shape(model)),
        ("magnetic", magnetic_shape(model)),
        ("dirac", dirac_shape(model)),
        ("mass", mass_shape(model)),
        ("mu_renormalization", mu_renormalization_shape(model)),
        ("eta_squared", hop.mul(&hop)),
    ]
}

/// Coefficients predicted for each dictionary shape.
pub fn analytic_coefficients(couplings: &CouplingSet) -> BTreeMap<String, f64> {
    let k = couplings;
    [
        ("electric", k.mu),
        ("magnetic", -k.plaquette_coefficient()),
        ("dirac", k.dirac_coefficient()),
        ("mass", k.mass),
        ("mu_renormalization", MuRenormalization::Quoted.coefficient(k)),
        ("eta_squared", -k.eta.powi(2) / (2.0 * k.lambda)),
    ]
    .into_iter()
    .map(|(n, v)| (n.to_string(), v))
    .collect()
}

const RESIDUAL_REPORT_LEN: usize = 20;

/// Least-squares fit of `derived` against the term dictionary.
pub fn match_effective(
    derived: &SectorOperator,
    couplings: &CouplingSet,
    frame: Frame,
) -> Result<EffectiveReport> {
    let basis = &derived.basis;
    derived.op.check_basis(basis)?;
    let model = Model::for_basis(basis, frame);
    let shapes: Vec<(&str, SparseOperator)> = dictionary_shapes(&model)
        .into_iter()
        .map(|(name, e)| (name, e.assemble(basis)))
        .collect();

    let mut absent = Vec::new();
    let mut active = Vec::new();
    for (name, op) in &shapes {
        if op.max_abs() == 0.0 {
            absent.push(name.to_string());
        } else {
            active.push((*name, op));
        }
    }

    // rows: real and imaginary parts of every upper-triangle entry in the union support
    let mut keys: Vec<(usize, usize)> = derived
        .op
        .triplets()
        .map(|(r, c, _)| (r, c))
        .chain(active.iter().flat_map(|(_, op)| op.triplets().map(|(r, c, _)| (r, c))))
        .filter(|(r, c)| r <= c)
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let nrows = 2 * keys.len();
    let ncols = active.len();
    let mut a = DMatrix::<f64>::zeros(nrows, ncols);
    let mut b = DVector::<f64>::zeros(nrows);
    for (k, &(r, c)) in keys.iter().enumerate() {
        let d = derived.op.get(r, c);
        b[2 * k] = d.re;
        b[2 * k + 1] = d.im;
        for (j, (_, op)) in active.iter().enumerate() {
            let s = op.get(r, c);
            a[(2 * k, j)] = s.re;
            a[(2 * k + 1, j)] = s.im;
        }
    }
    // column scaling for conditioning
    let norms: Vec<f64> = (0..ncols).map(|j| a.column(j).norm()).collect();
    for j in 0..ncols {
        a.column_mut(j).scale_mut(1.0 / norms[j]);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if ncols > 0 && smin <= 1e-10 * smax {
        let vt = svd.v_t.as_ref().expect("v_t requested");
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        let null = vt.row(imin);
        let names = (0..ncols)
            .filter(|&j| null[j].abs() > 1e-6)
            .map(|j| active[j].0.to_string())
            .collect();
        return Err(Error::SingularFit(names));
    }
    let scaled = svd
        .solve(&b, 1e-14 * smax)
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    let coeffs: Vec<f64> = (0..ncols).map(|j| scaled[j] / norms[j]).collect();

    let analytic = analytic_coefficients(couplings);
    let mut matched = BTreeMap::new();
    for (j, (name, _)) in active.iter().enumerate() {
        let an = analytic[*name];
        let dev = if an != 0.0 {
            (coeffs[j] - an).abs() / an.abs()
        } else {
            coeffs[j].abs()
        };
        matched.insert(
            name.to_string(),
            TermMatch {
                fitted: coeffs[j],
                analytic: an,
                relative_deviation: dev,
            },
        );
    }

    let mut fitted = derived.op.clone();
    for (j, (_, op)) in active.iter().enumerate() {
        fitted = fitted.sub(&op.scale(Complex64::new(coeffs[j], 0.0)));
    }
    let mut residual: Vec<ResidualEntry> = fitted
        .triplets()
        .filter(|(r, c, _)| r <= c)
        .map(|(row, col, v)| ResidualEntry {
            row,
            col,
            re: v.re,
            im: v.im,
            magnitude: v.norm(),
        })
        .collect();
    let residual_norm = fitted.triplets().map(|(_, _, v)| v.norm_sqr()).sum::<f64>().sqrt();
    residual.sort_by(|x, y| {
        y.magnitude
            .partial_cmp(&x.magnitude)
            .unwrap()
            .then((x.row, x.col).cmp(&(y.row, y.col)))
    });
    residual.truncate(RESIDUAL_REPORT_LEN);
    Ok(EffectiveReport {
        basis_tag: basis.tag().to_string(),
        dimension: basis.len(),
        matched_terms: matched,
        absent_terms: absent,
        residual_norm,
        residual,
        derived: Some(derived.op.clone()),
    })
}

/// Relative deviation of a single amplitude `⟨row|derived|col⟩` from the
/// analytic `⟨row|reference|col⟩`.
pub fn amplitude_deviation(derived: &SparseOperator, reference: &SparseOperator, row: usize, col: usize) -> f64 {
    let a = derived.get(row, col);
    let b = reference.get(row, col);
    (a - b).norm() / b.norm()
}

/// Vacuum-column amplitudes of a derived effective Hamiltonian against the
/// analytic one, split into pure-gauge (plaquette) and matter (Dirac) moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmergenceCheck {
    pub plaquette_reference: Option<f64>,
    pub plaquette_deviation: Option<f64>,
    pub dirac_reference: Option<f64>,
    pub dirac_deviation: Option<f64>,
}

/// Largest relative deviation over the vacuum's off-diagonal hits of each kind.
pub fn emergence_check(derived: &SectorOperator, couplings: &CouplingSet, frame: Frame) -> Result<EmergenceCheck> {
    let basis = &derived.basis;
    let layout = *basis.layout();
    let vac_code = layout.vacuum(basis.geometry(), frame);
    let vac = basis
        .index_of(vac_code)
        .ok_or_else(|| Error::InvalidSplit("vacuum is not in the derived sector".into()))?;
    let reference = heff_analytic_expr(couplings, &Model::for_basis(basis, frame), MuRenormalization::Off).assemble(basis);
    let mut out = EmergenceCheck {
        plaquette_reference: None,
        plaquette_deviation: None,
        dirac_reference: None,
        dirac_deviation: None,
    };
    for (r, c, v) in reference.triplets() {
        if c != vac || r == vac {
            continue;
        }
        let dev = amplitude_deviation(&derived.op, &reference, r, c);
        let (re, de) = if layout.fermion_part(basis.code(r)) == layout.fermion_part(vac_code) {
            (&mut out.plaquette_reference, &mut out.plaquette_deviation)
        } else {
            (&mut out.dirac_reference, &mut out.dirac_deviation)
        };
        *re = Some(re.map_or(v.norm(), |x: f64| x.max(v.norm())));
        *de = Some(de.map_or(dev, |x: f64| x.max(dev)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_fermion_number, enumerate_full_basis, neutral_sector, select_sector};
    use crate::lattice::{build_lattice, LatticeGeometry, LatticeSpec};
    use crate::operators::{
        build_hb, build_hd, build_he, build_hm, link_link_shape, link_rotation_shape, PairCounting,
    };
    use std::sync::Arc;

    fn geo(w: usize, h: usize) -> Arc<LatticeGeometry> {
        Arc::new(build_lattice(LatticeSpec::open(w, h)).unwrap())
    }

    fn couplings() -> CouplingSet {
        CouplingSet {
            lambda: 200.0,
            mu: 1.0,
            beta: 0.3,
            omega: 0.5,
            eta: 0.2,
            mass: 0.4,
            pair_counting: PairCounting::Ordered,
        }
    }

    #[test]
    fn ground_projector_is_the_neutral_sector() {
        let g = geo(2, 2);
        let full = enumerate_full_basis(Arc::clone(&g), 1).unwrap();
        let k = couplings();
        for frame in Frame::ALL {
            let model = Model::for_basis(&full, frame);
            let h0 = hg_expr(&k, &model).assemble(&full);
            let idx = ground_projector(&h0, &full).unwrap();
            let codes: Vec<u64> = idx.iter().map(|&i| full.code(i)).collect();
            let sector = select_sector(&full, frame, &[0; 4]).unwrap();
            assert_eq!(codes, sector.codes());
            let vac = full.layout().vacuum(&g, frame);
            assert!(codes.contains(&vac));
            assert!(!codes.contains(&full.layout().with_m(vac, 0, 1)));
        }
    }

    #[test]
    fn first_order_block_is_electric_plus_mass() {
        let g = geo(2, 1);
        let full = enumerate_full_basis(Arc::clone(&g), 1).unwrap();
        let k = couplings();
        for frame in Frame::ALL {
            let split = PerturbationSplit::primitive(&k, frame, full.clone()).unwrap();
            let p = ground_projector(&split.h0, &full).unwrap();
            let pvp = split.v.restrict(&p, "p");
            let sector = neutral_sector(Arc::clone(&g), 1, frame).unwrap();
            let expect = build_he(&k, &sector).add(&build_hm(&k, frame, &sector)).with_tag("p");
            assert!(pvp.max_abs_diff(&expect) < 1e-14, "{frame}");
        }
    }

    #[test]
    fn beta_only_renormalizes_mu() {
        // exact second-order oracle: −(β²/λ)(l(l+1) − m²) per link
        let g = geo(2, 1);
        let full = enumerate_full_basis(Arc::clone(&g), 2).unwrap();
        let k = couplings();
        let model = Model::for_basis(&full, Frame::PrimitivePsi);
        let v = link_rotation_shape(&model).scaled(k.beta);
        let split = PerturbationSplit::from_exprs(&hg_expr(&k, &model), &v, full, Frame::PrimitivePsi).unwrap();
        let sw = schrieffer_wolff2(&split).unwrap();
        assert!(sw.op.is_diagonal());
        let layout = *sw.basis.layout();
        for (i, &code) in sw.basis.codes().iter().enumerate() {
            let m = layout.m(code, 0);
            let expect = -(k.beta.powi(2) / k.lambda) * (6 - m * m) as f64;
            assert!((sw.op.get(i, i).re - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn omega_only_gives_plaquette() {
        let g = geo(2, 2);
        let k = couplings();
        let full = enumerate_fermion_number(Arc::clone(&g), 1, 4).unwrap();
        for counting in [PairCounting::Ordered, PairCounting::Unordered] {
            let model = Model::for_basis(&full, Frame::PrimitivePsi);
            let v = link_link_shape(&model, counting).scaled(k.omega);
            let split =
                PerturbationSplit::from_exprs(&hg_expr(&k, &model), &v, full.clone(), Frame::PrimitivePsi).unwrap();
            let sw = schrieffer_wolff2(&split).unwrap();
            let hb = build_hb(&k, Frame::PrimitivePsi, &sw.basis);
            let vac = sw.basis.index_of(sw.basis.layout().vacuum(&g, Frame::PrimitivePsi)).unwrap();
            let loops: Vec<_> = hb.triplets().filter(|(_, c, _)| *c == vac).collect();
            assert_eq!(loops.len(), 2);
            for (r, _, amp) in loops {
                let ratio = sw.op.get(r, vac) / amp;
                let expect = match counting {
                    PairCounting::Ordered => 1.0,
                    PairCounting::Unordered => 0.25,
                };
                assert!((ratio.re - expect).abs() < 1e-12 && ratio.im.abs() < 1e-12, "{counting:?}");
                assert!((amp.re + 8.0 * k.omega.powi(2) / k.lambda).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cross_term_reproduces_dirac() {
        let g = geo(2, 1);
        let full = enumerate_full_basis(Arc::clone(&g), 1).unwrap();
        let k = couplings();
        for frame in Frame::ALL {
            let model = Model::for_basis(&full, frame);
            let mut v = link_rotation_shape(&model).scaled(k.beta);
            v.extend(hopping_shape(&model).scaled(k.eta));
            let split = PerturbationSplit::from_exprs(&hg_expr(&k, &model), &v, full.clone(), frame).unwrap();
            let sw = schrieffer_wolff2(&split).unwrap();
            let hd = build_hd(&k, frame, &sw.basis);
            assert!(hd.nnz() > 0);
            for (r, c, amp) in hd.triplets() {
                assert!((sw.op.get(r, c) - amp).norm() < 1e-15, "{frame}");
            }
        }
    }

    #[test]
    fn match_recovers_second_order_coefficients() {
        let g = geo(2, 2);
        // Ω = 0 keeps the link-link residue out of the diagonal fit
        let k = CouplingSet {
            omega: 0.0,
            ..couplings()
        };
        let basis = enumerate_fermion_number(Arc::clone(&g), 1, 4).unwrap();
        let split = PerturbationSplit::primitive(&k, Frame::Transformed, basis).unwrap();
        let sw = schrieffer_wolff2(&split).unwrap();
        assert!(sw.op.hermiticity_error() < 1e-12);
        let report = match_effective(&sw, &k, Frame::Transformed).unwrap();
        let t = &report.matched_terms;
        assert!(t["electric"].relative_deviation < 1e-10);
        assert!(t["mass"].relative_deviation < 1e-10);
        assert!(t["dirac"].relative_deviation < 1e-10);
        assert!(t["magnetic"].fitted.abs() < 1e-14);
        assert!(t["eta_squared"].relative_deviation < 1e-10);
        // second order gives a quarter of the quoted renormalization
        assert!((t["mu_renormalization"].fitted + k.beta.powi(2) / k.lambda).abs() < 1e-12);
        assert!(report.residual.windows(2).all(|w| w[0].magnitude >= w[1].magnitude));
        assert!(report.residual.len() <= 20);
    }

    #[test]
    fn no_fermion_boson_cross_terms_without_eta_beta() {
        let g = geo(2, 2);
        let k = CouplingSet {
            beta: 0.0,
            eta: 0.0,
            ..couplings()
        };
        let basis = enumerate_fermion_number(Arc::clone(&g), 1, 4).unwrap();
        let split = PerturbationSplit::primitive(&k, Frame::PrimitivePsi, basis).unwrap();
        let sw = schrieffer_wolff2(&split).unwrap();
        let report = match_effective(&sw, &k, Frame::PrimitivePsi).unwrap();
        let t = &report.matched_terms;
        assert!(t["dirac"].fitted.abs() < 1e-14);
        assert!(t["magnetic"].relative_deviation < 1e-10);
        // only the diagonal link-link residue projects onto the remaining shapes
        let residue = 4.0 * k.omega.powi(2) / k.lambda;
        assert!(t["eta_squared"].fitted.abs() < residue);
        assert!(t["mu_renormalization"].fitted.abs() < residue);
    }

    #[test]
    fn exact_effective_agrees_at_large_gap() {
        let g = geo(2, 1);
        let full = enumerate_fermion_number(Arc::clone(&g), 1, 2).unwrap();
        let k = CouplingSet {
            lambda: 1e4,
            ..couplings()
        };
        let split = PerturbationSplit::primitive(&k, Frame::Transformed, full).unwrap();
        let exact = exact_effective(&split, ExactOptions::default()).unwrap();
        let sw = schrieffer_wolff2(&split).unwrap();
        assert_eq!(exact.basis.codes(), sw.basis.codes());
        // third-order remainder ~ V³/λ²
        assert!(exact.op.max_abs_diff(&sw.op) < 1e-6);
        assert!(exact.op.hermiticity_error() < 1e-12);
    }

    #[test]
    fn exact_effective_reproduces_low_spectrum() {
        let g = geo(2, 1);
        let basis = enumerate_fermion_number(Arc::clone(&g), 1, 2).unwrap();
        let k = CouplingSet {
            lambda: 30.0,
            ..couplings()
        };
        let split = PerturbationSplit::primitive(&k, Frame::PrimitivePsi, basis).unwrap();
        let exact = exact_effective(&split, ExactOptions::default()).unwrap();
        let mut low: Vec<f64> = exact.op.to_dense().symmetric_eigen().eigenvalues.iter().copied().collect();
        low.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut all: Vec<f64> = split.h0.add(&split.v).to_dense().symmetric_eigen().eigenvalues.iter().copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, e) in low.iter().enumerate() {
            assert!((e - all[i]).abs() < 1e-9, "{i}: {e} vs {}", all[i]);
        }
    }
}
