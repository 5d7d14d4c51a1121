//! Hamiltonian terms of the spin-gauge model in each frame.
//!
//! Every term is available both as an [`OpSum`] expression (used by the
//! perturbative derivation and the term dictionary) and assembled on a basis.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{gauss_eigenvalue, Basis, Layout, Species};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::lattice::{Direction, LatticeGeometry, Orientation, VertexId};
use crate::operators::algebra::{Elem, Monomial, OpSum};
use crate::operators::sparse::SparseOperator;

type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub const SIGMA_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub const SIGMA_Y: Mat2 = [[ZERO, Complex64::new(0.0, -1.0)], [I, ZERO]];
pub const SIGMA_Z: Mat2 = [[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]];
pub const IDENTITY2: Mat2 = [[ONE, ZERO], [ZERO, ONE]];

fn matmul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn sigma_k(dir: Direction) -> Mat2 {
    match dir {
        Direction::One => SIGMA_X,
        Direction::Two => SIGMA_Y,
    }
}

/// How the link–link sum over intersecting links counts each pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairCounting {
    /// Each unordered pair of links sharing a vertex once.
    Unordered,
    /// Each pair in both orders, i.e. twice.
    #[default]
    Ordered,
}

impl PairCounting {
    pub fn multiplicity(self) -> f64 {
        match self {
            PairCounting::Unordered => 1.0,
            PairCounting::Ordered => 2.0,
        }
    }
}

/// Energy scales of the primitive theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingSet {
    /// Gauss-law constraint strength λ.
    pub lambda: f64,
    /// Electric energy μ.
    pub mu: f64,
    /// Link rotation β.
    pub beta: f64,
    /// Link–link coupling Ω.
    pub omega: f64,
    /// Fermion tunneling η.
    pub eta: f64,
    /// Mass M.
    pub mass: f64,
    #[serde(default)]
    pub pair_counting: PairCounting,
}

impl Default for CouplingSet {
    fn default() -> Self {
        Self {
            lambda: 1000.0,
            mu: 1.0,
            beta: 0.1,
            omega: 0.01,
            eta: 0.1,
            mass: 0.5,
            pair_counting: PairCounting::Ordered,
        }
    }
}

/// Translation to the simulated lattice-gauge parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescaling {
    pub alpha: f64,
    pub g_squared: f64,
    pub fermion_mass: f64,
    /// `4 l²(l+1)² Ω² g² / λ`, which equals α when the magnetic term is tuned
    /// to standard normalization.
    pub alpha_from_magnetic: f64,
}

/// The scales entering `2Ω²l²(l+1)²/λ ≪ ηβ√(l(l+1))/λ ≪ μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongLimit {
    pub magnetic_scale: f64,
    pub dirac_scale: f64,
    pub mu: f64,
    /// Margin used for "≪".
    pub margin: f64,
    pub magnetic_below_dirac: bool,
    pub dirac_below_mu: bool,
    pub gauss_dominant: bool,
}

impl StrongLimit {
    pub fn satisfied(&self) -> bool {
        self.magnetic_below_dirac && self.dirac_below_mu && self.gauss_dominant
    }
}

impl CouplingSet {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.lambda > 0.0) {
            errs.push(format!("couplings.lambda must be > 0 (got {})", self.lambda));
        }
        for (name, v) in [
            ("mu", self.mu),
            ("beta", self.beta),
            ("omega", self.omega),
            ("eta", self.eta),
            ("mass", self.mass),
        ] {
            if !v.is_finite() {
                errs.push(format!("couplings.{name} must be finite"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn rescaling(&self, l: u32) -> Rescaling {
        let ll = (l * (l + 1)) as f64;
        let alpha = 2.0 * self.eta * self.beta * ll.sqrt() / self.lambda;
        let g_squared = 2.0 * self.mu / alpha;
        Rescaling {
            alpha,
            g_squared,
            fermion_mass: self.mass / alpha,
            alpha_from_magnetic: 4.0 * ll * ll * self.omega.powi(2) * g_squared / self.lambda,
        }
    }

    /// Strong-limit predicate with "≪" read as a factor of `margin`.
    pub fn strong_limit(&self, l: u32, margin: f64) -> StrongLimit {
        let ll = (l * (l + 1)) as f64;
        let magnetic_scale = 2.0 * self.omega.powi(2) * ll * ll / self.lambda;
        let dirac_scale = (self.eta * self.beta).abs() * ll.sqrt() / self.lambda;
        let others = [self.mu, self.beta, self.omega, self.eta, self.mass]
            .iter()
            .fold(0.0f64, |a, b| a.max(b.abs()));
        StrongLimit {
            magnetic_scale,
            dirac_scale,
            mu: self.mu,
            margin,
            magnetic_below_dirac: magnetic_scale * margin <= dirac_scale,
            dirac_below_mu: dirac_scale * margin <= self.mu,
            gauss_dominant: self.lambda >= margin * others,
        }
    }

    /// `2Ω²/λ`, the plaquette coefficient magnitude.
    pub fn plaquette_coefficient(&self) -> f64 {
        2.0 * self.omega.powi(2) / self.lambda
    }

    /// `ηβ/λ`, the Dirac coefficient magnitude.
    pub fn dirac_coefficient(&self) -> f64 {
        self.eta * self.beta / self.lambda
    }
}

/// Geometry, encoding and frame shared by all expressions.
#[derive(Debug, Clone)]
pub struct Model {
    pub geometry: Arc<LatticeGeometry>,
    pub layout: Layout,
    pub frame: Frame,
}

impl Model {
    pub fn new(geometry: Arc<LatticeGeometry>, l: u32, frame: Frame) -> Result<Self> {
        let layout = Layout::new(&geometry, l)?;
        Ok(Self {
            geometry,
            layout,
            frame,
        })
    }

    pub fn for_basis(basis: &Basis, frame: Frame) -> Self {
        Self {
            geometry: basis.geometry_arc(),
            layout: *basis.layout(),
            frame,
        }
    }

    pub fn l(&self) -> u32 {
        self.layout.l
    }

    /// Operator that is `L₊` in the realizable variables, written in this
    /// frame (`L₋` on odd links of the transformed frame).
    fn physical_raise(&self, link: usize) -> Elem {
        if self.frame == Frame::Transformed && self.geometry.link_parity(link) < 0 {
            Elem::Minus(link)
        } else {
            Elem::Plus(link)
        }
    }

    fn physical_lower(&self, link: usize) -> Elem {
        match self.physical_raise(link) {
            Elem::Plus(l) => Elem::Minus(l),
            _ => Elem::Plus(link),
        }
    }

    fn vertex_sign(&self, v: usize) -> f64 {
        self.geometry.vertices[v].parity() as f64
    }

    fn vertex_odd(&self, v: usize) -> bool {
        !self.geometry.vertices[v].is_even()
    }
}

/// `coeff · ψ†_a M ψ_b · extra` expanded into monomials.
fn spinor_bilinear(a: usize, mat: &Mat2, b: usize, coeff: Complex64, extra: &[Elem]) -> Vec<Monomial> {
    let species = [Species::C, Species::D];
    let mut out = Vec::new();
    for (alpha, sa) in species.iter().enumerate() {
        for (beta, sb) in species.iter().enumerate() {
            let w = mat[alpha][beta];
            if w == ZERO {
                continue;
            }
            let mut factors = vec![
                Elem::Create(Layout::mode(a, *sa)),
                Elem::Annihilate(Layout::mode(b, *sb)),
            ];
            factors.extend_from_slice(extra);
            out.push(Monomial::product(coeff * w, &factors));
        }
    }
    out
}

/// Adds `outer · (X − X†)`.
fn push_times_bracket(e: &mut OpSum, outer: Complex64, x: Monomial) {
    let h = x.adjoint();
    e.push(x.scaled(outer));
    e.push(h.scaled(-outer));
}

/// Spin operators available on a single link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkOpKind {
    Lz,
    Lz2,
    LPlus,
    LMinus,
    Lx,
    Ly,
}

pub fn link_operator_expr(kind: LinkOpKind, link: usize) -> OpSum {
    let mut s = OpSum::new();
    let half = Complex64::new(0.5, 0.0);
    match kind {
        LinkOpKind::Lz => s.push(Monomial::product(ONE, &[Elem::Lz(link)])),
        LinkOpKind::Lz2 => s.push(Monomial::product(ONE, &[Elem::Lz(link), Elem::Lz(link)])),
        LinkOpKind::LPlus => s.push(Monomial::product(ONE, &[Elem::Plus(link)])),
        LinkOpKind::LMinus => s.push(Monomial::product(ONE, &[Elem::Minus(link)])),
        LinkOpKind::Lx => {
            s.push(Monomial::product(half, &[Elem::Plus(link)]));
            s.push(Monomial::product(half, &[Elem::Minus(link)]));
        }
        LinkOpKind::Ly => {
            // (L₊ − L₋)/(2i)
            s.push(Monomial::product(Complex64::new(0.0, -0.5), &[Elem::Plus(link)]));
            s.push(Monomial::product(Complex64::new(0.0, 0.5), &[Elem::Minus(link)]));
        }
    }
    s
}

/// Standard spin-l matrix on `link`, identity elsewhere.
pub fn link_operator(kind: LinkOpKind, link: usize, basis: &Basis) -> Result<SparseOperator> {
    if link >= basis.geometry().num_links() {
        return Err(Error::UnknownLink {
            n1: -1,
            n2: -1,
            direction: 0,
        });
    }
    Ok(link_operator_expr(kind, link).assemble(basis))
}

/// `c†_{creator} c_{annihilator}` with Jordan–Wigner signs.
pub fn fermion_bilinear(
    creator: (VertexId, Species),
    annihilator: (VertexId, Species),
    basis: &Basis,
) -> Result<SparseOperator> {
    let g = basis.geometry();
    let a = Layout::mode(g.vertex_index(creator.0)?, creator.1);
    let b = Layout::mode(g.vertex_index(annihilator.0)?, annihilator.1);
    let mut s = OpSum::new();
    s.push(Monomial::product(ONE, &[Elem::Create(a), Elem::Annihilate(b)]));
    Ok(s.assemble(basis))
}

/// `G_v` as an operator built from `L_z` and number operators.
pub fn gauss_generator_expr(model: &Model, v: usize) -> OpSum {
    let s = model.vertex_sign(v);
    let mut e = OpSum::new();
    let number = |species| Elem::Create(Layout::mode(v, species));
    let annihilate = |species| Elem::Annihilate(Layout::mode(v, species));
    let (link_sign, charge_coeff): (Box<dyn Fn(Orientation) -> f64>, f64) = match model.frame {
        Frame::PrimitivePsi | Frame::PrimitiveChi => (Box::new(|_| 1.0), -s),
        Frame::Transformed => (
            Box::new(move |o| match o {
                Orientation::Outgoing => s,
                Orientation::Incoming => -s,
            }),
            -s,
        ),
    };
    for (li, o) in model.geometry.star(v) {
        e.push(Monomial::product(Complex64::new(link_sign(*o), 0.0), &[Elem::Lz(*li)]));
    }
    for sp in [Species::C, Species::D] {
        e.push(Monomial::product(
            Complex64::new(charge_coeff, 0.0),
            &[number(sp), annihilate(sp)],
        ));
    }
    // Q = N_C + N_D − 1
    e.push(Monomial::scalar(Complex64::new(-charge_coeff, 0.0)));
    e
}

pub fn build_gauss_generator(model: &Model, v: usize, basis: &Basis) -> SparseOperator {
    gauss_generator_expr(model, v).assemble(basis)
}

/// `λ Σ_v G_v²`, diagonal.
pub fn hg_expr(couplings: &CouplingSet, model: &Model) -> OpSum {
    let g = Arc::clone(&model.geometry);
    let layout = model.layout;
    let frame = model.frame;
    let lambda = couplings.lambda;
    let mut e = OpSum::new();
    e.push_diagonal(Arc::new(move |code| {
        let total: i64 = (0..layout.n_vertices)
            .map(|v| gauss_eigenvalue(&g, &layout, code, v, frame).pow(2))
            .sum();
        lambda * total as f64
    }));
    e
}

pub fn build_hg(couplings: &CouplingSet, frame: Frame, basis: &Basis) -> SparseOperator {
    hg_expr(couplings, &Model::for_basis(basis, frame)).assemble(basis)
}

/// `Σ L_z²` (unit electric shape).
pub fn electric_shape(model: &Model) -> OpSum {
    let layout = model.layout;
    let mut e = OpSum::new();
    e.push_diagonal(Arc::new(move |code| {
        (0..layout.n_links).map(|li| layout.m(code, li).pow(2) as f64).sum()
    }));
    e
}

/// `Σ (l(l+1) − L_z²)`, the link Casimir minus `L_z²`.
pub fn mu_renormalization_shape(model: &Model) -> OpSum {
    let layout = model.layout;
    let ll = (layout.l * (layout.l + 1)) as f64;
    let mut e = OpSum::new();
    e.push_diagonal(Arc::new(move |code| {
        (0..layout.n_links)
            .map(|li| ll - layout.m(code, li).pow(2) as f64)
            .sum()
    }));
    e
}

/// `Σ ψ†σ_zψ`; staggered in the χ realization.
pub fn mass_shape(model: &Model) -> OpSum {
    let layout = model.layout;
    let stagger: Vec<f64> = (0..layout.n_vertices)
        .map(|v| {
            if model.frame == Frame::PrimitiveChi {
                model.vertex_sign(v)
            } else {
                1.0
            }
        })
        .collect();
    let mut e = OpSum::new();
    e.push_diagonal(Arc::new(move |code| {
        (0..layout.n_vertices)
            .map(|v| {
                let (c, d) = layout.occupation(code, v);
                stagger[v] * (c as f64 - d as f64)
            })
            .sum()
    }));
    e
}

pub fn he_expr(couplings: &CouplingSet, model: &Model) -> OpSum {
    electric_shape(model).scaled(couplings.mu)
}

pub fn hm_expr(couplings: &CouplingSet, model: &Model) -> OpSum {
    mass_shape(model).scaled(couplings.mass)
}

pub fn build_he(couplings: &CouplingSet, basis: &Basis) -> SparseOperator {
    he_expr(couplings, &Model::for_basis(basis, Frame::Transformed)).assemble(basis)
}

pub fn build_hm(couplings: &CouplingSet, frame: Frame, basis: &Basis) -> SparseOperator {
    hm_expr(couplings, &Model::for_basis(basis, frame)).assemble(basis)
}

/// Plaquette operators summed with their adjoints, unit coefficient.
///
/// Primitive frames: `L₊¹_n L₋²_{n+1̂} L₊¹_{n+2̂} L₋²_n + h.c.`;
/// transformed: `L₊¹_n L₊²_{n+1̂} L₋¹_{n+2̂} L₋²_n + h.c.`.
pub fn magnetic_shape(model: &Model) -> OpSum {
    let mut e = OpSum::new();
    for p in &model.geometry.plaquettes {
        let [b, r, t, l] = p.links;
        let factors = match model.frame {
            Frame::Transformed => [Elem::Plus(b), Elem::Plus(r), Elem::Minus(t), Elem::Minus(l)],
            _ => [Elem::Plus(b), Elem::Minus(r), Elem::Plus(t), Elem::Minus(l)],
        };
        e.push_plus_hc(Monomial::product(ONE, &factors));
    }
    e
}

/// Single-plaquette loop operator (without h.c.), used as an observable.
pub fn plaquette_loop_expr(model: &Model, plaquette: usize) -> OpSum {
    let [b, r, t, l] = model.geometry.plaquettes[plaquette].links;
    let factors = match model.frame {
        Frame::Transformed => [Elem::Plus(b), Elem::Plus(r), Elem::Minus(t), Elem::Minus(l)],
        _ => [Elem::Plus(b), Elem::Minus(r), Elem::Plus(t), Elem::Minus(l)],
    };
    let mut e = OpSum::new();
    e.push(Monomial::product(ONE, &factors));
    e
}

pub fn hb_expr(couplings: &CouplingSet, model: &Model) -> OpSum {
    magnetic_shape(model).scaled(-couplings.plaquette_coefficient())
}

pub fn build_hb(couplings: &CouplingSet, frame: Frame, basis: &Basis) -> SparseOperator {
    hb_expr(couplings, &Model::for_basis(basis, frame)).assemble(basis)
}

/// Hopping matrix between spinor components along link `(n, k)` in the χ
/// realization: `σ_x^{p_n} σ_k σ_x^{p_{n+k̂}}`.
fn chi_hop_matrix(model: &Model, from: usize, to: usize, dir: Direction) -> Mat2 {
    let px = |v: usize| if model.vertex_odd(v) { SIGMA_X } else { IDENTITY2 };
    matmul2(&matmul2(&px(from), &sigma_k(dir)), &px(to))
}

/// Minimal-coupling term with unit magnitude, normalized so that `H_D =
/// (ηβ/λ) · shape` in every frame.
///
/// Primitive ψ: `−i Σ (ψ†_n σ_k ψ_{n+k̂} L^k_{s,n} − h.c.)` with `L_s = L₊` on
/// even and `L₋` on odd `n`. Transformed: `i Σ (ψ†_{n+k̂} σ_k ψ_n L₋ − h.c.)`.
/// Primitive χ: the ψ form with `ψ_n = σ_x^{n1+n2} χ_n` substituted.
pub fn dirac_shape(model: &Model) -> OpSum {
    let g = &model.geometry;
    let mut e = OpSum::new();
    for (li, link) in g.links.iter().enumerate() {
        let n = g.link_source(li);
        let m = g.link_target(li);
        match model.frame {
            Frame::Transformed => {
                for mono in spinor_bilinear(m, &sigma_k(link.direction), n, ONE, &[Elem::Minus(li)]) {
                    push_times_bracket(&mut e, I, mono);
                }
            }
            Frame::PrimitivePsi | Frame::PrimitiveChi => {
                let ls = if model.vertex_odd(n) {
                    Elem::Minus(li)
                } else {
                    Elem::Plus(li)
                };
                let mat = if model.frame == Frame::PrimitiveChi {
                    chi_hop_matrix(model, n, m, link.direction)
                } else {
                    sigma_k(link.direction)
                };
                for mono in spinor_bilinear(n, &mat, m, ONE, &[ls]) {
                    push_times_bracket(&mut e, -I, mono);
                }
            }
        }
    }
    e
}

pub fn hd_expr(couplings: &CouplingSet, model: &Model) -> OpSum {
    dirac_shape(model).scaled(couplings.dirac_coefficient())
}

pub fn build_hd(couplings: &CouplingSet, frame: Frame, basis: &Basis) -> SparseOperator {
    hd_expr(couplings, &Model::for_basis(basis, frame)).assemble(basis)
}

/// Fermion tunneling part of the primitive fermion Hamiltonian at `η = 1`.
///
/// ψ (and transformed): `i Σ (ψ†_n σ_k ψ_{n+k̂} − h.c.)`.
/// χ: `i Σ (χ†_n χ_{n+1̂} − h.c.) + Σ (χ†_n σ_z χ_{n+2̂} + h.c.)`.
pub fn hopping_shape(model: &Model) -> OpSum {
    let g = &model.geometry;
    let mut e = OpSum::new();
    for (li, link) in g.links.iter().enumerate() {
        let n = g.link_source(li);
        let m = g.link_target(li);
        match (model.frame, link.direction) {
            (Frame::PrimitiveChi, Direction::One) => {
                for mono in spinor_bilinear(n, &IDENTITY2, m, ONE, &[]) {
                    push_times_bracket(&mut e, I, mono);
                }
            }
            (Frame::PrimitiveChi, Direction::Two) => {
                for mono in spinor_bilinear(n, &SIGMA_Z, m, ONE, &[]) {
                    e.push_plus_hc(mono);
                }
            }
            _ => {
                for mono in spinor_bilinear(n, &sigma_k(link.direction), m, ONE, &[]) {
                    push_times_bracket(&mut e, I, mono);
                }
            }
        }
    }
    e
}

/// Link rotation part at `β = 1`: `2 Σ L_x` (χ: `2 Σ (L_x¹ + (−1)^n L_x²)`).
pub fn link_rotation_shape(model: &Model) -> OpSum {
    let g = &model.geometry;
    let mut e = OpSum::new();
    for (li, link) in g.links.iter().enumerate() {
        let sign = if model.frame == Frame::PrimitiveChi && link.direction == Direction::Two {
            model.vertex_sign(g.link_source(li))
        } else {
            1.0
        };
        // 2 L_x = L₊ + L₋, invariant under the sign change
        e.push(Monomial::product(Complex64::new(sign, 0.0), &[model.physical_raise(li)]));
        e.push(Monomial::product(Complex64::new(sign, 0.0), &[model.physical_lower(li)]));
    }
    e
}

/// `Σ_<ij> (L_x,i L_x,j + L_y,i L_y,j)` at `Ω = 1`, pairs counted per
/// [`PairCounting`].
pub fn link_link_shape(model: &Model, counting: PairCounting) -> OpSum {
    let mut e = OpSum::new();
    let w = Complex64::new(0.5 * counting.multiplicity(), 0.0);
    for (a, b) in model.geometry.intersecting_link_pairs() {
        // L_x L_x + L_y L_y = (L₊L₋ + L₋L₊)/2 on distinct links
        let (ra, la) = (model.physical_raise(a), model.physical_lower(a));
        let (rb, lb) = (model.physical_raise(b), model.physical_lower(b));
        e.push(Monomial::product(w, &[ra, lb]));
        e.push(Monomial::product(w, &[la, rb]));
    }
    e
}

/// Primitive boson Hamiltonian `Σ (μL_z² + 2βL_x) + Ω Σ_<ij>(L_xL_x + L_yL_y)`.
pub fn primitive_boson_expr(couplings: &CouplingSet, model: &Model) -> OpSum {
    let mut e = he_expr(couplings, model);
    e.extend(link_rotation_shape(model).scaled(couplings.beta));
    e.extend(link_link_shape(model, couplings.pair_counting).scaled(couplings.omega));
    e
}

/// Primitive fermion Hamiltonian: tunneling plus mass.
pub fn primitive_fermion_expr(couplings: &CouplingSet, model: &Model) -> OpSum {
    let mut e = hopping_shape(model).scaled(couplings.eta);
    e.extend(hm_expr(couplings, model));
    e
}

/// `(H_p^b, H_p^f)` on `basis`.
pub fn build_primitive(
    couplings: &CouplingSet,
    frame: Frame,
    basis: &Basis,
) -> (SparseOperator, SparseOperator) {
    let model = Model::for_basis(basis, frame);
    (
        primitive_boson_expr(couplings, &model).assemble(basis),
        primitive_fermion_expr(couplings, &model).assemble(basis),
    )
}

/// Optional diagonal `μ` renormalization added to the analytic effective
/// Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MuRenormalization {
    #[default]
    Off,
    /// `−(4β²/λ) Σ (L² − L_z²)`, the coefficient quoted with the model.
    Quoted,
    /// `−(β²/λ) Σ (L² − L_z²)`, the coefficient second-order perturbation
    /// theory actually produces for `2βL_x` against `λΣG²`.
    SecondOrder,
}

impl MuRenormalization {
    pub fn coefficient(self, couplings: &CouplingSet) -> f64 {
        let b2 = couplings.beta.powi(2) / couplings.lambda;
        match self {
            MuRenormalization::Off => 0.0,
            MuRenormalization::Quoted => -4.0 * b2,
            MuRenormalization::SecondOrder => -b2,
        }
    }
}

/// `H_E + H_B + H_D + H_M` in experiment units (multiply by `1/α` from
/// [`CouplingSet::rescaling`] for lattice units).
pub fn heff_analytic_expr(couplings: &CouplingSet, model: &Model, renorm: MuRenormalization) -> OpSum {
    let mut e = he_expr(couplings, model);
    e.extend(hb_expr(couplings, model));
    e.extend(hd_expr(couplings, model));
    e.extend(hm_expr(couplings, model));
    let c = renorm.coefficient(couplings);
    if c != 0.0 {
        e.extend(mu_renormalization_shape(model).scaled(c));
    }
    e
}

pub fn build_heff_analytic(
    couplings: &CouplingSet,
    frame: Frame,
    basis: &Basis,
    renorm: MuRenormalization,
) -> SparseOperator {
    heff_analytic_expr(couplings, &Model::for_basis(basis, frame), renorm).assemble(basis)
}
