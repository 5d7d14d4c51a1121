//! State preparation, flux-tube breaking and the Ramsey area-law protocol.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{gauss_violations, Basis, BasisKind, Layout, Species};
use crate::dynamics::{leakage, EvolutionMethod, Propagator, StateVector};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::lattice::{Direction, LatticeGeometry, VertexId};
use crate::operators::{
    dirac_shape, electric_shape, heff_analytic_expr, magnetic_shape, mass_shape, CouplingSet, Elem,
    Model, Monomial, MuRenormalization, OpSum, SparseOperator,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One single-site operation applied to the vacuum product state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AddressedEdit {
    /// `m → m + delta` on the link leaving `(n1, n2)` along `direction`.
    Link {
        n1: usize,
        n2: usize,
        direction: u8,
        delta: i64,
    },
    /// Sets the occupations of both species at a vertex.
    Vertex { n1: usize, n2: usize, c: bool, d: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PreparationKind {
    #[default]
    Vacuum,
    AdiabaticWeak,
    LoopSea,
    Addressed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PreparationPlan {
    pub kind: PreparationKind,
    /// `(time, Ω)` knots; Ω is held at each knot's value until the next.
    #[serde(default)]
    pub omega_schedule: Vec<(f64, f64)>,
    #[serde(default)]
    pub addressed_edits: Vec<AddressedEdit>,
}

impl PreparationPlan {
    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn addressed(edits: Vec<AddressedEdit>) -> Self {
        Self {
            kind: PreparationKind::Addressed,
            omega_schedule: Vec::new(),
            addressed_edits: edits,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PreparationKind::AdiabaticWeak | PreparationKind::LoopSea => {
                if self.omega_schedule.len() < 2 {
                    return Err(Error::InvalidPlan("an adiabatic plan needs at least two schedule knots".into()));
                }
                if self.omega_schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidPlan("schedule times must increase strictly".into()));
                }
                if self.omega_schedule[0].0 != 0.0 {
                    return Err(Error::InvalidPlan("schedule must start at t = 0".into()));
                }
            }
            PreparationKind::Addressed => {
                if self.addressed_edits.is_empty() {
                    return Err(Error::InvalidPlan("addressed plan has no edits".into()));
                }
            }
            PreparationKind::Vacuum => {}
        }
        Ok(())
    }
}

/// Fidelity with the instantaneous ground state after a schedule segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub time: f64,
    pub omega: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct PreparedState {
    pub state: StateVector,
    pub fidelity: Vec<FidelityPoint>,
    pub warnings: Vec<String>,
}

/// Gauss targets and frame a basis was built for (neutral otherwise).
fn sector_targets(basis: &Basis, frame: Frame) -> (Frame, Vec<i64>) {
    match basis.kind() {
        BasisKind::Sector { frame, target_g } => (*frame, target_g.clone()),
        _ => (frame, vec![0; basis.geometry().num_vertices()]),
    }
}

/// Applies addressed edits to the vacuum of `frame`.
pub fn apply_edits(geometry: &LatticeGeometry, layout: &Layout, frame: Frame, edits: &[AddressedEdit]) -> Result<u64> {
    let mut code = layout.vacuum(geometry, frame);
    let l = layout.l as i64;
    for e in edits {
        match *e {
            AddressedEdit::Link {
                n1,
                n2,
                direction,
                delta,
            } => {
                let dir = Direction::from_index(direction).ok_or(Error::UnknownLink {
                    n1: n1 as i64,
                    n2: n2 as i64,
                    direction,
                })?;
                let li = geometry.link_index(VertexId::new(n1, n2), dir)?;
                let m = layout.m(code, li) + delta;
                if m.abs() > l {
                    return Err(Error::InvalidPlan(format!(
                        "link ({n1}, {n2}, k={direction}) would reach m = {m} beyond l = {l}"
                    )));
                }
                code = layout.with_m(code, li, m);
            }
            AddressedEdit::Vertex { n1, n2, c, d } => {
                let v = geometry.vertex_index(VertexId::new(n1, n2))?;
                for (species, occ) in [(Species::C, c), (Species::D, d)] {
                    let bit = 1u64 << Layout::mode(v, species);
                    code = if occ { code | bit } else { code & !bit };
                }
            }
        }
    }
    Ok(code)
}

/// Product state produced by addressed edits, checked against Gauss's law.
pub fn prepare_addressed(basis: &Basis, frame: Frame, edits: &[AddressedEdit]) -> Result<StateVector> {
    let g = basis.geometry();
    let code = apply_edits(g, basis.layout(), frame, edits)?;
    let (sector_frame, targets) = sector_targets(basis, frame);
    let bad = gauss_violations(g, basis.layout(), code, sector_frame, &targets);
    if !bad.is_empty() {
        return Err(Error::GaussViolation { vertices: bad });
    }
    StateVector::product(basis, code)
}

/// Edits turning the vacuum into a meson along direction 1: charge `+1`
/// at `(n1, n2)`, `−1` at `(n1 + length, n2)`, and a unit flux tube between.
pub fn meson_edits(geometry: &LatticeGeometry, frame: Frame, n1: usize, n2: usize, length: usize) -> Result<Vec<AddressedEdit>> {
    let mut edits = vec![
        AddressedEdit::Vertex { n1, n2, c: true, d: true },
        AddressedEdit::Vertex {
            n1: n1 + length,
            n2,
            c: false,
            d: false,
        },
    ];
    for k in 0..length {
        let v = VertexId::new(n1 + k, n2);
        let li = geometry.link_index(v, Direction::One)?;
        let delta = match frame {
            Frame::Transformed => 1,
            _ => geometry.link_parity(li) as i64,
        };
        edits.push(AddressedEdit::Link {
            n1: n1 + k,
            n2,
            direction: 1,
            delta,
        });
    }
    Ok(edits)
}

/// Edits creating the counter-clockwise unit loop around the plaquettes of
/// the rectangle `[n1, n1+w] × [n2, n2+h]`.
pub fn loop_edits(geometry: &LatticeGeometry, frame: Frame, n1: usize, n2: usize, w: usize, h: usize) -> Result<Vec<AddressedEdit>> {
    let mut edits = Vec::new();
    let mut push = |x: usize, y: usize, dir: Direction, along: i64| -> Result<()> {
        let li = geometry.link_index(VertexId::new(x, y), dir)?;
        let delta = match frame {
            Frame::Transformed => along,
            _ => along * geometry.link_parity(li) as i64,
        };
        edits.push(AddressedEdit::Link {
            n1: x,
            n2: y,
            direction: dir.index(),
            delta,
        });
        Ok(())
    };
    for x in n1..n1 + w {
        push(x, n2, Direction::One, 1)?;
        push(x, n2 + h, Direction::One, -1)?;
    }
    for y in n2..n2 + h {
        push(n1 + w, y, Direction::Two, 1)?;
        push(n1, y, Direction::Two, -1)?;
    }
    Ok(edits)
}

/// `H_E + H_M + H_D + H_B(Ω)` on the sector.
fn heff_at(couplings: &CouplingSet, omega: f64, frame: Frame, basis: &Basis) -> SparseOperator {
    let k = CouplingSet { omega, ..*couplings };
    heff_analytic_expr(&k, &Model::for_basis(basis, frame), MuRenormalization::Off).assemble(basis)
}

/// Prepares the plan's state on `basis`.
pub fn prepare(
    plan: &PreparationPlan,
    basis: &Basis,
    frame: Frame,
    couplings: &CouplingSet,
    method: EvolutionMethod,
    dense_cutoff: usize,
) -> Result<PreparedState> {
    plan.validate()?;
    let mut warnings = Vec::new();
    match plan.kind {
        PreparationKind::Vacuum => {
            let code = basis.layout().vacuum(basis.geometry(), frame);
            Ok(PreparedState {
                state: StateVector::product(basis, code)?,
                fidelity: Vec::new(),
                warnings,
            })
        }
        PreparationKind::Addressed => Ok(PreparedState {
            state: prepare_addressed(basis, frame, &plan.addressed_edits)?,
            fidelity: Vec::new(),
            warnings,
        }),
        PreparationKind::AdiabaticWeak | PreparationKind::LoopSea => {
            let l = basis.l();
            let ll = (l * (l + 1)) as f64;
            let peak = plan.omega_schedule.iter().fold(0.0f64, |a, k| a.max(k.1.abs()));
            let magnetic = 2.0 * peak * peak * ll * ll / couplings.lambda;
            match plan.kind {
                PreparationKind::AdiabaticWeak if magnetic * 10.0 > couplings.mu => warnings.push(format!(
                    "weak-coupling ramp expects 2Ω²l²(l+1)²/λ ≪ μ, peak value {magnetic:.3e} vs μ = {}",
                    couplings.mu
                )),
                PreparationKind::LoopSea if magnetic < 10.0 * couplings.mu => warnings.push(format!(
                    "loop-sea ramp expects 2Ω²l²(l+1)²/λ ≫ μ, peak value {magnetic:.3e} vs μ = {}",
                    couplings.mu
                )),
                _ => {}
            }
            let ground = |omega: f64| -> Result<StateVector> {
                let h = heff_at(couplings, omega, frame, basis);
                let e = crate::dynamics::eigendecompose(&h, dense_cutoff)?;
                StateVector::new(e.vectors.column(0).iter().copied().collect(), basis)
            };
            let sched = &plan.omega_schedule;
            let mut state = ground(sched[0].1)?;
            let mut fidelity = vec![FidelityPoint {
                time: sched[0].0,
                omega: sched[0].1,
                fidelity: 1.0,
            }];
            for w in sched.windows(2) {
                let h = heff_at(couplings, w[0].1, frame, basis);
                let prop = Propagator::new(&h, method, dense_cutoff)?;
                state = prop.propagate(&state, w[1].0 - w[0].0)?;
                let g = ground(w[1].1)?;
                fidelity.push(FidelityPoint {
                    time: w[1].0,
                    omega: w[1].1,
                    fidelity: g.inner(&state).norm_sqr(),
                });
            }
            Ok(PreparedState {
                state,
                fidelity,
                warnings,
            })
        }
    }
}

/// Parameters of the flux-tube breaking run on a `(L+1) × 1` strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakingConfig {
    pub mass: f64,
    pub mu: f64,
    pub tube_length: usize,
    /// Coefficient `ηβ/λ` of the Dirac term.
    pub dirac: f64,
    pub times: Vec<f64>,
}

impl BreakingConfig {
    /// `L'` with `2M = μL'` and `1 ≤ L' ≤ L`, if any.
    pub fn resonance(&self) -> Option<usize> {
        (1..=self.tube_length).find(|&lp| (2.0 * self.mass - self.mu * lp as f64).abs() <= 1e-9 * self.mu.abs().max(1.0))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreakingPoint {
    pub time: f64,
    pub p_broken: f64,
    pub total_charge: f64,
    /// Probability that each vertex carries a charge it did not carry at `t = 0`.
    pub pair_creation: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreakingRecord {
    pub resonance: Option<usize>,
    pub visibility: f64,
    pub max_charge_drift: f64,
    pub series: Vec<BreakingPoint>,
}

/// `H_E + H_M + H_D` for a breaking run (transformed frame).
pub fn breaking_hamiltonian(config: &BreakingConfig, basis: &Basis) -> SparseOperator {
    let model = Model::for_basis(basis, Frame::Transformed);
    let mut e = electric_shape(&model).scaled(config.mu);
    e.extend(mass_shape(&model).scaled(config.mass));
    e.extend(dirac_shape(&model).scaled(config.dirac));
    e.assemble(basis)
}

/// Strip geometry, sector and initial meson for a breaking run.
pub fn breaking_setup(config: &BreakingConfig, l: u32) -> Result<(Basis, StateVector)> {
    use crate::lattice::{build_lattice, LatticeSpec};
    if config.tube_length == 0 {
        return Err(Error::InvalidPlan("tube_length must be at least 1".into()));
    }
    let g = Arc::new(build_lattice(LatticeSpec::open(config.tube_length + 1, 1))?);
    let basis = crate::basis::neutral_sector(Arc::clone(&g), l, Frame::Transformed)?;
    let edits = meson_edits(&g, Frame::Transformed, 0, 0, config.tube_length)?;
    let state = prepare_addressed(&basis, Frame::Transformed, &edits)?;
    Ok((basis, state))
}

/// Evolves `state` under `h` and records the broken-tube probability.
pub fn run_breaking(
    config: &BreakingConfig,
    basis: &Basis,
    state: &StateVector,
    h: &SparseOperator,
    method: EvolutionMethod,
    dense_cutoff: usize,
) -> Result<BreakingRecord> {
    state.check_basis(basis)?;
    let layout = *basis.layout();
    let nv = layout.n_vertices;
    let charges: Vec<Vec<i64>> = basis
        .codes()
        .iter()
        .map(|&c| (0..nv).map(|v| layout.charge(c, v)).collect())
        .collect();
    // initial charge pattern from the dominant configuration
    let start = (0..basis.len())
        .max_by(|&a, &b| state.probability(a).partial_cmp(&state.probability(b)).unwrap())
        .unwrap_or(0);
    let initial = &charges[start];
    let initial_count = initial.iter().filter(|q| **q != 0).count();
    let broken: Vec<usize> = (0..basis.len())
        .filter(|&i| charges[i].iter().filter(|q| **q != 0).count() > initial_count)
        .collect();
    let prop = Propagator::new(h, method, dense_cutoff)?;
    let states = prop.trajectory(state, &config.times)?;
    let q0: f64 = initial.iter().sum::<i64>() as f64;
    let mut series = Vec::with_capacity(states.len());
    let mut drift = 0.0f64;
    for (t, s) in config.times.iter().zip(&states) {
        let p: Vec<f64> = s.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        let total_charge: f64 = (0..basis.len()).map(|i| p[i] * charges[i].iter().sum::<i64>() as f64).sum();
        drift = drift.max((total_charge - q0).abs());
        let pair_creation = (0..nv)
            .map(|v| {
                (0..basis.len())
                    .filter(|&i| charges[i][v] != 0 && initial[v] == 0)
                    .map(|i| p[i])
                    .sum()
            })
            .collect();
        series.push(BreakingPoint {
            time: *t,
            p_broken: s.weight(&broken),
            total_charge,
            pair_creation,
        });
    }
    let max = series.iter().map(|s| s.p_broken).fold(f64::NEG_INFINITY, f64::max);
    let min = series.iter().map(|s| s.p_broken).fold(f64::INFINITY, f64::min);
    Ok(BreakingRecord {
        resonance: config.resonance(),
        visibility: if series.is_empty() { 0.0 } else { max - min },
        max_charge_drift: drift,
        series,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RamseyMode {
    #[default]
    TwoLevel,
    FullHamiltonian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyConfig {
    pub mu: f64,
    /// `ηβ/(√2λ)`.
    pub pulse_strength: f64,
    /// Pulse duration; defaults to the quarter-rotation time.
    #[serde(default)]
    pub tau: Option<f64>,
    pub t_values: Vec<f64>,
    #[serde(default)]
    pub mode: RamseyMode,
    #[serde(default = "one")]
    pub flux_delta_l: usize,
    /// Meson length `R` for the full-Hamiltonian mode.
    #[serde(default = "three")]
    pub meson_length: usize,
    #[serde(default = "default_leakage_bound")]
    pub leakage_bound: f64,
    /// Keep `H_B` on during free evolution (Ω from the couplings).
    #[serde(default)]
    pub include_magnetic: bool,
}

fn one() -> usize {
    1
}
fn three() -> usize {
    3
}
fn default_leakage_bound() -> f64 {
    0.05
}

impl RamseyConfig {
    /// Pulse duration for a quarter rotation under `pulse_strength`.
    pub fn quarter_rotation_tau(&self) -> f64 {
        std::f64::consts::PI / (4.0 * self.pulse_strength)
    }

    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or_else(|| self.quarter_rotation_tau())
    }

    /// Advisory messages (for example `T ≫ τ` not holding).
    pub fn advisories(&self) -> Vec<String> {
        let tau = self.tau();
        let mut out = Vec::new();
        if let Some(tmin) = self.t_values.iter().copied().reduce(f64::min) {
            if tmin < 10.0 * tau {
                out.push(format!("free evolution T = {tmin} is not ≫ τ = {tau:.4e}"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub t: f64,
    pub p_mn: f64,
    pub p_m1n: f64,
    pub leakage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FringeTable {
    pub mode: RamseyMode,
    pub tau: f64,
    pub points: Vec<FringePoint>,
    pub max_leakage: f64,
    pub advisories: Vec<String>,
}

type C2 = [[Complex64; 2]; 2];

fn mul2(a: &C2, b: &C2) -> C2 {
    let mut o = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    o
}

/// Exact two-level protocol: basis `(|↓⟩, |↑⟩)`, `H₀ = μL|↑⟩⟨↑|`,
/// pulses `exp(−iθσ_y)` with `θ = pulse_strength·τ`.
fn ramsey_two_level(config: &RamseyConfig) -> Vec<FringePoint> {
    let theta = config.pulse_strength * config.tau();
    let (c, s) = (Complex64::new(theta.cos(), 0.0), Complex64::new(theta.sin(), 0.0));
    // components ordered (↑, ↓); σ_y = [[0, −i], [i, 0]]
    let u: C2 = [[c, -s], [s, c]];
    let energy = config.mu * config.flux_delta_l as f64;
    config
        .t_values
        .iter()
        .map(|&t| {
            let free: C2 = [[Complex64::from_polar(1.0, -energy * t), ZERO], [ZERO, Complex64::new(1.0, 0.0)]];
            let total = mul2(&u, &mul2(&free, &u));
            // start in |↓⟩
            let up = total[0][1];
            let down = total[1][1];
            FringePoint {
                t,
                p_mn: down.norm_sqr(),
                p_m1n: up.norm_sqr(),
                leakage: 0.0,
            }
        })
        .collect()
}

/// Geometry, states and operators for the full-Hamiltonian protocol.
pub struct RamseySetup {
    pub basis: Basis,
    pub down: usize,
    pub up: usize,
    /// Pulse generator with unit `|⟨↑|H_y|↓⟩|` scaled to `pulse_strength`.
    pub h_y: SparseOperator,
    pub h_free: SparseOperator,
    /// Basis positions with a `C` fermion at `(m, n)` and at `(m−1, n)`.
    pub c_at_m: Vec<usize>,
    pub c_at_m1: Vec<usize>,
}

/// Builds the `(R+2) × 1` strip: `|R⟩` has `q` at vertex 1 and `q̄` at
/// vertex `R+1`; `|R+1⟩` moves the `C` fermion of `q` to vertex 0.
pub fn ramsey_setup(config: &RamseyConfig, couplings: &CouplingSet, l: u32) -> Result<RamseySetup> {
    use crate::lattice::{build_lattice, LatticeSpec};
    if config.flux_delta_l != 1 {
        return Err(Error::InvalidPlan(
            "full_hamiltonian mode transfers the fermion by one site (flux_delta_l = 1)".into(),
        ));
    }
    let r = config.meson_length;
    if r == 0 {
        return Err(Error::InvalidPlan("meson_length must be at least 1".into()));
    }
    let frame = Frame::Transformed;
    let g = Arc::new(build_lattice(LatticeSpec::open(r + 2, if config.include_magnetic { 2 } else { 1 }))?);
    let basis = crate::basis::neutral_sector(Arc::clone(&g), l, frame)?;
    let down_code = apply_edits(&g, basis.layout(), frame, &meson_edits(&g, frame, 1, 0, r)?)?;
    let up_code = apply_edits(&g, basis.layout(), frame, &meson_edits(&g, frame, 0, 0, r + 1)?)?;
    let down = StateVector::product(&basis, down_code)?;
    let up = StateVector::product(&basis, up_code)?;
    let down = down.amplitudes.iter().position(|a| a.re == 1.0).unwrap();
    let up = up.amplitudes.iter().position(|a| a.re == 1.0).unwrap();

    // i s (c†_m c_{m−1} L₋ − h.c.) on the link from m−1 to m
    let m1 = g.vertex_index(VertexId::new(0, 0))?;
    let m = g.vertex_index(VertexId::new(1, 0))?;
    let link = g.link_index(VertexId::new(0, 0), Direction::One)?;
    let x = Monomial::product(
        Complex64::new(1.0, 0.0),
        &[
            Elem::Create(Layout::mode(m, Species::C)),
            Elem::Annihilate(Layout::mode(m1, Species::C)),
            Elem::Minus(link),
        ],
    );
    let mut hy = OpSum::new();
    let i = Complex64::new(0.0, 1.0);
    hy.push(x.scaled(i));
    hy.push(x.adjoint().scaled(-i));
    let raw = hy.assemble(&basis);
    let element = raw.get(up, down).norm();
    if element == 0.0 {
        return Err(Error::InvalidPlan("pulse does not connect the two meson states".into()));
    }
    let h_y = raw.scale(Complex64::new(config.pulse_strength / element, 0.0));

    let model = Model::for_basis(&basis, frame);
    let mut free = electric_shape(&model).scaled(config.mu);
    if config.include_magnetic {
        free.extend(magnetic_shape(&model).scaled(-couplings.plaquette_coefficient()));
    }
    let h_free = free.assemble(&basis);
    let layout = *basis.layout();
    let c_at = |v: usize| -> Vec<usize> {
        (0..basis.len())
            .filter(|&k| layout.occupied(basis.code(k), Layout::mode(v, Species::C)))
            .collect()
    };
    let c_at_m = c_at(m);
    let c_at_m1 = c_at(m1);
    Ok(RamseySetup {
        basis,
        down,
        up,
        h_y,
        h_free,
        c_at_m,
        c_at_m1,
    })
}

fn ramsey_full(
    config: &RamseyConfig,
    couplings: &CouplingSet,
    l: u32,
    method: EvolutionMethod,
    dense_cutoff: usize,
) -> Result<Vec<FringePoint>> {
    let setup = ramsey_setup(config, couplings, l)?;
    let basis = &setup.basis;
    let tau = config.tau();
    let pulse = Propagator::new(&setup.h_y, method, dense_cutoff)?;
    let free = Propagator::new(&setup.h_free, method, dense_cutoff)?;
    let mut start = vec![ZERO; basis.len()];
    start[setup.down] = Complex64::new(1.0, 0.0);
    let start = StateVector::new(start, basis)?;
    let after_first = pulse.propagate(&start, tau)?;
    let two_level = [setup.down, setup.up];
    let mut points = Vec::with_capacity(config.t_values.len());
    for &t in &config.t_values {
        let s = free.propagate(&after_first, t)?;
        let s = pulse.propagate(&s, tau)?;
        points.push(FringePoint {
            t,
            p_mn: s.weight(&setup.c_at_m),
            p_m1n: s.weight(&setup.c_at_m1),
            leakage: leakage(&s, &two_level),
        });
    }
    Ok(points)
}

/// Runs the Ramsey protocol and returns the fringe table.
pub fn run_ramsey(
    config: &RamseyConfig,
    couplings: &CouplingSet,
    l: u32,
    method: EvolutionMethod,
    dense_cutoff: usize,
) -> Result<FringeTable> {
    let points = match config.mode {
        RamseyMode::TwoLevel => ramsey_two_level(config),
        RamseyMode::FullHamiltonian => ramsey_full(config, couplings, l, method, dense_cutoff)?,
    };
    let max_leakage = points.iter().map(|p| p.leakage).fold(0.0, f64::max);
    if let Some(p) = points.iter().find(|p| p.leakage > config.leakage_bound) {
        return Err(Error::LeakageExceeded {
            leakage: p.leakage,
            bound: config.leakage_bound,
            time: p.t,
        });
    }
    Ok(FringeTable {
        mode: config.mode,
        tau: config.tau(),
        points,
        max_leakage,
        advisories: config.advisories(),
    })
}

/// Result of fitting `a·sin²(ωT/2 + φ) + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub omega: f64,
    pub phase: f64,
    pub visibility: f64,
    pub offset: f64,
    pub rms_residual: f64,
    /// False when the data carry no oscillation to pin `ω`.
    pub omega_identifiable: bool,
}

/// For fixed `ω` the model is linear in `(A, B, C)` of
/// `A + B cos ωT + C sin ωT`; returns the coefficients and residual sum.
fn linear_fit(t: &[f64], y: &[f64], omega: f64) -> ([f64; 3], f64) {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let row = nalgebra::Vector3::new(1.0, (omega * ti).cos(), (omega * ti).sin());
        ata += row * row.transpose();
        aty += row * yi;
    }
    let coef = ata
        .try_inverse()
        .map(|inv| inv * aty)
        .unwrap_or_else(|| nalgebra::Vector3::new(y.iter().sum::<f64>() / y.len() as f64, 0.0, 0.0));
    let ss = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let m = coef[0] + coef[1] * (omega * ti).cos() + coef[2] * (omega * ti).sin();
            (yi - m).powi(2)
        })
        .sum();
    ([coef[0], coef[1], coef[2]], ss)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Nonlinear least squares of `a·sin²(ωT/2 + φ) + c` by variable projection:
/// a grid scan over `ω` up to the sampling limit, then golden-section refinement.
pub fn fit_fringe(t: &[f64], y: &[f64]) -> Result<FringeFit> {
    if t.len() != y.len() || t.len() < 8 {
        return Err(Error::FitFailure(format!("need at least 8 samples, got {}", t.len().min(y.len()))));
    }
    let mut sorted: Vec<f64> = t.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let span = sorted[sorted.len() - 1] - sorted[0];
    let min_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !(span > 0.0) || !min_gap.is_finite() {
        return Err(Error::FitFailure("sample times do not span an interval".into()));
    }
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * scale.max(1.0) {
        let rms = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        return Ok(FringeFit {
            omega: 0.0,
            phase: 0.0,
            visibility: 0.0,
            offset: mean,
            rms_residual: rms,
            omega_identifiable: false,
        });
    }
    let omega_max = std::f64::consts::PI / min_gap;
    let step = 2.0 * std::f64::consts::PI / (span * 16.0);
    let n = ((omega_max / step).ceil() as usize).max(16);
    let ss = |w: f64| linear_fit(t, y, w).1;
    let (best_k, _) = (1..=n)
        .map(|k| (k, ss(k as f64 * step)))
        .fold((1, f64::INFINITY), |acc, (k, s)| if s < acc.1 { (k, s) } else { acc });
    let lo = ((best_k as f64 - 1.0) * step).max(step * 1e-3);
    let hi = (best_k as f64 + 1.0) * step;
    let omega = golden_min(ss, lo, hi, 200);
    let ([a0, b, c], res) = linear_fit(t, y, omega);
    let visibility = 2.0 * (b * b + c * c).sqrt();
    if omega * span < 2.0 * std::f64::consts::PI {
        return Err(Error::FitFailure(format!(
            "samples span {span} but the best frequency {omega} needs {} for one period (initial grid peak at {})",
            2.0 * std::f64::consts::PI / omega,
            best_k as f64 * step
        )));
    }
    let phase = 0.5 * c.atan2(-b);
    Ok(FringeFit {
        omega,
        phase,
        visibility,
        offset: a0 - visibility / 2.0,
        rms_residual: (res / t.len() as f64).sqrt(),
        omega_identifiable: visibility > 1e-9 * scale,
    })
}
