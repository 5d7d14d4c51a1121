//! Run configuration: a strict TOML schema.
//!
//! All energies are in units of `μ = 1` unless `couplings.mu` says otherwise.
//! Unknown keys are rejected, and every problem in a file is reported at once.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::EvolutionMethod;
use crate::effective::ExactOptions;
use crate::error::{Error, Result};
use crate::experiments::{BreakingConfig, PreparationPlan, RamseyConfig, RamseyMode};
use crate::frame::Frame;
use crate::lattice::{LatticeGeometry, LatticeSpec, VertexId};
use crate::operators::CouplingSet;

/// Margin used for the "≪" comparisons of the strong-coupling hierarchy.
pub const HIERARCHY_MARGIN: f64 = 10.0;

/// Gauss sector to work in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SectorSpec {
    /// `"neutral"` (all `G_v = 0`) or `"full"` (no constraint).
    Named(String),
    /// Listed `[n1, n2, g]` entries; unlisted vertices take `g = 0`.
    Targets { target_g: Vec<[i64; 3]> },
}

impl Default for SectorSpec {
    fn default() -> Self {
        SectorSpec::Named("neutral".into())
    }
}

impl SectorSpec {
    /// Per-vertex targets, or `None` for the unconstrained basis.
    pub fn targets(&self, geometry: &LatticeGeometry) -> Result<Option<Vec<i64>>> {
        match self {
            SectorSpec::Named(n) if n == "neutral" => Ok(Some(vec![0; geometry.num_vertices()])),
            SectorSpec::Named(n) if n == "full" => Ok(None),
            SectorSpec::Named(n) => Err(Error::Config(vec![format!(
                "sector: expected \"neutral\", \"full\" or a target_g table, got \"{n}\""
            )])),
            SectorSpec::Targets { target_g } => {
                let mut out = vec![0; geometry.num_vertices()];
                for [n1, n2, g] in target_g {
                    if *n1 < 0 || *n2 < 0 {
                        return Err(Error::UnknownVertex(*n1, *n2));
                    }
                    let v = geometry.vertex_index(VertexId::new(*n1 as usize, *n2 as usize))?;
                    out[v] = *g;
                }
                Ok(Some(out))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Dense below the cutoff, Krylov above.
    #[default]
    Auto,
    Exact,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
    pub max_restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        match EvolutionMethod::krylov() {
            EvolutionMethod::Krylov { dim, tol, max_restarts } => Self {
                method: SolverMethod::Auto,
                krylov_dim: dim,
                krylov_tol: tol,
                max_restarts,
            },
            EvolutionMethod::Exact => unreachable!(),
        }
    }
}

impl SolverConfig {
    pub fn method_for(&self, dim: usize, dense_cutoff: usize) -> EvolutionMethod {
        let krylov = EvolutionMethod::Krylov {
            dim: self.krylov_dim,
            tol: self.krylov_tol,
            max_restarts: self.max_restarts,
        };
        match self.method {
            SolverMethod::Exact => EvolutionMethod::Exact,
            SolverMethod::Krylov => krylov,
            SolverMethod::Auto if dim <= dense_cutoff => EvolutionMethod::Exact,
            SolverMethod::Auto => krylov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianChoice {
    /// `H_E + H_M + H_B + H_D` on the Gauss sector.
    #[default]
    Effective,
    /// `H_G + H_primitive` on the unconstrained basis.
    Primitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SpectrumConfig {
    pub hamiltonian: HamiltonianChoice,
    /// Number of lowest levels written; all when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveConfig {
    pub hamiltonian: HamiltonianChoice,
    pub times: Vec<f64>,
    /// Start from a seeded random state instead of the preparation plan.
    pub random_state: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            hamiltonian: HamiltonianChoice::Effective,
            times: (0..=20).map(|i| i as f64).collect(),
            random_state: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveMethod {
    /// Self-consistent block diagonalization to all orders.
    #[default]
    Exact,
    /// Second-order Schrieffer–Wolff.
    SchriefferWolff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectiveConfig {
    pub lambdas: Vec<f64>,
    pub method: EffectiveMethod,
    /// Fermion number of the primitive basis; one per vertex when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fermion_number: Option<u32>,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for EffectiveConfig {
    fn default() -> Self {
        let o = ExactOptions::default();
        Self {
            lambdas: vec![1e2, 1e3, 1e4],
            method: EffectiveMethod::Exact,
            fermion_number: None,
            max_iterations: o.max_iterations,
            tolerance: o.tolerance,
        }
    }
}

impl EffectiveConfig {
    pub fn exact_options(&self) -> ExactOptions {
        ExactOptions {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
        }
    }
}

/// `[ramsey]` table; `mu` and `pulse_strength` default from the couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RamseySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_strength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub t_values: Vec<f64>,
    pub mode: RamseyMode,
    pub flux_delta_l: usize,
    pub meson_length: usize,
    pub leakage_bound: f64,
    pub include_magnetic: bool,
}

impl Default for RamseySection {
    fn default() -> Self {
        Self {
            mu: None,
            pulse_strength: None,
            tau: None,
            t_values: (0..32).map(|i| 0.25 * i as f64).collect(),
            mode: RamseyMode::TwoLevel,
            flux_delta_l: 1,
            meson_length: 3,
            leakage_bound: 0.05,
            include_magnetic: false,
        }
    }
}

impl RamseySection {
    pub fn resolve(&self, k: &CouplingSet) -> RamseyConfig {
        RamseyConfig {
            mu: self.mu.unwrap_or(k.mu),
            pulse_strength: self
                .pulse_strength
                .unwrap_or(k.eta * k.beta / (std::f64::consts::SQRT_2 * k.lambda)),
            tau: self.tau,
            t_values: self.t_values.clone(),
            mode: self.mode,
            flux_delta_l: self.flux_delta_l,
            meson_length: self.meson_length,
            leakage_bound: self.leakage_bound,
            include_magnetic: self.include_magnetic,
        }
    }
}

/// `[breaking]` table; `mass`, `mu` and the Dirac coefficient default from the couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BreakingSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirac: Option<f64>,
    pub tube_length: usize,
    pub times: Vec<f64>,
}

impl Default for BreakingSection {
    fn default() -> Self {
        Self {
            mass: None,
            mu: None,
            dirac: None,
            tube_length: 3,
            times: (0..=100).map(|i| i as f64).collect(),
        }
    }
}

impl BreakingSection {
    pub fn resolve(&self, k: &CouplingSet) -> BreakingConfig {
        BreakingConfig {
            mass: self.mass.unwrap_or(k.mass),
            mu: self.mu.unwrap_or(k.mu),
            tube_length: self.tube_length,
            dirac: self.dirac.unwrap_or(k.dirac_coefficient()),
            times: self.times.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub lattice: LatticeSpec,
    pub l: u32,
    pub couplings: CouplingSet,
    pub frame: Frame,
    pub sector: SectorSpec,
    pub seed: u64,
    pub solver: SolverConfig,
    pub preparation: PreparationPlan,
    pub spectrum: SpectrumConfig,
    pub evolve: EvolveConfig,
    pub effective: EffectiveConfig,
    pub ramsey: RamseySection,
    pub breaking: BreakingSection,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            lattice: LatticeSpec::open(2, 2),
            l: 1,
            couplings: CouplingSet::default(),
            frame: Frame::Transformed,
            sector: SectorSpec::default(),
            seed: 0,
            solver: SolverConfig::default(),
            preparation: PreparationPlan::default(),
            spectrum: SpectrumConfig::default(),
            evolve: EvolveConfig::default(),
            effective: EffectiveConfig::default(),
            ramsey: RamseySection::default(),
            breaking: BreakingSection::default(),
        }
    }
}

/// A validated configuration and its non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: SimulationConfig,
    pub warnings: Vec<String>,
}

/// Allowed keys below a dotted path; `None` for leaves.
fn allowed_keys(path: &str) -> Option<&'static [&'static str]> {
    Some(match path {
        "" => &[
            "lattice",
            "l",
            "couplings",
            "frame",
            "sector",
            "seed",
            "solver",
            "preparation",
            "spectrum",
            "evolve",
            "effective",
            "ramsey",
            "breaking",
        ],
        "lattice" => &["width", "height", "boundary"],
        "couplings" => &["lambda", "mu", "beta", "omega", "eta", "mass", "pair_counting"],
        "sector" => &["target_g"],
        "solver" => &["method", "krylov_dim", "krylov_tol", "max_restarts"],
        "preparation" => &["kind", "omega_schedule", "addressed_edits"],
        "preparation.addressed_edits" => &["op", "n1", "n2", "direction", "delta", "c", "d"],
        "spectrum" => &["hamiltonian", "count"],
        "evolve" => &["hamiltonian", "times", "random_state"],
        "effective" => &["lambdas", "method", "fermion_number", "max_iterations", "tolerance"],
        "ramsey" => &[
            "mu",
            "pulse_strength",
            "tau",
            "t_values",
            "mode",
            "flux_delta_l",
            "meson_length",
            "leakage_bound",
            "include_magnetic",
        ],
        "breaking" => &["mass", "mu", "dirac", "tube_length", "times"],
        _ => return None,
    })
}

fn check_keys(value: &toml::Value, path: &str, errors: &mut Vec<String>) {
    match value {
        toml::Value::Table(t) => {
            let Some(allowed) = allowed_keys(path) else {
                return;
            };
            for (k, v) in t {
                let child = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                if allowed.contains(&k.as_str()) {
                    check_keys(v, &child, errors);
                } else {
                    errors.push(format!("unknown key `{child}`"));
                }
            }
        }
        toml::Value::Array(items) => {
            for item in items {
                check_keys(item, path, errors);
            }
        }
        _ => {}
    }
}

fn section<T: DeserializeOwned>(table: &toml::Table, key: &str, default: T, errors: &mut Vec<String>) -> T {
    match table.get(key) {
        None => default,
        Some(v) => match v.clone().try_into::<T>() {
            Ok(x) => x,
            Err(e) => {
                errors.push(format!("{key}: {}", e.to_string().trim()));
                default
            }
        },
    }
}

fn check_times(name: &str, times: &[f64], errors: &mut Vec<String>) {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        errors.push(format!("{name}: times must be finite and non-negative"));
    }
}

impl SimulationConfig {
    /// Semantic checks; returns every failure.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if let Err(e) = self.lattice.validate() {
            errors.push(format!("lattice: {e}"));
        }
        if let Err(Error::Config(es)) = self.couplings.validate() {
            errors.extend(es);
        }
        if self.l == 0 {
            errors.push("l: spin length must be at least 1".into());
        }
        // TOML integers are signed
        if self.seed > i64::MAX as u64 {
            errors.push(format!("seed: {} does not fit a TOML integer", self.seed));
        }
        if errors.is_empty() {
            match LatticeGeometry::new(self.lattice) {
                Ok(g) => {
                    if let Err(e) = crate::basis::Layout::new(&g, self.l) {
                        errors.push(format!("l: {e}"));
                    }
                    if let Err(e) = self.sector.targets(&g) {
                        errors.push(format!("sector: {e}"));
                    }
                }
                Err(e) => errors.push(format!("lattice: {e}")),
            }
        }
        if let Err(e) = self.preparation.validate() {
            errors.push(format!("preparation: {e}"));
        }
        if self.solver.krylov_dim < 2 || !(self.solver.krylov_tol > 0.0) {
            errors.push("solver: krylov_dim must be ≥ 2 and krylov_tol > 0".into());
        }
        check_times("evolve.times", &self.evolve.times, &mut errors);
        check_times("ramsey.t_values", &self.ramsey.t_values, &mut errors);
        check_times("breaking.times", &self.breaking.times, &mut errors);
        if self.effective.lambdas.iter().any(|x| !(*x > 0.0)) {
            errors.push("effective.lambdas: every λ must be > 0".into());
        }
        let r = &self.ramsey;
        if r.flux_delta_l == 0 || r.meson_length == 0 {
            errors.push("ramsey: flux_delta_l and meson_length must be ≥ 1".into());
        }
        if !(r.leakage_bound > 0.0) {
            errors.push("ramsey.leakage_bound must be > 0".into());
        }
        if r.tau.is_some_and(|t| !(t > 0.0)) || r.pulse_strength.is_some_and(|s| !(s > 0.0)) {
            errors.push("ramsey: tau and pulse_strength must be > 0".into());
        }
        if self.breaking.tube_length == 0 {
            errors.push("breaking.tube_length must be ≥ 1".into());
        }
        errors
    }

    /// Warnings about the strong-coupling hierarchy.
    pub fn warnings(&self) -> Vec<String> {
        let s = self.couplings.strong_limit(self.l, HIERARCHY_MARGIN);
        let mut w = Vec::new();
        if !s.gauss_dominant {
            w.push(format!(
                "hierarchy: λ = {} is not ≫ the other couplings (margin {HIERARCHY_MARGIN})",
                self.couplings.lambda
            ));
        }
        if !s.dirac_below_mu {
            w.push(format!(
                "hierarchy: Dirac scale {:.3e} is not ≪ μ = {}",
                s.dirac_scale, s.mu
            ));
        }
        if !s.magnetic_below_dirac {
            w.push(format!(
                "hierarchy: magnetic scale {:.3e} is not ≪ Dirac scale {:.3e}",
                s.magnetic_scale, s.dirac_scale
            ));
        }
        w
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(vec![e.to_string()]))
    }
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str) -> Result<ParsedConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string().trim().to_string()]))?;
    let mut errors = Vec::new();
    check_keys(&toml::Value::Table(table.clone()), "", &mut errors);
    let d = SimulationConfig::default();
    let config = SimulationConfig {
        lattice: section(&table, "lattice", d.lattice, &mut errors),
        l: section(&table, "l", d.l, &mut errors),
        couplings: section(&table, "couplings", d.couplings, &mut errors),
        frame: section(&table, "frame", d.frame, &mut errors),
        sector: section(&table, "sector", d.sector, &mut errors),
        seed: section(&table, "seed", d.seed, &mut errors),
        solver: section(&table, "solver", d.solver, &mut errors),
        preparation: section(&table, "preparation", d.preparation, &mut errors),
        spectrum: section(&table, "spectrum", d.spectrum, &mut errors),
        evolve: section(&table, "evolve", d.evolve, &mut errors),
        effective: section(&table, "effective", d.effective, &mut errors),
        ramsey: section(&table, "ramsey", d.ramsey, &mut errors),
        breaking: section(&table, "breaking", d.breaking, &mut errors),
    };
    errors.extend(config.validate());
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let warnings = config.warnings();
    Ok(ParsedConfig { config, warnings })
}

pub fn parse_config(path: &Path) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config_str(&text)
}
