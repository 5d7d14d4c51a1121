//! Command runners behind the CLI. Each writes its artifacts plus a JSON
//! manifest into an output directory; identical inputs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::basis::{enumerate_fermion_number, enumerate_full_basis, enumerate_sector, Basis};
use crate::config::{EffectiveMethod, HamiltonianChoice, ParsedConfig, SimulationConfig};
use crate::dynamics::{eigendecompose, Observables, Propagator, StateVector};
use crate::effective::{emergence_check, exact_effective, match_effective, schrieffer_wolff2, PerturbationSplit};
use crate::error::{Error, Result};
use crate::experiments::{breaking_hamiltonian, breaking_setup, fit_fringe, prepare, run_breaking, run_ramsey, PreparationKind};
use crate::lattice::LatticeGeometry;
use crate::operators::{build_heff_analytic, build_hg, build_primitive, MuRenormalization, SparseOperator};

pub const SCHEMA_VERSION: u32 = 1;

/// Shared run settings from the command line.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    pub dense_cutoff: usize,
}

/// Files written by a command and its summary block.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct Writer<'a> {
    ctx: &'a RunContext,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(ctx: &'a RunContext) -> Result<Self> {
        fs::create_dir_all(&ctx.out)?;
        Ok(Self { ctx, files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.ctx.out.join(name);
        fs::write(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut s = serde_json::to_vec_pretty(value)?;
        s.push(b'\n');
        self.write(name, s)
    }

    fn csv<F>(&mut self, name: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        fill(&mut w)?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.write(name, bytes)
    }

    fn finish(mut self, command: &str, parsed: &ParsedConfig, summary: Value) -> Result<RunOutcome> {
        let outputs: Vec<String> = self
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let manifest = json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "package_version": env!("CARGO_PKG_VERSION"),
            "seed": parsed.config.seed,
            "dense_cutoff": self.ctx.dense_cutoff,
            "config": serde_json::to_value(&parsed.config)?,
            "warnings": parsed.warnings,
            "outputs": outputs,
            "summary": summary,
        });
        self.json("manifest.json", &manifest)?;
        Ok(RunOutcome {
            files: self.files,
            summary: manifest["summary"].clone(),
        })
    }
}

fn geometry(c: &SimulationConfig) -> Result<Arc<LatticeGeometry>> {
    Ok(Arc::new(LatticeGeometry::new(c.lattice)?))
}

/// Gauss sector named by the config, or the unconstrained basis.
pub fn config_basis(c: &SimulationConfig) -> Result<Basis> {
    let g = geometry(c)?;
    match c.sector.targets(&g)? {
        Some(t) => enumerate_sector(g, c.l, c.frame, &t),
        None => enumerate_full_basis(g, c.l),
    }
}

/// Hamiltonian selected by `choice` and the basis it acts on.
pub fn config_hamiltonian(c: &SimulationConfig, choice: HamiltonianChoice) -> Result<(Basis, SparseOperator)> {
    match choice {
        HamiltonianChoice::Effective => {
            let basis = config_basis(c)?;
            let h = build_heff_analytic(&c.couplings, c.frame, &basis, MuRenormalization::Off);
            Ok((basis, h))
        }
        HamiltonianChoice::Primitive => {
            let basis = enumerate_full_basis(geometry(c)?, c.l)?;
            let (hpb, hpf) = build_primitive(&c.couplings, c.frame, &basis);
            let h = build_hg(&c.couplings, c.frame, &basis).add(&hpb).add(&hpf);
            Ok((basis, h))
        }
    }
}

pub fn run_basis(parsed: &ParsedConfig, ctx: &RunContext) -> Result<RunOutcome> {
    let basis = config_basis(&parsed.config)?;
    let mut w = Writer::new(ctx)?;
    w.json("basis.json", &basis.to_json())?;
    let summary = json!({ "dimension": basis.len(), "basis_tag": basis.tag() });
    w.finish("basis", parsed, summary)
}

pub fn run_spectrum(parsed: &ParsedConfig, ctx: &RunContext) -> Result<RunOutcome> {
    let c = &parsed.config;
    let (basis, h) = config_hamiltonian(c, c.spectrum.hamiltonian)?;
    let e = eigendecompose(&h, ctx.dense_cutoff)?;
    let n = c.spectrum.count.unwrap_or(e.values.len()).min(e.values.len());
    let mut w = Writer::new(ctx)?;
    w.csv("spectrum.csv", |out| {
        out.write_record(["index", "energy"])?;
        for (i, v) in e.values.iter().take(n).enumerate() {
            out.write_record([i.to_string(), v.to_string()])?;
        }
        Ok(())
    })?;
    let summary = json!({
        "dimension": basis.len(),
        "basis_tag": basis.tag(),
        "ground_energy": e.values.first().copied(),
        "levels_written": n,
    });
    w.finish("spectrum", parsed, summary)
}

#[derive(Serialize)]
struct LambdaReport {
    lambda: f64,
    report: Value,
    emergence: crate::effective::EmergenceCheck,
}

pub fn run_validate_effective(parsed: &ParsedConfig, ctx: &RunContext) -> Result<RunOutcome> {
    let c = &parsed.config;
    let g = geometry(c)?;
    let n = c.effective.fermion_number.unwrap_or(g.num_vertices() as u32);
    let basis = enumerate_fermion_number(Arc::clone(&g), c.l, n)?;
    let mut reports = Vec::new();
    for &lambda in &c.effective.lambdas {
        let k = crate::operators::CouplingSet { lambda, ..c.couplings };
        let split = PerturbationSplit::primitive(&k, c.frame, basis.clone())?;
        let derived = match c.effective.method {
            EffectiveMethod::Exact => exact_effective(&split, c.effective.exact_options())?,
            EffectiveMethod::SchriefferWolff => schrieffer_wolff2(&split)?,
        };
        let report = match_effective(&derived, &k, c.frame)?;
        reports.push(LambdaReport {
            lambda,
            report: report.to_json(),
            emergence: emergence_check(&derived, &k, c.frame)?,
        });
    }
    let ratios = |f: fn(&crate::effective::EmergenceCheck) -> Option<f64>| -> Vec<Option<f64>> {
        reports
            .windows(2)
            .map(|w| Some(f(&w[0].emergence)? / f(&w[1].emergence)?))
            .collect()
    };
    let summary = json!({
        "fermion_number": n,
        "primitive_dimension": basis.len(),
        "plaquette_deviation_ratios": ratios(|e| e.plaquette_deviation),
        "dirac_deviation_ratios": ratios(|e| e.dirac_deviation),
    });
    let mut w = Writer::new(ctx)?;
    w.json("effective_report.json", &json!({ "reports": serde_json::to_value(&reports)? }))?;
    w.finish("validate-effective", parsed, summary)
}

fn random_state(basis: &Basis, seed: u64) -> Result<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..basis.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    Ok(StateVector::new(amps, basis)?.normalized())
}

pub fn run_evolve(parsed: &ParsedConfig, ctx: &RunContext) -> Result<RunOutcome> {
    let c = &parsed.config;
    let (basis, h) = config_hamiltonian(c, c.evolve.hamiltonian)?;
    let method = c.solver.method_for(basis.len(), ctx.dense_cutoff);
    let mut w = Writer::new(ctx)?;
    let mut warnings = Vec::new();
    let state = if c.evolve.random_state {
        random_state(&basis, c.seed)?
    } else {
        let p = prepare(&c.preparation, &basis, c.frame, &c.couplings, method, ctx.dense_cutoff)?;
        if matches!(c.preparation.kind, PreparationKind::AdiabaticWeak | PreparationKind::LoopSea) {
            w.csv("fidelity.csv", |out| {
                out.write_record(["time", "omega", "fidelity"])?;
                for f in &p.fidelity {
                    out.write_record([f.time.to_string(), f.omega.to_string(), f.fidelity.to_string()])?;
                }
                Ok(())
            })?;
        }
        warnings = p.warnings;
        p.state
    };
    let prop = Propagator::new(&h, method, ctx.dense_cutoff)?;
    let states = prop.trajectory(&state, &c.evolve.times)?;
    let obs = Observables::new(&basis, c.frame, c.couplings.mu);
    let records: Vec<_> = c.evolve.times.iter().zip(&states).map(|(t, s)| obs.measure(s, *t)).collect();
    let e0 = state.expectation(&h).re;
    let energy_drift = states.iter().map(|s| (s.expectation(&h).re - e0).abs()).fold(0.0, f64::max);
    let norm_drift = states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
    let mut bytes = Vec::new();
    crate::dynamics::write_records_csv(&mut bytes, &records)?;
    w.write("observables.csv", bytes)?;
    let summary = json!({
        "dimension": basis.len(),
        "basis_tag": basis.tag(),
        "method": method,
        "energy_drift": energy_drift,
        "norm_drift": norm_drift,
        "preparation_warnings": warnings,
    });
    w.finish("evolve", parsed, summary)
}

pub fn run_ramsey_command(parsed: &ParsedConfig, ctx: &RunContext) -> Result<RunOutcome> {
    let c = &parsed.config;
    let rc = c.ramsey.resolve(&c.couplings);
    // the full-mode strip has a few hundred states; the solver setting decides
    let method = c.solver.method_for(0, ctx.dense_cutoff);
    let table = run_ramsey(&rc, &c.couplings, c.l, method, ctx.dense_cutoff)?;
    let mut w = Writer::new(ctx)?;
    w.csv("fringe.csv", |out| {
        out.write_record(["t", "p_mn", "p_m1n", "leakage"])?;
        for p in &table.points {
            out.write_record([p.t.to_string(), p.p_mn.to_string(), p.p_m1n.to_string(), p.leakage.to_string()])?;
        }
        Ok(())
    })?;
    let t: Vec<f64> = table.points.iter().map(|p| p.t).collect();
    let y: Vec<f64> = table.points.iter().map(|p| p.p_mn).collect();
    let fit = match fit_fringe(&t, &y) {
        Ok(f) => serde_json::to_value(f)?,
        Err(e) => json!({ "error": e.to_string() }),
    };
    let summary = json!({
        "mode": table.mode,
        "tau": table.tau,
        "pulse_strength": rc.pulse_strength,
        "expected_omega": rc.mu * rc.flux_delta_l as f64,
        "max_leakage": table.max_leakage,
        "advisories": table.advisories,
        "fit": fit,
    });
    w.finish("ramsey", parsed, summary)
}

pub fn run_break_command(parsed: &ParsedConfig, ctx: &RunContext) -> Result<RunOutcome> {
    let c = &parsed.config;
    let bc = c.breaking.resolve(&c.couplings);
    let (basis, state) = breaking_setup(&bc, c.l)?;
    let h = breaking_hamiltonian(&bc, &basis);
    let method = c.solver.method_for(basis.len(), ctx.dense_cutoff);
    let rec = run_breaking(&bc, &basis, &state, &h, method, ctx.dense_cutoff)?;
    let mut w = Writer::new(ctx)?;
    let nv = basis.layout().n_vertices;
    w.csv("breaking.csv", |out| {
        let mut header = vec!["time".to_string(), "p_broken".into(), "total_charge".into()];
        header.extend((0..nv).map(|v| format!("pair_creation_{v}")));
        out.write_record(&header)?;
        for p in &rec.series {
            let mut row = vec![p.time.to_string(), p.p_broken.to_string(), p.total_charge.to_string()];
            row.extend(p.pair_creation.iter().map(|x| x.to_string()));
            out.write_record(&row)?;
        }
        Ok(())
    })?;
    let summary = json!({
        "dimension": basis.len(),
        "resonance": rec.resonance,
        "visibility": rec.visibility,
        "max_charge_drift": rec.max_charge_drift,
    });
    w.finish("break", parsed, summary)
}

/// Reads a manifest back (for tests and tooling).
pub fn read_manifest(dir: &Path) -> Result<Value> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    Ok(serde_json::from_str(&text)?)
}
