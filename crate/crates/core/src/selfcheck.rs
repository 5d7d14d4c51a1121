//! Invariant suite on built-in small instances.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{enumerate_full_basis, neutral_sector, BasisState};
use crate::config::{parse_config_str, SimulationConfig};
use crate::dynamics::{eigendecompose, krylov_propagate, StateVector};
use crate::error::Result;
use crate::experiments::{fit_fringe, run_ramsey, RamseyConfig, RamseyMode};
use crate::frame::Frame;
use crate::lattice::{build_lattice, LatticeGeometry, LatticeSpec};
use crate::operators::{
    build_gauss_generator, build_hb, build_hd, build_he, build_heff_analytic, build_hm, CouplingSet, Model,
    MuRenormalization,
};
use crate::dynamics::EvolutionMethod;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, bound: f64) -> CheckResult {
    CheckResult {
        name,
        passed: value < bound,
        detail: format!("{value:.3e} < {bound:.0e}"),
    }
}

fn geo(w: usize, h: usize) -> Result<Arc<LatticeGeometry>> {
    Ok(Arc::new(build_lattice(LatticeSpec::open(w, h))?))
}

fn gauss_invariance() -> Result<CheckResult> {
    let g = geo(2, 2)?;
    let basis = enumerate_full_basis(Arc::clone(&g), 1)?;
    let k = CouplingSet::default();
    let frame = Frame::Transformed;
    let terms = [
        build_he(&k, &basis),
        build_hb(&k, frame, &basis),
        build_hd(&k, frame, &basis),
        build_hm(&k, frame, &basis),
    ];
    let model = Model::for_basis(&basis, frame);
    let mut worst = 0.0f64;
    for v in 0..g.num_vertices() {
        let gv = build_gauss_generator(&model, v, &basis);
        for h in &terms {
            worst = worst.max(h.commutator(&gv).max_abs());
        }
    }
    Ok(check("gauss invariance [H_X, G_v]", worst, 1e-12))
}

fn hermiticity() -> Result<CheckResult> {
    let g = geo(2, 2)?;
    let k = CouplingSet::default();
    let mut worst = 0.0f64;
    for frame in [Frame::PrimitivePsi, Frame::Transformed, Frame::PrimitiveChi] {
        let basis = neutral_sector(Arc::clone(&g), 1, frame)?;
        let h = build_heff_analytic(&k, frame, &basis, MuRenormalization::Off);
        worst = worst.max(h.hermiticity_error());
    }
    Ok(check("effective hamiltonian hermitian", worst, 1e-14))
}

fn frame_covariance() -> Result<CheckResult> {
    let g = geo(2, 2)?;
    let k = CouplingSet {
        lambda: 10.0,
        omega: 0.3,
        ..CouplingSet::default()
    };
    let mut spectra = Vec::new();
    for frame in [Frame::PrimitivePsi, Frame::Transformed, Frame::PrimitiveChi] {
        let basis = neutral_sector(Arc::clone(&g), 1, frame)?;
        let h = build_heff_analytic(&k, frame, &basis, MuRenormalization::Off);
        spectra.push(eigendecompose(&h, 4096)?.values);
    }
    let mut worst = 0.0f64;
    for s in &spectra[1..] {
        if s.len() != spectra[0].len() {
            worst = f64::INFINITY;
            continue;
        }
        for (a, b) in s.iter().zip(&spectra[0]) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(check("frame covariance of spectra", worst, 1e-12))
}

fn krylov_oracle() -> Result<CheckResult> {
    let g = geo(2, 2)?;
    let basis = neutral_sector(Arc::clone(&g), 1, Frame::Transformed)?;
    let k = CouplingSet {
        lambda: 10.0,
        omega: 0.5,
        eta: 1.0,
        beta: 1.0,
        ..CouplingSet::default()
    };
    let h = build_heff_analytic(&k, Frame::Transformed, &basis, MuRenormalization::Off);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let amps = (0..basis.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let psi = StateVector::new(amps, &basis)?.normalized();
    let e = eigendecompose(&h, 4096)?;
    let norm = e.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let t = 50.0 / norm;
    let exact = e.propagate(&psi, t);
    let (kry, _) = krylov_propagate(&h, &psi, t, 30, 1e-10, 60)?;
    let worst = exact
        .amplitudes
        .iter()
        .zip(&kry.amplitudes)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(check("krylov vs dense propagation", worst, 1e-9))
}

fn ramsey_closed_form() -> Result<CheckResult> {
    let mu = 1.0;
    let cfg = RamseyConfig {
        mu,
        pulse_strength: 0.01,
        tau: None,
        t_values: (0..32).map(|i| 0.37 * i as f64).collect(),
        mode: RamseyMode::TwoLevel,
        flux_delta_l: 1,
        meson_length: 3,
        leakage_bound: 0.05,
        include_magnetic: false,
    };
    let table = run_ramsey(&cfg, &CouplingSet::default(), 1, EvolutionMethod::Exact, 16)?;
    let worst = table
        .points
        .iter()
        .map(|p| (p.p_mn - (mu * p.t / 2.0).sin().powi(2)).abs())
        .fold(0.0, f64::max);
    Ok(check("two-level ramsey fringe", worst, 1e-12))
}

fn fringe_fit() -> Result<CheckResult> {
    let t: Vec<f64> = (0..32).map(|i| 0.37 * i as f64).collect();
    let y: Vec<f64> = t.iter().map(|x| (0.8 * x / 2.0f64).sin().powi(2)).collect();
    let f = fit_fringe(&t, &y)?;
    Ok(check("fringe fit frequency", (f.omega - 0.8).abs() / 0.8, 1e-6))
}

fn content_table() -> Result<CheckResult> {
    let g = geo(1, 1)?;
    let basis = enumerate_full_basis(Arc::clone(&g), 1)?;
    let k = CouplingSet::default();
    let hm = build_hm(&k, Frame::PrimitivePsi, &basis);
    let layout = *basis.layout();
    let expect = [((0, 1), 0, 0.0), ((0, 0), -1, k.mass), ((1, 1), 1, k.mass), ((1, 0), 0, 2.0 * k.mass)];
    let mut worst = 0.0f64;
    for ((c, d), q, m) in expect {
        let code = layout.encode(&BasisState {
            link_m: vec![],
            occ_c: vec![c],
            occ_d: vec![d],
        })?;
        let i = basis.index_of(code).expect("full basis");
        worst = worst.max((layout.charge(code, 0) - q).abs() as f64);
        worst = worst.max((hm.get(i, i).re + k.mass - m).abs());
    }
    Ok(check("vertex content charges and masses", worst, 1e-15))
}

fn config_round_trip() -> Result<CheckResult> {
    let c = SimulationConfig::default();
    let back = parse_config_str(&c.to_toml()?)?.config;
    Ok(CheckResult {
        name: "config round trip",
        passed: back == c,
        detail: if back == c { "lossless".into() } else { "mismatch".into() },
    })
}

/// Runs every check; failures to even run are reported as failed checks.
pub fn run_selfcheck() -> Vec<CheckResult> {
    let checks: [(&'static str, fn() -> Result<CheckResult>); 8] = [
        ("gauss invariance [H_X, G_v]", gauss_invariance),
        ("effective hamiltonian hermitian", hermiticity),
        ("frame covariance of spectra", frame_covariance),
        ("krylov vs dense propagation", krylov_oracle),
        ("two-level ramsey fringe", ramsey_closed_form),
        ("fringe fit frequency", fringe_fit),
        ("vertex content charges and masses", content_table),
        ("config round trip", config_round_trip),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            f().unwrap_or_else(|e| CheckResult {
                name,
                passed: false,
                detail: e.to_string(),
            })
        })
        .collect()
}

/// Fixed-width pass/fail table.
pub fn format_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in results {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        s.push_str(&format!("{mark}  {:width$}  {}\n", r.name, r.detail));
    }
    s
}
