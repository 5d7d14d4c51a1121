//! Acceptance criteria. Each test prints one `criterion N ...: PASS|FAIL` line.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spingauge::basis::{enumerate_fermion_number, enumerate_full_basis, neutral_sector, Basis, BasisState, Layout};
use spingauge::commands::{run_break_command, run_evolve, run_ramsey_command, RunContext};
use spingauge::config::{ParsedConfig, SimulationConfig};
use spingauge::dynamics::{eigendecompose, krylov_propagate, EvolutionMethod, StateVector, DEFAULT_DENSE_CUTOFF};
use spingauge::effective::{emergence_check, exact_effective, schrieffer_wolff2, PerturbationSplit};
use spingauge::experiments::{
    breaking_hamiltonian, breaking_setup, fit_fringe, run_breaking, run_ramsey, BreakingConfig, RamseyConfig, RamseyMode,
};
use spingauge::frame::Frame;
use spingauge::lattice::{build_lattice, LatticeGeometry, LatticeSpec};
use spingauge::operators::{
    build_gauss_generator, build_hb, build_hd, build_he, build_heff_analytic, build_hg, build_hm, build_primitive,
    CouplingSet, Model, MuRenormalization, SparseOperator,
};

const FRAMES: [Frame; 3] = [Frame::PrimitivePsi, Frame::Transformed, Frame::PrimitiveChi];

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} ({name}): {verdict}  {detail}");
}

fn geo(w: usize, h: usize) -> Arc<LatticeGeometry> {
    Arc::new(build_lattice(LatticeSpec::open(w, h)).unwrap())
}

fn spectrum(h: &SparseOperator) -> Vec<f64> {
    eigendecompose(h, DEFAULT_DENSE_CUTOFF).unwrap().values
}

fn max_spectral_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_1_gauge_invariance() {
    let g = geo(2, 2);
    let basis = enumerate_full_basis(Arc::clone(&g), 1).unwrap();
    assert_eq!(basis.len(), 20736);
    let k = CouplingSet {
        lambda: 10.0,
        mu: 1.0,
        beta: 0.4,
        omega: 0.3,
        eta: 0.7,
        mass: 0.5,
        ..CouplingSet::default()
    };
    let mut worst = 0.0f64;
    for frame in FRAMES {
        let model = Model::for_basis(&basis, frame);
        let terms = [
            build_he(&k, &basis),
            build_hb(&k, frame, &basis),
            build_hd(&k, frame, &basis),
            build_hm(&k, frame, &basis),
        ];
        for v in 0..g.num_vertices() {
            let gv = build_gauss_generator(&model, v, &basis);
            for h in &terms {
                assert!(h.max_abs() > 0.0);
                worst = worst.max(h.commutator(&gv).max_abs());
            }
        }
    }
    let pass = worst < 1e-12;
    report(1, "gauge invariance", pass, &format!("max |[H_X, G_v]| = {worst:.2e} (bound 1e-12)"));
    assert!(pass);
}

#[test]
fn criterion_2_effective_theory_emergence() {
    let g = geo(2, 2);
    let basis = enumerate_fermion_number(Arc::clone(&g), 1, 4).unwrap();
    let mut plaq = Vec::new();
    let mut dirac = Vec::new();
    let mut lines = Vec::new();
    for lambda in [1e2, 1e3, 1e4] {
        let k = CouplingSet {
            lambda,
            mu: 1.0,
            beta: 0.1,
            eta: 0.1,
            omega: 0.1,
            mass: 0.5,
            ..CouplingSet::default()
        };
        let split = PerturbationSplit::primitive(&k, Frame::Transformed, basis.clone()).unwrap();
        let derived = exact_effective(&split, Default::default()).unwrap();
        let e = emergence_check(&derived, &k, Frame::Transformed).unwrap();
        // independent oracles for the analytic amplitudes
        let plaq_oracle = 2.0 * k.omega.powi(2) / lambda * 2f64.sqrt().powi(4);
        let dirac_oracle = k.eta * k.beta / lambda * 2f64.sqrt();
        assert!((e.plaquette_reference.unwrap() - plaq_oracle).abs() < 1e-12 * plaq_oracle);
        assert!((e.dirac_reference.unwrap() - dirac_oracle).abs() < 1e-12 * dirac_oracle);
        plaq.push(e.plaquette_deviation.unwrap());
        dirac.push(e.dirac_deviation.unwrap());
        lines.push(format!(
            "λ={lambda:.0e}: plaquette dev {:.3e}, dirac dev {:.3e}",
            plaq.last().unwrap(),
            dirac.last().unwrap()
        ));
    }
    let ratios: Vec<f64> = plaq
        .windows(2)
        .chain(dirac.windows(2))
        .map(|w| w[0] / w[1])
        .collect();
    let pass = ratios.iter().all(|r| (r - 10.0).abs() <= 2.0);
    report(
        2,
        "effective-theory emergence",
        pass,
        &format!("{}; successive ratios {ratios:.3?} (target 10 ± 20%)", lines.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_3_mu_renormalization() {
    // one link with both endpoint vertices; β-only perturbation, l = 2
    let l = 2u32;
    let g = geo(2, 1);
    let basis = enumerate_full_basis(Arc::clone(&g), l).unwrap();
    let k = CouplingSet {
        lambda: 1e3,
        mu: 0.0,
        beta: 0.1,
        omega: 0.0,
        eta: 0.0,
        mass: 0.0,
        ..CouplingSet::default()
    };
    let split = PerturbationSplit::primitive(&k, Frame::Transformed, basis).unwrap();
    let derived = schrieffer_wolff2(&split).unwrap();
    let layout = *derived.basis.layout();
    let ll = (l * (l + 1)) as f64;
    let quoted = |code: u64| -> f64 {
        (0..layout.n_links)
            .map(|li| -(4.0 * k.beta.powi(2) / k.lambda) * (ll - (layout.m(code, li) as f64).powi(2)))
            .sum()
    };
    let mut worst = 0.0f64;
    let mut ratio = Vec::new();
    for r in 0..derived.basis.len() {
        for c in 0..derived.basis.len() {
            let expect = if r == c { quoted(derived.basis.code(c)) } else { 0.0 };
            let got = derived.op.get(r, c);
            worst = worst.max((got - Complex64::new(expect, 0.0)).norm());
            if r == c && expect != 0.0 {
                ratio.push(got.re / expect);
            }
        }
    }
    let pass = worst < 1e-10;
    report(
        3,
        "mu renormalization",
        pass,
        &format!(
            "max entry deviation from −(4β²/λ)(l(l+1) − m²) = {worst:.3e} (bound 1e-10); derived/quoted ratio {:.4}",
            ratio.iter().sum::<f64>() / ratio.len() as f64
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_fermion_content_table() {
    let g = geo(1, 1);
    let basis = enumerate_full_basis(Arc::clone(&g), 1).unwrap();
    let k = CouplingSet::default();
    let layout = *basis.layout();
    // (n_C, n_D) → (charge, mass above the Dirac sea)
    let table = [((0u8, 1u8), 0i64, 0.0), ((0, 0), -1, k.mass), ((1, 1), 1, k.mass), ((1, 0), 0, 2.0 * k.mass)];
    let mut pass = true;
    for frame in FRAMES {
        let hm = build_hm(&k, frame, &basis);
        let sea = {
            let code = layout.vacuum(&g, frame);
            hm.get(basis.index_of(code).unwrap(), basis.index_of(code).unwrap()).re
        };
        for ((c, d), q, m) in table {
            let code = layout
                .encode(&BasisState {
                    link_m: vec![],
                    occ_c: vec![c],
                    occ_d: vec![d],
                })
                .unwrap();
            let i = basis.index_of(code).unwrap();
            pass &= layout.charge(code, 0) == q;
            pass &= hm.get(i, i).re - sea == m;
        }
    }
    report(4, "fermion content table", pass, "charges {0, −1, +1, 0}, masses {0, M, M, 2M} in all frames");
    assert!(pass);
}

#[test]
fn criterion_5_ramsey_area_law() {
    let mu = 1.0;
    let t: Vec<f64> = (0..32).map(|i| 0.4 * i as f64).collect();
    let mut worst = 0.0f64;
    for l in [1usize, 2] {
        let cfg = RamseyConfig {
            mu,
            pulse_strength: 1e-3,
            tau: None,
            t_values: t.clone(),
            mode: RamseyMode::TwoLevel,
            flux_delta_l: l,
            meson_length: 3,
            leakage_bound: 0.05,
            include_magnetic: false,
        };
        let table = run_ramsey(&cfg, &CouplingSet::default(), 1, EvolutionMethod::Exact, 16).unwrap();
        for p in &table.points {
            worst = worst.max((p.p_mn - (mu * l as f64 * p.t / 2.0).sin().powi(2)).abs());
        }
    }
    let k = CouplingSet {
        lambda: 1e3,
        mu,
        beta: 0.1,
        eta: 0.1,
        omega: 0.01,
        mass: 0.5,
        ..CouplingSet::default()
    };
    let hierarchy = k.strong_limit(1, 10.0).satisfied();
    let cfg = RamseyConfig {
        mu,
        pulse_strength: k.eta * k.beta / (2f64.sqrt() * k.lambda),
        tau: None,
        t_values: t.clone(),
        mode: RamseyMode::FullHamiltonian,
        flux_delta_l: 1,
        meson_length: 3,
        leakage_bound: 0.05,
        include_magnetic: false,
    };
    let table = run_ramsey(&cfg, &k, 1, EvolutionMethod::Exact, DEFAULT_DENSE_CUTOFF).unwrap();
    let fit = fit_fringe(&t, &table.points.iter().map(|p| p.p_mn).collect::<Vec<_>>()).unwrap();
    let freq_dev = (fit.omega - mu).abs() / mu;
    let pass = worst < 1e-12 && hierarchy && freq_dev < 0.02 && table.max_leakage < 0.05;
    report(
        5,
        "ramsey area law",
        pass,
        &format!(
            "two-level max |P − sin²(μLT/2)| = {worst:.2e} over 32 T (L = 1, 2); full mode fitted ω/μ − 1 = {freq_dev:.2e}, max leakage {:.2e}, hierarchy satisfied = {hierarchy}",
            table.max_leakage
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_flux_tube_breaking() {
    let times: Vec<f64> = (0..=200).map(|i| i as f64).collect();
    let run = |mass: f64| {
        let cfg = BreakingConfig {
            mass,
            mu: 1.0,
            tube_length: 3,
            dirac: 0.05,
            times: times.clone(),
        };
        let (basis, state) = breaking_setup(&cfg, 1).unwrap();
        let h = breaking_hamiltonian(&cfg, &basis);
        run_breaking(&cfg, &basis, &state, &h, EvolutionMethod::Exact, DEFAULT_DENSE_CUTOFF).unwrap()
    };
    // 2M = μL' with L' = 1 links removed by one pair; off resonance 2M = μL' + 5μ
    let on = run(0.5);
    let off = run(3.0);
    let drift = on.max_charge_drift.max(off.max_charge_drift);
    let pass = on.resonance == Some(1) && off.resonance.is_none() && on.visibility > off.visibility && drift < 1e-12;
    report(
        6,
        "flux-tube breaking",
        pass,
        &format!(
            "visibility on {:.4} vs off {:.4}; max total-charge drift {drift:.1e}",
            on.visibility, off.visibility
        ),
    );
    assert!(pass);
}

fn random_state(basis: &Basis, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..basis.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    StateVector::new(amps, basis).unwrap().normalized()
}

#[test]
fn criterion_7_unitarity_and_determinism() {
    let g = geo(2, 2);
    let basis = neutral_sector(Arc::clone(&g), 1, Frame::Transformed).unwrap();
    let k = CouplingSet {
        lambda: 10.0,
        omega: 0.5,
        eta: 1.0,
        beta: 1.0,
        ..CouplingSet::default()
    };
    let h = build_heff_analytic(&k, Frame::Transformed, &basis, MuRenormalization::Off);
    let e = eigendecompose(&h, DEFAULT_DENSE_CUTOFF).unwrap();
    let hnorm = e.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut psi = random_state(&basis, 3);
    let mut drift = 0.0f64;
    let mut steps = 0;
    for _ in 0..1000 {
        let (next, stats) = krylov_propagate(&h, &psi, 0.5 / hnorm, 30, 1e-10, 60).unwrap();
        steps += stats.steps;
        psi = next;
        drift = drift.max((psi.norm() - 1.0).abs());
    }

    let psi0 = random_state(&basis, 5);
    let t = 50.0 / hnorm;
    let exact = e.propagate(&psi0, t);
    let (kry, _) = krylov_propagate(&h, &psi0, t, 30, 1e-10, 60).unwrap();
    let amp_err = exact
        .amplitudes
        .iter()
        .zip(&kry.amplitudes)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    let dir = tempfile::tempdir().unwrap();
    let mut config = SimulationConfig::default();
    config.seed = 42;
    config.evolve.random_state = true;
    config.ramsey.mode = RamseyMode::FullHamiltonian;
    config.breaking.times = (0..=20).map(|i| i as f64).collect();
    let parsed = ParsedConfig {
        config,
        warnings: vec![],
    };
    let mut identical = true;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let ctx = RunContext {
            out: dir.path().join(run),
            dense_cutoff: DEFAULT_DENSE_CUTOFF,
        };
        let mut files = run_evolve(&parsed, &ctx).unwrap().files;
        files.extend(run_ramsey_command(&parsed, &RunContext { out: ctx.out.join("r"), ..ctx.clone() }).unwrap().files);
        files.extend(run_break_command(&parsed, &RunContext { out: ctx.out.join("b"), ..ctx.clone() }).unwrap().files);
        outputs.push(files.iter().map(|f| std::fs::read(f).unwrap()).collect::<Vec<_>>());
    }
    identical &= outputs[0] == outputs[1];

    let pass = drift < 1e-10 && steps >= 1000 && amp_err < 1e-9 && identical;
    report(
        7,
        "unitarity and determinism",
        pass,
        &format!(
            "norm drift {drift:.2e} over {steps} Krylov steps; Krylov vs dense {amp_err:.2e}; byte-identical outputs = {identical}"
        ),
    );
    assert!(pass);
}

/// Sub-basis of `full` selected by `keep`.
fn restrict(full: &Basis, keep: impl Fn(&Layout, u64) -> bool, label: &str) -> Basis {
    let layout = *full.layout();
    let idx: Vec<usize> = (0..full.len()).filter(|&i| keep(&layout, full.code(i))).collect();
    full.subset(&idx, label).unwrap()
}

#[test]
fn criterion_8_frame_covariance() {
    let g = geo(2, 2);
    let k = CouplingSet {
        lambda: 10.0,
        mu: 1.0,
        beta: 0.4,
        omega: 0.3,
        eta: 0.7,
        mass: 0.5,
        ..CouplingSet::default()
    };
    let mut lines = Vec::new();
    let mut pass = true;
    let mut check = |name: &str, spectra: Vec<Vec<f64>>| {
        let to_transformed = max_spectral_gap(&spectra[0], &spectra[1]);
        let to_chi = max_spectral_gap(&spectra[0], &spectra[2]);
        let ok = to_transformed < 1e-12 && to_chi < 1e-12;
        pass &= ok;
        lines.push(if ok {
            format!("{name} ok")
        } else {
            format!("{name} differs (psi vs transformed {to_transformed:.1e}, psi vs chi {to_chi:.1e})")
        });
    };

    // gauge-invariant terms on the neutral sector of each frame
    type Builder = fn(&CouplingSet, Frame, &Basis) -> SparseOperator;
    let sector_terms: [(&str, Builder); 5] = [
        ("H_E", |k, _, b| build_he(k, b)),
        ("H_M", |k, f, b| build_hm(k, f, b)),
        ("H_B", |k, f, b| build_hb(k, f, b)),
        ("H_D", |k, f, b| build_hd(k, f, b)),
        ("H_eff", |k, f, b| build_heff_analytic(k, f, b, MuRenormalization::Off)),
    ];
    let sectors: Vec<Basis> = FRAMES.iter().map(|&f| neutral_sector(Arc::clone(&g), 1, f).unwrap()).collect();
    for (name, build) in sector_terms {
        check(name, FRAMES.iter().zip(&sectors).map(|(&f, b)| spectrum(&build(&k, f, b))).collect());
    }

    // primitive terms: H_G is diagonal on the full basis; the boson term acts on
    // links only and the fermion term on fermions only
    let full = enumerate_full_basis(Arc::clone(&g), 1).unwrap();
    check(
        "H_G",
        FRAMES
            .iter()
            .map(|&f| {
                let mut d = build_hg(&k, f, &full).diagonal_values();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                d
            })
            .collect(),
    );
    let links = restrict(&full, |l, c| l.fermion_part(c) == 0, "links");
    let fermions = restrict(&full, |l, c| (0..l.n_links).all(|li| l.m(c, li) == 0), "fermions");
    check("H_p^b", FRAMES.iter().map(|&f| spectrum(&build_primitive(&k, f, &links).0)).collect());
    check("H_p^f", FRAMES.iter().map(|&f| spectrum(&build_primitive(&k, f, &fermions).1)).collect());

    report(8, "frame covariance", pass, &lines.join(", "));
    assert!(pass);
}
