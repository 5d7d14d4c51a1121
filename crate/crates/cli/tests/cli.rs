use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spingauge"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn selfcheck_prints_table_and_succeeds() {
    let out = run(&["selfcheck"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().count(), 8);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn ramsey_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("ramsey_full.toml");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let o = run(&[
            "ramsey",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["fringe.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["config"]["ramsey"]["mode"], "full_hamiltonian");
    let header = fs::read_to_string(a.join("fringe.csv")).unwrap();
    assert!(header.starts_with("t,p_mn,p_m1n,leakage\n"));
}

#[test]
fn invalid_config_exits_one_with_all_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "l = -1\nflavour = 2\n").unwrap();
    let o = run(&["basis", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("l:"), "{err}");
    assert!(err.contains("flavour"), "{err}");
}

#[test]
fn dense_cutoff_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--dense-cutoff", "10", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("krylov"));
}

#[test]
fn krylov_non_convergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.toml");
    fs::write(
        &cfg,
        "[solver]\nmethod = \"krylov\"\nkrylov_dim = 2\nkrylov_tol = 1e-300\nmax_restarts = 0\n[evolve]\nrandom_state = true\ntimes = [0.0, 100.0]\n",
    )
    .unwrap();
    let o = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn breaking_and_hierarchy_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("w.toml");
    fs::write(&cfg, "[couplings]\nlambda = 1.0\nmu = 1.0\n[breaking]\ntimes = [0.0, 1.0]\n").unwrap();
    let o = run(&["break", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning: hierarchy"));
    let csv = fs::read_to_string(dir.path().join("breaking.csv")).unwrap();
    assert!(csv.starts_with("time,p_broken,total_charge,pair_creation_0"));
    assert_eq!(csv.lines().count(), 3);
}
