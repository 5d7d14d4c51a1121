//! Time evolution and measurement inside a sector basis (`ħ = 1`).

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::operators::{plaquette_loop_expr, Model, SparseOperator};

pub const DEFAULT_DENSE_CUTOFF: usize = 4096;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
    pub basis_tag: String,
    norm: f64,
}

fn norm_of(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>, basis: &Basis) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::BasisMismatch {
                expected: format!("{} ({} states)", basis.tag(), basis.len()),
                found: format!("{} amplitudes", amplitudes.len()),
            });
        }
        let norm = norm_of(&amplitudes);
        Ok(Self {
            amplitudes,
            basis_tag: basis.tag().to_string(),
            norm,
        })
    }

    /// `|code⟩`, which must be in `basis`.
    pub fn product(basis: &Basis, code: u64) -> Result<Self> {
        let i = basis.index_of(code).ok_or_else(|| {
            Error::InvalidPlan(format!("state {:?} is not in basis {}", basis.layout().decode(code), basis.tag()))
        })?;
        let mut a = vec![ZERO; basis.len()];
        a[i] = Complex64::new(1.0, 0.0);
        Self::new(a, basis)
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm;
        for a in &mut self.amplitudes {
            *a /= n;
        }
        self.norm = 1.0;
        self
    }

    fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> Self {
        let norm = norm_of(&amplitudes);
        Self {
            amplitudes,
            basis_tag: self.basis_tag.clone(),
            norm,
        }
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }

    /// Weight on a set of basis positions.
    pub fn weight(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.probability(i)).sum()
    }

    pub fn expectation(&self, op: &SparseOperator) -> Complex64 {
        op.expectation(&self.amplitudes)
    }

    pub fn check_basis(&self, basis: &Basis) -> Result<()> {
        if self.basis_tag != basis.tag() || self.dim() != basis.len() {
            return Err(Error::BasisMismatch {
                expected: basis.tag().to_string(),
                found: self.basis_tag.clone(),
            });
        }
        Ok(())
    }
}

/// `1 − Σ_{i∈subspace} |ψ_i|²`.
pub fn leakage(state: &StateVector, subspace: &[usize]) -> f64 {
    (state.norm().powi(2) - state.weight(subspace)).max(0.0)
}

/// Spectral decomposition with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<Complex64>,
}

pub fn eigendecompose(h: &SparseOperator, cutoff: usize) -> Result<Eigensystem> {
    let n = h.dim();
    if n > cutoff {
        return Err(Error::DenseCutoff { dim: n, cutoff });
    }
    let dense = h.to_dense();
    let eig = dense.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let residual = &dense * &vectors - &vectors * DMatrix::from_diagonal(&DVector::from_iterator(n, values.iter().map(|v| Complex64::new(*v, 0.0))));
    let worst = (0..n).map(|k| residual.column(k).norm()).fold(0.0f64, f64::max);
    if worst > 1e-10 * scale {
        return Err(Error::NonConvergence(format!(
            "eigendecomposition residual {worst:e} exceeds 1e-10 relative"
        )));
    }
    Ok(Eigensystem { values, vectors })
}

impl Eigensystem {
    /// `exp(−iHt) ψ`.
    pub fn propagate(&self, state: &StateVector, t: f64) -> StateVector {
        let psi = DVector::from_column_slice(&state.amplitudes);
        let mut c = self.vectors.adjoint() * psi;
        for (k, e) in self.values.iter().enumerate() {
            c[k] *= Complex64::from_polar(1.0, -e * t);
        }
        let out = &self.vectors * c;
        state.with_amplitudes(out.iter().copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EvolutionMethod {
    Exact,
    Krylov {
        #[serde(default = "default_krylov_dim")]
        dim: usize,
        #[serde(default = "default_krylov_tol")]
        tol: f64,
        #[serde(default = "default_max_restarts")]
        max_restarts: usize,
    },
}

fn default_krylov_dim() -> usize {
    30
}
fn default_krylov_tol() -> f64 {
    1e-10
}
fn default_max_restarts() -> usize {
    60
}

impl EvolutionMethod {
    pub fn krylov() -> Self {
        EvolutionMethod::Krylov {
            dim: default_krylov_dim(),
            tol: default_krylov_tol(),
            max_restarts: default_max_restarts(),
        }
    }
}

/// Statistics of one Krylov propagation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KrylovStats {
    pub steps: usize,
    pub rejected: usize,
}

/// `exp(−iHt) ψ` by Lanczos with full reorthogonalization. The step is
/// halved until the local error estimate `β_m |[e^{−iT_m dt} e₁]_m|` falls
/// below `tol`.
pub fn krylov_propagate(
    h: &SparseOperator,
    state: &StateVector,
    t: f64,
    dim: usize,
    tol: f64,
    max_restarts: usize,
) -> Result<(StateVector, KrylovStats)> {
    let n = h.dim();
    let m_max = dim.clamp(1, n.max(1));
    let mut psi = state.amplitudes.clone();
    let mut stats = KrylovStats::default();
    let mut elapsed = 0.0;
    let mut dt = t;
    while (t - elapsed).abs() > 0.0 {
        let remaining = t - elapsed;
        if dt.abs() > remaining.abs() {
            dt = remaining;
        }
        let beta0 = norm_of(&psi);
        if beta0 == 0.0 {
            break;
        }
        // Lanczos basis
        let mut v: Vec<Vec<Complex64>> = vec![psi.iter().map(|z| z / beta0).collect()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut w = vec![ZERO; n];
        let mut breakdown = false;
        for j in 0..m_max {
            h.matvec_into(&v[j], &mut w);
            let a: Complex64 = v[j].iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
            alpha.push(a.re);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for vk in &v {
                    let c: Complex64 = vk.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                    for (wi, xi) in w.iter_mut().zip(vk) {
                        *wi -= c * xi;
                    }
                }
            }
            let b = norm_of(&w);
            beta.push(b);
            if b < 1e-13 * (1.0 + a.norm()) {
                breakdown = true;
                break;
            }
            if j + 1 < m_max {
                v.push(w.iter().map(|z| z / b).collect());
            }
        }
        let m = alpha.len();
        let mut tri = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            tri[(i, i)] = alpha[i];
            if i + 1 < m {
                tri[(i, i + 1)] = beta[i];
                tri[(i + 1, i)] = beta[i];
            }
        }
        let eig = tri.symmetric_eigen();
        let small = |dt: f64| -> DVector<Complex64> {
            let mut out = DVector::<Complex64>::zeros(m);
            for k in 0..m {
                let q0 = eig.eigenvectors[(0, k)];
                let ph = Complex64::from_polar(q0, -eig.eigenvalues[k] * dt);
                for i in 0..m {
                    out[i] += ph * eig.eigenvectors[(i, k)];
                }
            }
            out
        };
        let mut accepted = false;
        let mut attempts = 0;
        while !accepted {
            let y = small(dt);
            let err = if breakdown {
                0.0
            } else {
                beta0 * beta[m - 1] * y[m - 1].norm()
            };
            if err <= tol || m == n {
                let mut next = vec![ZERO; n];
                for (i, vi) in v.iter().enumerate().take(m) {
                    let c = y[i] * beta0;
                    for (o, x) in next.iter_mut().zip(vi) {
                        *o += c * x;
                    }
                }
                psi = next;
                elapsed += dt;
                stats.steps += 1;
                accepted = true;
                if err < tol * 1e-3 {
                    // grow the step again after easy steps
                    dt *= 2.0;
                }
            } else {
                stats.rejected += 1;
                attempts += 1;
                if attempts > max_restarts {
                    return Err(Error::NonConvergence(format!(
                        "krylov step at t={elapsed} did not reach error {tol:e} after {max_restarts} halvings"
                    )));
                }
                dt *= 0.5;
            }
        }
    }
    Ok((state.with_amplitudes(psi), stats))
}

/// `exp(−iHt) ψ`.
pub fn evolve(
    state: &StateVector,
    h: &SparseOperator,
    t: f64,
    method: EvolutionMethod,
    dense_cutoff: usize,
) -> Result<StateVector> {
    if h.dim() != state.dim() {
        return Err(Error::BasisMismatch {
            expected: h.basis_tag().to_string(),
            found: state.basis_tag.clone(),
        });
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    match method {
        EvolutionMethod::Exact => Ok(eigendecompose(h, dense_cutoff)?.propagate(state, t)),
        EvolutionMethod::Krylov {
            dim,
            tol,
            max_restarts,
        } => Ok(krylov_propagate(h, state, t, dim, tol, max_restarts)?.0),
    }
}

/// Reusable propagator: the dense path diagonalizes once.
pub enum Propagator<'a> {
    Dense(Eigensystem),
    Krylov {
        h: &'a SparseOperator,
        dim: usize,
        tol: f64,
        max_restarts: usize,
    },
}

impl<'a> Propagator<'a> {
    pub fn new(h: &'a SparseOperator, method: EvolutionMethod, dense_cutoff: usize) -> Result<Self> {
        Ok(match method {
            EvolutionMethod::Exact => Propagator::Dense(eigendecompose(h, dense_cutoff)?),
            EvolutionMethod::Krylov {
                dim,
                tol,
                max_restarts,
            } => Propagator::Krylov {
                h,
                dim,
                tol,
                max_restarts,
            },
        })
    }

    pub fn propagate(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        if t == 0.0 {
            return Ok(state.clone());
        }
        match self {
            Propagator::Dense(e) => Ok(e.propagate(state, t)),
            Propagator::Krylov {
                h,
                dim,
                tol,
                max_restarts,
            } => Ok(krylov_propagate(h, state, t, *dim, *tol, *max_restarts)?.0),
        }
    }

    /// States at each of the ascending `times`, starting from `state` at 0.
    pub fn trajectory(&self, state: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
        let mut out = Vec::with_capacity(times.len());
        let mut current = state.clone();
        let mut now = 0.0;
        for &t in times {
            current = match self {
                Propagator::Dense(e) => e.propagate(state, t),
                Propagator::Krylov { .. } => self.propagate(&current, t - now)?,
            };
            now = t;
            out.push(current.clone());
        }
        Ok(out)
    }
}

/// Expectation values at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub time: f64,
    pub link_flux: Vec<f64>,
    pub vertex_charge: Vec<f64>,
    pub electric_energy: f64,
    pub plaquette_flux: Vec<f64>,
    pub sector_probabilities: BTreeMap<String, f64>,
}

/// Precomputed observables on a basis.
pub struct Observables {
    frame: Frame,
    mu: f64,
    link_m: Vec<Vec<f64>>,
    charges: Vec<Vec<f64>>,
    plaquettes: Vec<SparseOperator>,
    projectors: Vec<(String, Vec<usize>)>,
}

impl Observables {
    pub fn new(basis: &Basis, frame: Frame, mu: f64) -> Self {
        let layout = *basis.layout();
        let link_m = (0..layout.n_links)
            .map(|li| basis.codes().iter().map(|&c| layout.m(c, li) as f64).collect())
            .collect();
        let charges = (0..layout.n_vertices)
            .map(|v| basis.codes().iter().map(|&c| layout.charge(c, v) as f64).collect())
            .collect();
        let model = Model::for_basis(basis, frame);
        let plaquettes = (0..basis.geometry().plaquettes.len())
            .map(|p| plaquette_loop_expr(&model, p).assemble(basis))
            .collect();
        Self {
            frame,
            mu,
            link_m,
            charges,
            plaquettes,
            projectors: Vec::new(),
        }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Adds a named configuration projector (basis positions).
    pub fn with_projector(mut self, name: &str, indices: Vec<usize>) -> Self {
        self.projectors.push((name.to_string(), indices));
        self
    }

    pub fn measure(&self, state: &StateVector, time: f64) -> ObservableRecord {
        let p: Vec<f64> = state.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        let diag = |values: &Vec<f64>| values.iter().zip(&p).map(|(v, w)| v * w).sum::<f64>();
        let link_flux: Vec<f64> = self.link_m.iter().map(diag).collect();
        let electric_energy = self.mu
            * self
                .link_m
                .iter()
                .map(|ms| ms.iter().zip(&p).map(|(m, w)| m * m * w).sum::<f64>())
                .sum::<f64>();
        ObservableRecord {
            time,
            link_flux,
            vertex_charge: self.charges.iter().map(diag).collect(),
            electric_energy,
            plaquette_flux: self.plaquettes.iter().map(|op| state.expectation(op).re).collect(),
            sector_probabilities: self
                .projectors
                .iter()
                .map(|(name, idx)| (name.clone(), state.weight(idx)))
                .collect(),
        }
    }
}

/// Convenience wrapper building the observables each call.
pub fn measure(state: &StateVector, basis: &Basis, frame: Frame, mu: f64, time: f64) -> ObservableRecord {
    Observables::new(basis, frame, mu).measure(state, time)
}

/// Writes records as CSV with a header row.
pub fn write_records_csv<W: Write>(out: W, records: &[ObservableRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = records.first() {
        let mut header = vec!["time".to_string()];
        header.extend((0..first.link_flux.len()).map(|i| format!("link_flux_{i}")));
        header.extend((0..first.vertex_charge.len()).map(|i| format!("vertex_charge_{i}")));
        header.push("electric_energy".into());
        header.extend((0..first.plaquette_flux.len()).map(|i| format!("plaquette_flux_{i}")));
        header.extend(first.sector_probabilities.keys().map(|k| format!("p_{k}")));
        w.write_record(&header)?;
    }
    for r in records {
        let mut row = vec![r.time.to_string()];
        row.extend(r.link_flux.iter().map(f64::to_string));
        row.extend(r.vertex_charge.iter().map(f64::to_string));
        row.push(r.electric_energy.to_string());
        row.extend(r.plaquette_flux.iter().map(f64::to_string));
        row.extend(r.sector_probabilities.values().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
