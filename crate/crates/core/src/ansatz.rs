//! Product-spectrum initial state and the multi-angle HVA circuit.
//!
//! The variational state is `U(α, η) ρ₀(θ) U(α, η)†` with
//! `ρ₀(θ) = ⊗_i [sin²θ_i |0><0| + cos²θ_i |1><1|]` and
//! `U = Π_l e^{-i H₂(η_l)} e^{-i H₁(α_l)}`, where every Hamiltonian term in
//! every block carries its own angle. Within a block the gates are applied in
//! ascending site order, `H₁` (field) gates before `H₂` (bond) gates.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{conjugate_pauli_exp, shannon_entropy, DensityMatrix};
use crate::error::{Error, Result};
use crate::model::HamiltonianTerms;
use crate::pauli::PauliString;
use crate::CMatrix;

/// Full variational parameter set `(θ, α, η)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub theta: Vec<f64>,
    /// `blocks_p` rows of `N` field-gate angles.
    pub alpha: Vec<Vec<f64>>,
    /// `blocks_p` rows of `N` bond-gate angles; the last entry drives the boundary term.
    pub eta: Vec<Vec<f64>>,
    pub blocks_p: usize,
}

impl AnsatzParams {
    pub fn zeros(n_sites: usize, blocks_p: usize) -> Self {
        Self {
            theta: vec![0.0; n_sites],
            alpha: vec![vec![0.0; n_sites]; blocks_p],
            eta: vec![vec![0.0; n_sites]; blocks_p],
            blocks_p,
        }
    }

    /// Seeding used at the highest temperature: `θ ≈ π/4`, small circuit angles.
    pub fn near_mixed<R: Rng + ?Sized>(n_sites: usize, blocks_p: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(n_sites, blocks_p);
        for t in &mut p.theta {
            *t = std::f64::consts::FRAC_PI_4 + rng.gen_range(-0.005..0.005);
        }
        for row in p.alpha.iter_mut().chain(p.eta.iter_mut()) {
            for a in row.iter_mut() {
                *a = rng.gen_range(-0.1..0.1);
            }
        }
        p
    }

    pub fn n_sites(&self) -> usize {
        self.theta.len()
    }

    pub fn len(&self) -> usize {
        self.n_sites() * (2 * self.blocks_p + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites();
        if n == 0 || self.blocks_p == 0 {
            return Err(Error::InvalidParams("need at least one site and one block".into()));
        }
        if self.alpha.len() != self.blocks_p || self.eta.len() != self.blocks_p {
            return Err(Error::InvalidParams(format!(
                "expected {} circuit blocks, got alpha={} eta={}",
                self.blocks_p,
                self.alpha.len(),
                self.eta.len()
            )));
        }
        if let Some(bad) = self.alpha.iter().chain(&self.eta).find(|r| r.len() != n) {
            return Err(Error::InvalidParams(format!("circuit row of length {} for {n} sites", bad.len())));
        }
        if !self.to_vec().iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParams("non-finite angle".into()));
        }
        Ok(())
    }

    /// Flat layout: `θ`, then for each block `α_l` followed by `η_l`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.theta.clone();
        for (a, e) in self.alpha.iter().zip(&self.eta) {
            v.extend_from_slice(a);
            v.extend_from_slice(e);
        }
        v
    }

    pub fn from_slice(n_sites: usize, blocks_p: usize, flat: &[f64]) -> Result<Self> {
        let expected = n_sites * (2 * blocks_p + 1);
        if flat.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: flat.len() });
        }
        let theta = flat[..n_sites].to_vec();
        let mut alpha = Vec::with_capacity(blocks_p);
        let mut eta = Vec::with_capacity(blocks_p);
        for block in flat[n_sites..].chunks(2 * n_sites) {
            alpha.push(block[..n_sites].to_vec());
            eta.push(block[n_sites..].to_vec());
        }
        Ok(Self { theta, alpha, eta, blocks_p })
    }

    /// Flat index of `α_{l,i}` (0-based block and site).
    pub fn alpha_index(&self, block: usize, site: usize) -> usize {
        self.n_sites() * (1 + 2 * block) + site
    }

    pub fn eta_index(&self, block: usize, site: usize) -> usize {
        self.n_sites() * (2 + 2 * block) + site
    }
}

/// One gate `e^{-i angle P}` of the circuit, tagged with its flat parameter index.
#[derive(Debug, Clone)]
pub(crate) struct Gate {
    pub generator: PauliString,
    pub angle: f64,
    pub param_index: usize,
}

pub(crate) fn circuit_gates(params: &AnsatzParams, terms: &HamiltonianTerms) -> Result<Vec<Gate>> {
    params.validate()?;
    let n = params.n_sites();
    if n != terms.n_sites() {
        return Err(Error::QubitMismatch { expected: terms.n_sites(), got: n });
    }
    let fields = terms.field_generators();
    let bonds = terms.bond_generators();
    let mut gates = Vec::with_capacity(2 * n * params.blocks_p);
    for l in 0..params.blocks_p {
        for (i, g) in fields.iter().enumerate() {
            gates.push(Gate { generator: g.clone(), angle: params.alpha[l][i], param_index: params.alpha_index(l, i) });
        }
        for (i, g) in bonds.iter().enumerate() {
            gates.push(Gate { generator: g.clone(), angle: params.eta[l][i], param_index: params.eta_index(l, i) });
        }
    }
    Ok(gates)
}

/// Diagonal of `ρ₀(θ)` in the computational basis.
pub(crate) fn spectrum_weights(theta: &[f64]) -> Vec<f64> {
    let n = theta.len();
    let pairs: Vec<(f64, f64)> = theta
        .iter()
        .map(|t| {
            let s = t.sin();
            let c = t.cos();
            (s * s, c * c)
        })
        .collect();
    (0..1usize << n)
        .map(|b| {
            pairs
                .iter()
                .enumerate()
                .map(|(q, &(p0, p1))| if b >> (n - 1 - q) & 1 == 0 { p0 } else { p1 })
                .product()
        })
        .collect()
}

pub fn initial_state(theta: &[f64]) -> DensityMatrix {
    let w = spectrum_weights(theta);
    let dim = w.len();
    let mut m = CMatrix::zeros(dim, dim);
    for (k, &p) in w.iter().enumerate() {
        m[(k, k)] = Complex64::from(p);
    }
    DensityMatrix::from_trusted(m)
}

fn qubit_entropy(theta: f64) -> f64 {
    let s = theta.sin();
    let c = theta.cos();
    shannon_entropy([s * s, c * c])
}

/// Closed-form entropy of `ρ₀(θ)` in nats; the circuit leaves it unchanged.
pub fn spectrum_entropy(theta: &[f64]) -> f64 {
    theta.iter().map(|&t| qubit_entropy(t)).sum()
}

/// `dS/dθ = sin(2θ) ln(cot²θ)`, with the removable singularities at
/// multiples of `π/2` set to their limit 0.
pub fn spectrum_entropy_derivative(theta: f64) -> f64 {
    let s = theta.sin();
    let c = theta.cos();
    let s2 = s * s;
    let c2 = c * c;
    if s2 == 0.0 || c2 == 0.0 {
        return 0.0;
    }
    (2.0 * s * c) * (c2.ln() - s2.ln())
}

pub(crate) fn run_gates(state: CMatrix, gates: &[Gate]) -> CMatrix {
    let mut cur = state;
    let mut next = CMatrix::zeros(cur.nrows(), cur.ncols());
    for g in gates {
        conjugate_pauli_exp(&cur, &g.generator, g.angle, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Conjugates `state` by `U(α, η)`.
pub fn apply_circuit(state: &DensityMatrix, params: &AnsatzParams, terms: &HamiltonianTerms) -> Result<DensityMatrix> {
    if state.qubit_count() != terms.n_sites() {
        return Err(Error::QubitMismatch { expected: terms.n_sites(), got: state.qubit_count() });
    }
    let gates = circuit_gates(params, terms)?;
    Ok(DensityMatrix::from_trusted(run_gates(state.matrix().clone(), &gates)))
}

pub fn variational_state(params: &AnsatzParams, terms: &HamiltonianTerms) -> Result<DensityMatrix> {
    apply_circuit(&initial_state(&params.theta), params, terms)
}
