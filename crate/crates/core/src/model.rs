//! The periodic Kitaev chain in its spin representation.
//!
//! `H = -J Σ_{i<N} X_i X_{i+1} - J Y_1 P Y_N - λ Σ_i Z_i` with the string
//! operator `P = Z_2 ... Z_{N-1}`. Sites are 1-based in this documentation and
//! in every file format; internally they are 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::CMatrix;

/// Largest system that may be turned into a dense matrix unless overridden.
pub const DEFAULT_DENSE_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_sites: usize,
    pub coupling_j: f64,
    pub field_lambda: f64,
}

impl ModelParams {
    /// Ring with `J = 1`.
    pub fn new(n_sites: usize, field_lambda: f64) -> Self {
        Self { n_sites, coupling_j: 1.0, field_lambda }
    }

    pub fn with_lambda(&self, field_lambda: f64) -> Self {
        Self { field_lambda, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidModel(format!("n_sites must be >= 2, got {}", self.n_sites)));
        }
        if !self.coupling_j.is_finite() || !self.field_lambda.is_finite() {
            return Err(Error::InvalidModel("coupling and field must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }
}

/// Weighted Pauli terms of one Kitaev-ring instance.
///
/// Layout: the `N - 1` XX bonds in ascending site order, then the boundary
/// term, then the `N` field terms.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerms {
    params: ModelParams,
    terms: Vec<PauliString>,
}

impl HamiltonianTerms {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn n_sites(&self) -> usize {
        self.params.n_sites
    }

    /// Bond and boundary terms (`H_2`), unit coefficient, in circuit order.
    pub fn bond_generators(&self) -> Vec<PauliString> {
        let n = self.n_sites();
        self.terms[..n].iter().map(|t| t.with_coefficient(1.0)).collect()
    }

    /// Field terms (`H_1`), unit coefficient, in circuit order.
    pub fn field_generators(&self) -> Vec<PauliString> {
        let n = self.n_sites();
        self.terms[n..].iter().map(|t| t.with_coefficient(1.0)).collect()
    }

    /// Dense matrix with the default cap.
    pub fn dense_matrix(&self) -> Result<CMatrix> {
        self.dense_matrix_capped(DEFAULT_DENSE_CAP)
    }

    pub fn dense_matrix_capped(&self, cap: usize) -> Result<CMatrix> {
        let n = self.n_sites();
        if n > cap {
            return Err(Error::OverDenseCap { n_sites: n, cap });
        }
        Ok(sum_dense(&self.terms, n))
    }
}

/// `Σ_k c_k P_k` for a list of strings on `n` qubits.
pub fn sum_dense(terms: &[PauliString], n: usize) -> CMatrix {
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    for t in terms {
        t.add_to(&mut m, 1.0);
    }
    m
}

pub fn build_kitaev_ring(params: &ModelParams) -> Result<HamiltonianTerms> {
    params.validate()?;
    let n = params.n_sites;
    let j = params.coupling_j;
    let mut terms = Vec::with_capacity(2 * n);
    for i in 0..n - 1 {
        terms.push(PauliString::from_sparse(n, &[(i, Pauli::X), (i + 1, Pauli::X)], -j)?);
    }
    let mut boundary = vec![Pauli::Z; n];
    boundary[0] = Pauli::Y;
    boundary[n - 1] = Pauli::Y;
    terms.push(PauliString::new(boundary, -j)?);
    for i in 0..n {
        terms.push(PauliString::from_sparse(n, &[(i, Pauli::Z)], -params.field_lambda)?);
    }
    Ok(HamiltonianTerms { params: *params, terms })
}

/// `X_i X_j` for 1-based sites; the identity string when `i == j`.
pub fn build_observable_xx(n_sites: usize, i: usize, j: usize) -> Result<PauliString> {
    for idx in [i, j] {
        if idx == 0 || idx > n_sites {
            return Err(Error::SiteOutOfRange { index: idx, n_sites });
        }
    }
    if i == j {
        return PauliString::identity(n_sites);
    }
    PauliString::from_sparse(n_sites, &[(i - 1, Pauli::X), (j - 1, Pauli::X)], 1.0)
}

/// `Σ_i Z_i`, the derivative of `-H` with respect to the field.
pub fn total_z(n_sites: usize) -> Result<CMatrix> {
    let terms = (0..n_sites)
        .map(|i| PauliString::from_sparse(n_sites, &[(i, Pauli::Z)], 1.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(sum_dense(&terms, n_sites))
}
