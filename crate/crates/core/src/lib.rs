//! Variational Gibbs-state preparation for the periodic Kitaev chain.
//!
//! The crate builds the spin Hamiltonian of the Kitaev ring, prepares thermal
//! states with a product-spectrum ansatz followed by a multi-angle Hamiltonian
//! variational circuit, and measures susceptibility crossover lines,
//! correlation lengths and phase-coherence times. Every variational quantity
//! has an exact-diagonalization counterpart in [`oracle`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod checkpoint;
pub mod config;
pub mod dense;
pub mod error;
pub mod model;
pub mod observables;
pub mod optimize;
pub mod oracle;
pub mod pauli;
pub mod runner;
pub mod vqa;

pub use error::{Error, FitError, Result};

/// Dense complex matrix used for Hamiltonians, observables and states.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
