//! Signed tensor products of single-qubit Pauli operators.
//!
//! Qubit `q` (0-based) is the `q`-th tensor factor from the left, which is bit
//! `n - 1 - q` of a computational-basis index. Conventions: `Z|0> = |0>`,
//! `X|0> = |1>`, `Y = iXZ`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let entries = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        CMatrix::from_row_slice(2, 2, &entries)
    }

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    fn has_z(self) -> bool {
        matches!(self, Pauli::Y | Pauli::Z)
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// A weighted Pauli string `coefficient * P_0 ⊗ P_1 ⊗ ... ⊗ P_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    letters: Vec<Pauli>,
    coefficient: f64,
    x_mask: usize,
    z_mask: usize,
    y_count: u32,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, coefficient: f64) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidModel("Pauli string needs at least one qubit".into()));
        }
        if letters.len() > usize::BITS as usize - 1 {
            return Err(Error::InvalidModel(format!("{} qubits is too many", letters.len())));
        }
        let n = letters.len();
        let mut x_mask = 0usize;
        let mut z_mask = 0usize;
        let mut y_count = 0u32;
        for (q, &p) in letters.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            if p.flips() {
                x_mask |= bit;
            }
            if p.has_z() {
                z_mask |= bit;
            }
            if p == Pauli::Y {
                y_count += 1;
            }
        }
        Ok(Self { letters, coefficient, x_mask, z_mask, y_count })
    }

    pub fn identity(qubit_count: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; qubit_count], 1.0)
    }

    /// Builds a string from sparse `(qubit, letter)` placements; every other qubit is `I`.
    pub fn from_sparse(qubit_count: usize, placements: &[(usize, Pauli)], coefficient: f64) -> Result<Self> {
        let mut letters = vec![Pauli::I; qubit_count];
        for &(q, p) in placements {
            if q >= qubit_count {
                return Err(Error::SiteOutOfRange { index: q + 1, n_sites: qubit_count });
            }
            letters[q] = p;
        }
        Self::new(letters, coefficient)
    }

    pub fn qubit_count(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn with_coefficient(&self, coefficient: f64) -> Self {
        Self { coefficient, ..self.clone() }
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    pub fn dim(&self) -> usize {
        1 << self.letters.len()
    }

    pub(crate) fn x_mask(&self) -> usize {
        self.x_mask
    }

    /// Phase picked up by the unweighted string acting on basis state `b`:
    /// `P|b> = phase(b) |b ^ x_mask>`.
    #[inline]
    pub(crate) fn phase(&self, b: usize) -> Complex64 {
        let sign = if (b & self.z_mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        match self.y_count % 4 {
            0 => Complex64::new(sign, 0.0),
            1 => Complex64::new(0.0, sign),
            2 => Complex64::new(-sign, 0.0),
            _ => Complex64::new(0.0, -sign),
        }
    }

    /// Two strings commute iff their symplectic product is even.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = (self.x_mask & other.z_mask).count_ones() + (self.z_mask & other.x_mask).count_ones();
        anti.is_multiple_of(2)
    }

    /// Dense `2^n x 2^n` matrix including the coefficient.
    pub fn to_matrix(&self) -> CMatrix {
        let dim = self.dim();
        let mut m = CMatrix::zeros(dim, dim);
        self.add_to(&mut m, 1.0);
        m
    }

    /// Adds `scale * coefficient * P` into `m`.
    pub(crate) fn add_to(&self, m: &mut CMatrix, scale: f64) {
        let w = self.coefficient * scale;
        for b in 0..self.dim() {
            m[(b ^ self.x_mask, b)] += self.phase(b) * w;
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}·", self.coefficient)?;
        for p in &self.letters {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron_all(letters: &[Pauli]) -> CMatrix {
        letters
            .iter()
            .map(|p| p.matrix())
            .reduce(|a, b| a.kronecker(&b))
            .unwrap()
    }

    #[test]
    fn matches_kronecker_product() {
        use Pauli::*;
        let cases = [vec![X, Y, Z], vec![Y, I, Y], vec![Z, Z, X, Y], vec![Y, Y, Y]];
        for letters in cases {
            let s = PauliString::new(letters.clone(), 1.0).unwrap();
            let diff = (s.to_matrix() - kron_all(&letters)).camax();
            assert!(diff < 1e-15, "{s}: {diff}");
        }
    }

    #[test]
    fn single_z_is_diagonal() {
        let z = PauliString::new(vec![Pauli::Z], 1.0).unwrap();
        let m = z.to_matrix();
        assert_eq!(m[(0, 0)].re, 1.0);
        assert_eq!(m[(1, 1)].re, -1.0);
        assert_eq!(m[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn hermitian_unitary_traceless() {
        use Pauli::*;
        let s = PauliString::new(vec![Y, Z, X, I], 1.0).unwrap();
        let m = s.to_matrix();
        let id = CMatrix::identity(16, 16);
        assert!((m.adjoint() - &m).camax() < 1e-15);
        assert!((&m * m.adjoint() - id).camax() < 1e-15);
        assert!(m.trace().norm() < 1e-15);
    }

    #[test]
    fn commutation_rule() {
        use Pauli::*;
        let xx = PauliString::new(vec![X, X], 1.0).unwrap();
        let yy = PauliString::new(vec![Y, Y], 1.0).unwrap();
        let zi = PauliString::new(vec![Z, I], 1.0).unwrap();
        assert!(xx.commutes_with(&yy));
        assert!(!xx.commutes_with(&zi));
    }
}
