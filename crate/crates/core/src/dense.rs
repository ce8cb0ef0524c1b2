//! Dense complex linear algebra on `2^N x 2^N` matrices.
//!
//! Matrix functions go through the Hermitian eigendecomposition; there is no
//! series expansion anywhere.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::CMatrix;

pub const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const ENTROPY_NEG_TOL: f64 = 1e-8;
const IMAG_TOL: f64 = 1e-10;

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn gap(&self) -> f64 {
        match self.eigenvalues.as_slice() {
            [e0, e1, ..] => e1 - e0,
            _ => 0.0,
        }
    }

    /// `V f(E) V†` for a complex-valued spectral function.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &e) in self.eigenvalues.iter().enumerate() {
            let w = f(e);
            for x in scaled.column_mut(k).iter_mut() {
                *x *= w;
            }
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply_fn(Complex64::from)
    }
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for r in 0..n {
        for c in r..n {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

fn ensure_hermitian(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let deviation = hermitian_deviation(m);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

pub fn eig_hermitian(m: &CMatrix) -> Result<SpectralDecomposition> {
    ensure_hermitian(m)?;
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = (m + m.adjoint()) * Complex64::from(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = CMatrix::from_columns(&order.iter().map(|&k| eig.eigenvectors.column(k)).collect::<Vec<_>>());
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// `exp(scale * m)` for Hermitian `m`.
pub fn matrix_exp_hermitian(m: &CMatrix, scale: Complex64) -> Result<CMatrix> {
    Ok(eig_hermitian(m)?.apply_fn(|e| (scale * e).exp()))
}

/// A validated density matrix on `qubit_count` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    qubit_count: usize,
    data: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(data: CMatrix) -> Result<Self> {
        let dim = data.nrows();
        if !dim.is_power_of_two() || !data.is_square() {
            return Err(Error::InvalidState(format!("{}x{} is not a qubit register", data.nrows(), data.ncols())));
        }
        ensure_hermitian(&data).map_err(|e| Error::InvalidState(e.to_string()))?;
        let tr = data.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min = eig_hermitian(&data)?.eigenvalues[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { qubit_count: dim.trailing_zeros() as usize, data })
    }

    /// Wraps a matrix already known to be a state (produced by unitary
    /// conjugation or convex combination of states).
    pub(crate) fn from_trusted(data: CMatrix) -> Self {
        let qubit_count = data.nrows().trailing_zeros() as usize;
        Self { qubit_count, data }
    }

    /// `|b><b|` for a computational-basis index.
    pub fn basis(qubit_count: usize, b: usize) -> Self {
        let dim = 1 << qubit_count;
        let mut data = CMatrix::zeros(dim, dim);
        data[(b, b)] = Complex64::from(1.0);
        Self { qubit_count, data }
    }

    pub fn maximally_mixed(qubit_count: usize) -> Self {
        let dim = 1 << qubit_count;
        Self { qubit_count, data: CMatrix::identity(dim, dim) * Complex64::from(1.0 / dim as f64) }
    }

    /// `|ψ><ψ|` from a normalized state vector.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        Self::from_matrix(psi * psi.adjoint())
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eig_hermitian(&self.data)?.eigenvalues)
    }
}

/// `G m G†` with `G = cos(angle) I - i sin(angle) P` for a unit-coefficient
/// string `P`, written into `out`.
pub(crate) fn conjugate_pauli_exp(m: &CMatrix, p: &PauliString, angle: f64, out: &mut CMatrix) {
    let dim = m.nrows();
    let (s, c) = angle.sin_cos();
    let cc = c * c;
    let ss = s * s;
    let ics = Complex64::new(0.0, c * s);
    let x = p.x_mask();
    let phases: Vec<Complex64> = (0..dim).map(|b| p.phase(b)).collect();
    for col in 0..dim {
        let cx = col ^ x;
        let pc = phases[col];
        for row in 0..dim {
            let rx = row ^ x;
            let pr = phases[rx];
            let v = m[(row, col)] * cc + ics * (m[(row, cx)] * pc - pr * m[(rx, col)]) + pr * m[(rx, cx)] * pc * ss;
            out[(row, col)] = v;
        }
    }
}

/// `Tr[P a b]` for a unit-coefficient string `P`.
pub(crate) fn trace_pauli_product(p: &PauliString, a: &CMatrix, b: &CMatrix) -> Complex64 {
    let dim = a.nrows();
    let x = p.x_mask();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..dim {
        let rx = r ^ x;
        let mut row_dot = Complex64::new(0.0, 0.0);
        for j in 0..dim {
            row_dot += a[(rx, j)] * b[(j, r)];
        }
        acc += p.phase(rx) * row_dot;
    }
    acc
}

/// `Tr[ρ P]` including the string's coefficient.
pub(crate) fn pauli_expectation(state: &DensityMatrix, p: &PauliString) -> Complex64 {
    let x = p.x_mask();
    let m = state.matrix();
    let acc: Complex64 = (0..m.nrows()).map(|b| p.phase(b) * m[(b, b ^ x)]).sum();
    acc * p.coefficient()
}

/// `Tr[a b]` without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

pub fn apply_pauli_exp(state: &DensityMatrix, p: &PauliString, angle: f64) -> Result<DensityMatrix> {
    if p.qubit_count() != state.qubit_count {
        return Err(Error::QubitMismatch { expected: state.qubit_count, got: p.qubit_count() });
    }
    if p.coefficient() != 1.0 {
        return Err(Error::InvalidParams(format!("gate generator must have unit coefficient, got {}", p.coefficient())));
    }
    if !angle.is_finite() {
        return Err(Error::InvalidParams(format!("non-finite gate angle {angle}")));
    }
    let mut out = CMatrix::zeros(state.dim(), state.dim());
    conjugate_pauli_exp(&state.data, p, angle, &mut out);
    Ok(DensityMatrix::from_trusted(out))
}

pub fn expectation(state: &DensityMatrix, obs: &CMatrix) -> Result<f64> {
    if obs.nrows() != state.dim() || obs.ncols() != state.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), got: obs.nrows() });
    }
    let v = trace_product(&state.data, obs);
    if v.im.abs() > IMAG_TOL {
        return Err(Error::ComplexExpectation { imag: v.im });
    }
    Ok(v.re)
}

/// `-Σ p ln p` over a probability vector, `0 ln 0 = 0`.
pub(crate) fn shannon_entropy(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    probabilities.into_iter().filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

/// Von Neumann entropy in nats.
pub fn von_neumann_entropy(state: &DensityMatrix) -> Result<f64> {
    let eig = state.eigenvalues()?;
    if let Some(&bad) = eig.iter().find(|&&e| e < -ENTROPY_NEG_TOL) {
        return Err(Error::InvalidState(format!("eigenvalue {bad:e} below zero")));
    }
    Ok(shannon_entropy(eig.into_iter().map(|e| e.max(0.0))))
}

fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    Ok(eig_hermitian(m)?.apply_fn(|e| Complex64::from(e.max(0.0).sqrt())))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))^2`.
pub fn fidelity_diagnostic(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let sa = psd_sqrt(&a.data)?;
    let inner = &sa * &b.data * &sa;
    let inner = (&inner + inner.adjoint()) * Complex64::from(0.5);
    let root_trace: f64 = eig_hermitian(&inner)?.eigenvalues.iter().map(|e| e.max(0.0).sqrt()).sum();
    Ok(root_trace * root_trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_kitaev_ring, ModelParams};
    use crate::pauli::Pauli;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn pauli(letters: Vec<Pauli>) -> PauliString {
        PauliString::new(letters, 1.0).unwrap()
    }

    fn diag_state(p: &[f64]) -> DensityMatrix {
        DensityMatrix::from_matrix(CMatrix::from_diagonal(&DVector::from_iterator(p.len(), p.iter().map(|&x| c(x))))).unwrap()
    }

    /// A random mixed state `V diag(w) V†` from a seeded generator.
    fn random_state(n: usize, seed: u64) -> DensityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dim = 1 << n;
        let g = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityMatrix::from_matrix(m / tr).unwrap()
    }

    #[test]
    fn eig_pauli_z() {
        let z = Pauli::Z.matrix();
        let d = eig_hermitian(&z).unwrap();
        assert_eq!(d.eigenvalues, vec![-1.0, 1.0]);
    }

    #[test]
    fn eig_two_site_ring() {
        let m = build_kitaev_ring(&ModelParams::new(2, 0.5)).unwrap().dense_matrix().unwrap();
        let d = eig_hermitian(&m).unwrap();
        for (a, b) in d.eigenvalues.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let v = &d.eigenvectors;
        assert!((v.adjoint() * v - CMatrix::identity(4, 4)).camax() < 1e-10);
        assert!((d.reconstruct() - m).camax() < 1e-9);
        assert!(d.gap() >= 0.0);
    }

    #[test]
    fn eig_identity() {
        let d = eig_hermitian(&CMatrix::identity(4, 4)).unwrap();
        assert!(d.eigenvalues.iter().all(|&e| (e - 1.0).abs() < 1e-14));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn exp_identities() {
        let h = build_kitaev_ring(&ModelParams::new(3, 0.4)).unwrap().dense_matrix().unwrap();
        let e0 = matrix_exp_hermitian(&h, c(0.0)).unwrap();
        assert!((e0 - CMatrix::identity(8, 8)).camax() < 1e-12);

        let x = Pauli::X.matrix();
        let u = matrix_exp_hermitian(&x, Complex64::new(0.0, -PI / 2.0)).unwrap();
        assert!((u - &x * Complex64::new(0.0, -1.0)).camax() < 1e-12);

        let z = Pauli::Z.matrix();
        let e = matrix_exp_hermitian(&z, c(-1.0)).unwrap();
        assert!((e[(0, 0)].re - (-1.0f64).exp()).abs() < 1e-12);
        assert!((e[(1, 1)].re - 1.0f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn exp_unitary_inverse() {
        let h = build_kitaev_ring(&ModelParams::new(4, 1.2)).unwrap().dense_matrix().unwrap();
        let tau = 0.73;
        let u = matrix_exp_hermitian(&h, Complex64::new(0.0, -tau)).unwrap();
        let ud = matrix_exp_hermitian(&h, Complex64::new(0.0, tau)).unwrap();
        assert!((&u * &ud - CMatrix::identity(16, 16)).camax() < 1e-9);
        assert!((&u * u.adjoint() - CMatrix::identity(16, 16)).camax() < 1e-9);
    }

    #[test]
    fn pauli_exp_zero_angle() {
        let s = random_state(2, 1);
        let out = apply_pauli_exp(&s, &pauli(vec![Pauli::X, Pauli::Y]), 0.0).unwrap();
        assert!((out.matrix() - s.matrix()).camax() < 1e-15);
    }

    #[test]
    fn pauli_exp_bell_like() {
        let s = DensityMatrix::basis(2, 0);
        let out = apply_pauli_exp(&s, &pauli(vec![Pauli::X, Pauli::X]), PI / 4.0).unwrap();
        let psi = DVector::from_vec(vec![c(1.0), c(0.0), c(0.0), Complex64::new(0.0, -1.0)]) / c(2f64.sqrt());
        let expected = &psi * psi.adjoint();
        assert!((out.matrix() - expected).camax() < 1e-15);
    }

    #[test]
    fn pauli_exp_composes() {
        let s = random_state(3, 2);
        let p = pauli(vec![Pauli::Y, Pauli::Z, Pauli::Y]);
        let two = apply_pauli_exp(&apply_pauli_exp(&s, &p, 0.3).unwrap(), &p, 0.45).unwrap();
        let one = apply_pauli_exp(&s, &p, 0.75).unwrap();
        assert!((two.matrix() - one.matrix()).camax() < 1e-14);
    }

    #[test]
    fn pauli_exp_matches_matrix_exponential() {
        let s = random_state(3, 3);
        let p = pauli(vec![Pauli::X, Pauli::Z, Pauli::Y]);
        let g = matrix_exp_hermitian(&p.to_matrix(), Complex64::new(0.0, -0.61)).unwrap();
        let expected = &g * s.matrix() * g.adjoint();
        let out = apply_pauli_exp(&s, &p, 0.61).unwrap();
        assert!((out.matrix() - expected).camax() < 1e-13);
    }

    #[test]
    fn pauli_exp_rejects_mismatch() {
        let s = DensityMatrix::basis(2, 0);
        assert!(apply_pauli_exp(&s, &pauli(vec![Pauli::X]), 0.1).is_err());
        let weighted = PauliString::new(vec![Pauli::X, Pauli::X], 2.0).unwrap();
        assert!(apply_pauli_exp(&s, &weighted, 0.1).is_err());
    }

    #[test]
    fn expectation_values() {
        let h = build_kitaev_ring(&ModelParams::new(3, 0.8)).unwrap().dense_matrix().unwrap();
        assert!(expectation(&DensityMatrix::maximally_mixed(3), &h).unwrap().abs() < 1e-14);
        let z = Pauli::Z.matrix();
        assert_eq!(expectation(&DensityMatrix::basis(1, 0), &z).unwrap(), 1.0);
        let plus = DVector::from_vec(vec![c(1.0), c(1.0)]) / c(2f64.sqrt());
        assert!(expectation(&DensityMatrix::pure(&plus).unwrap(), &z).unwrap().abs() < 1e-15);
    }

    #[test]
    fn expectation_flags_complex_values() {
        // A non-Hermitian "observable" exposes the imaginary-part check.
        let mut o = CMatrix::zeros(2, 2);
        o[(0, 0)] = Complex64::new(0.0, 1.0);
        assert!(matches!(
            expectation(&DensityMatrix::basis(1, 0), &o),
            Err(Error::ComplexExpectation { .. })
        ));
    }

    #[test]
    fn entropy_values() {
        assert!(von_neumann_entropy(&DensityMatrix::basis(3, 5)).unwrap().abs() < 1e-12);
        let s = von_neumann_entropy(&DensityMatrix::maximally_mixed(3)).unwrap();
        assert!((s - 3.0 * 2f64.ln()).abs() < 1e-12);
        let s = von_neumann_entropy(&diag_state(&[0.25, 0.75])).unwrap();
        assert!((s - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn fidelity_values() {
        let a = DensityMatrix::basis(1, 0);
        assert!((fidelity_diagnostic(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = DensityMatrix::basis(1, 1);
        assert!(fidelity_diagnostic(&a, &b).unwrap().abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(1);
        assert!((fidelity_diagnostic(&mixed, &a).unwrap() - 0.5).abs() < 1e-12);
        let r = random_state(2, 9);
        let f = fidelity_diagnostic(&r, &random_state(2, 10)).unwrap();
        assert!((0.0..=1.0 + 1e-9).contains(&f));
    }

    #[test]
    fn rejects_invalid_states() {
        let mut m = CMatrix::identity(2, 2);
        assert!(DensityMatrix::from_matrix(m.clone()).is_err());
        m[(0, 0)] = c(1.5);
        m[(1, 1)] = c(-0.5);
        assert!(DensityMatrix::from_matrix(m).is_err());
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    fn arb_letters(n: usize) -> impl Strategy<Value = Vec<Pauli>> {
        prop::collection::vec(prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)], n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pauli_exp_preserves_spectrum(n in 1usize..=4, seed in any::<u64>(), angle in -7.0f64..7.0, letters in arb_letters(4)) {
            let s = random_state(n, seed);
            let p = pauli(letters[..n].to_vec());
            let out = apply_pauli_exp(&s, &p, angle).unwrap();
            let before = sorted(s.eigenvalues().unwrap());
            let after = sorted(out.eigenvalues().unwrap());
            for (a, b) in before.iter().zip(&after) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
            prop_assert!(hermitian_deviation(out.matrix()) < 1e-12);
            let ds = von_neumann_entropy(&out).unwrap() - von_neumann_entropy(&s).unwrap();
            prop_assert!(ds.abs() < 1e-10);
        }

        #[test]
        fn expectation_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0, l1 in arb_letters(3), l2 in arb_letters(3)) {
            let s = random_state(3, seed);
            let o1 = pauli(l1).to_matrix();
            let o2 = pauli(l2).to_matrix();
            let combo = &o1 * c(a) + &o2 * c(b);
            let lhs = expectation(&s, &combo).unwrap();
            let rhs = a * expectation(&s, &o1).unwrap() + b * expectation(&s, &o2).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
