//! Free-energy minimization over the product-spectrum ansatz.
//!
//! The circuit-angle gradient is computed with one backward sweep: the state
//! is un-rotated gate by gate while the Hamiltonian is rotated into the
//! Heisenberg frame, and each gate contributes `2 Im Tr[P ρ_k H_k]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{circuit_gates, run_gates, spectrum_entropy, spectrum_entropy_derivative, AnsatzParams, Gate};
use crate::dense::{conjugate_pauli_exp, trace_pauli_product, trace_product};
use crate::error::{Error, Result};
use crate::model::{build_kitaev_ring, HamiltonianTerms, ModelParams};
use crate::optimize::{minimize_bfgs, BfgsConfig, TraceRecord};
use crate::CMatrix;

/// Optimizer settings shared by every solve of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Gradient-norm cutoff.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Random starts for a cold solve.
    pub restarts: usize,
    /// Starts for a warm solve; the first is always the warm point itself.
    pub warm_restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iterations: 2000, restarts: 3, warm_restarts: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Random { seed: u64 },
    WarmStart(AnsatzParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveRequest {
    pub model: ModelParams,
    pub temperature: f64,
    pub blocks_p: usize,
    pub init: Init,
    pub solver: SolverConfig,
    pub record_trace: bool,
}

/// An optimized variational Gibbs state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalSolution {
    pub model: ModelParams,
    pub temperature: f64,
    pub params: AnsatzParams,
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

impl ThermalSolution {
    pub fn blocks_p(&self) -> usize {
        self.params.blocks_p
    }
}

/// `(F, E, S)` of one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergy {
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTemperature(t))
    }
}

/// Precomputed pieces of the objective for one `(model, T, p)`.
pub struct Objective {
    terms: HamiltonianTerms,
    hamiltonian: CMatrix,
    temperature: f64,
    blocks_p: usize,
}

impl Objective {
    pub fn new(terms: HamiltonianTerms, temperature: f64, blocks_p: usize) -> Result<Self> {
        check_temperature(temperature)?;
        if blocks_p == 0 {
            return Err(Error::InvalidParams("blocks_p must be positive".into()));
        }
        let hamiltonian = terms.dense_matrix()?;
        Ok(Self { terms, hamiltonian, temperature, blocks_p })
    }

    pub fn n_params(&self) -> usize {
        self.terms.n_sites() * (2 * self.blocks_p + 1)
    }

    fn unflatten(&self, flat: &[f64]) -> Result<AnsatzParams> {
        AnsatzParams::from_slice(self.terms.n_sites(), self.blocks_p, flat)
    }

    pub fn evaluate(&self, params: &AnsatzParams) -> Result<FreeEnergy> {
        let gates = circuit_gates(params, &self.terms)?;
        let rho = run_gates(crate::ansatz::initial_state(&params.theta).into_matrix(), &gates);
        let energy = trace_product(&rho, &self.hamiltonian).re;
        let entropy = spectrum_entropy(&params.theta);
        Ok(FreeEnergy { free_energy: energy - self.temperature * entropy, energy, entropy })
    }

    /// Value and the gradient in the flat layout of [`AnsatzParams::to_vec`].
    pub fn evaluate_with_gradient(&self, params: &AnsatzParams) -> Result<(FreeEnergy, Vec<f64>)> {
        let gates = circuit_gates(params, &self.terms)?;
        let n = params.n_sites();
        let mut grad = vec![0.0; params.len()];

        let mut rho = run_gates(crate::ansatz::initial_state(&params.theta).into_matrix(), &gates);
        let energy = trace_product(&rho, &self.hamiltonian).re;
        let mut heis = self.hamiltonian.clone();
        let mut scratch = CMatrix::zeros(rho.nrows(), rho.ncols());
        for Gate { generator, angle, param_index } in gates.iter().rev() {
            grad[*param_index] = 2.0 * trace_pauli_product(generator, &rho, &heis).im;
            conjugate_pauli_exp(&rho, generator, -angle, &mut scratch);
            std::mem::swap(&mut rho, &mut scratch);
            conjugate_pauli_exp(&heis, generator, -angle, &mut scratch);
            std::mem::swap(&mut heis, &mut scratch);
        }

        // `heis` is now U† H U; its diagonal weights the product spectrum.
        let diag: Vec<f64> = (0..heis.nrows()).map(|b| heis[(b, b)].re).collect();
        let pairs: Vec<(f64, f64)> = params.theta.iter().map(|t| (t.sin().powi(2), t.cos().powi(2))).collect();
        for (i, g) in grad.iter_mut().enumerate().take(n) {
            let sin2 = (2.0 * params.theta[i]).sin();
            let mut de = 0.0;
            for (b, &h) in diag.iter().enumerate() {
                let mut w = 1.0;
                for (q, &(p0, p1)) in pairs.iter().enumerate() {
                    if q != i {
                        w *= if b >> (n - 1 - q) & 1 == 0 { p0 } else { p1 };
                    }
                }
                let sign = if b >> (n - 1 - i) & 1 == 0 { 1.0 } else { -1.0 };
                de += sign * w * h;
            }
            *g = sin2 * de - self.temperature * spectrum_entropy_derivative(params.theta[i]);
        }

        let entropy = spectrum_entropy(&params.theta);
        let value = FreeEnergy { free_energy: energy - self.temperature * entropy, energy, entropy };
        Ok((value, grad))
    }

    fn minimize(&self, start: &AnsatzParams, solver: &SolverConfig) -> Result<(AnsatzParams, f64, usize, bool, Vec<TraceRecord>)> {
        let cfg = BfgsConfig { grad_tol: solver.tolerance, max_iterations: solver.max_iterations, ..BfgsConfig::default() };
        let f = |x: &[f64]| {
            let p = self.unflatten(x).expect("optimizer preserves dimension");
            match self.evaluate_with_gradient(&p) {
                Ok((v, g)) => (v.free_energy, g),
                Err(_) => (f64::NAN, vec![f64::NAN; x.len()]),
            }
        };
        let m = minimize_bfgs(f, &start.to_vec(), &cfg);
        let converged = m.converged();
        Ok((self.unflatten(&m.x)?, m.grad_norm, m.iterations, converged, m.trace))
    }
}

pub fn free_energy(params: &AnsatzParams, terms: &HamiltonianTerms, temperature: f64) -> Result<FreeEnergy> {
    Objective::new(terms.clone(), temperature, params.blocks_p)?.evaluate(params)
}

/// `∂F/∂ω` in the flat parameter layout.
pub fn gradient(params: &AnsatzParams, terms: &HamiltonianTerms, temperature: f64) -> Result<Vec<f64>> {
    Ok(Objective::new(terms.clone(), temperature, params.blocks_p)?.evaluate_with_gradient(params)?.1)
}

/// Relative free-energy window treated as a tie when choosing among restarts.
pub const SELECTION_SLACK: f64 = 1e-10;

/// Runs BFGS from every requested start and keeps the lowest free energy.
pub fn solve(request: &SolveRequest) -> Result<ThermalSolution> {
    let terms = build_kitaev_ring(&request.model)?;
    let objective = Objective::new(terms, request.temperature, request.blocks_p)?;
    let n = request.model.n_sites;
    let p = request.blocks_p;

    let starts: Vec<AnsatzParams> = match &request.init {
        Init::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..request.solver.restarts.max(1)).map(|_| AnsatzParams::near_mixed(n, p, &mut rng)).collect()
        }
        Init::WarmStart(warm) => {
            if warm.n_sites() != n || warm.blocks_p != p {
                return Err(Error::InvalidParams(format!(
                    "warm start has N={} p={}, request has N={n} p={p}",
                    warm.n_sites(),
                    warm.blocks_p
                )));
            }
            let mut starts = vec![warm.clone()];
            let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_5a17);
            starts.extend((1..request.solver.warm_restarts.max(1)).map(|_| AnsatzParams::near_mixed(n, p, &mut rng)));
            starts
        }
    };

    let mut candidates = Vec::with_capacity(starts.len());
    for start in &starts {
        start.validate()?;
        let (params, grad_norm, iterations, converged, trace) = objective.minimize(start, &request.solver)?;
        let v = objective.evaluate(&params)?;
        let candidate = ThermalSolution {
            model: request.model,
            temperature: request.temperature,
            params,
            free_energy: v.free_energy,
            energy: v.energy,
            entropy: v.entropy,
            grad_norm,
            iterations,
            converged,
            trace: if request.record_trace { trace } else { Vec::new() },
        };
        candidates.push(candidate);
    }
    Ok(pick_best(candidates))
}

/// Lowest free energy wins, except that a converged candidate within
/// round-off of the minimum beats an unconverged one.
fn pick_best(candidates: Vec<ThermalSolution>) -> ThermalSolution {
    let f_min = candidates.iter().map(|c| c.free_energy).fold(f64::INFINITY, f64::min);
    let slack = SELECTION_SLACK * (1.0 + f_min.abs());
    let any_close_converged = candidates.iter().any(|c| c.converged && c.free_energy <= f_min + slack);
    candidates
        .into_iter()
        .filter(|c| !any_close_converged || (c.converged && c.free_energy <= f_min + slack))
        .reduce(|best, c| if c.free_energy < best.free_energy { c } else { best })
        .expect("at least one start")
}

pub fn validate_descending(temperatures: &[f64]) -> Result<()> {
    if temperatures.is_empty() {
        return Err(Error::InvalidGrid("temperature schedule is empty".into()));
    }
    for (k, &t) in temperatures.iter().enumerate() {
        check_temperature(t)?;
        if k > 0 && t >= temperatures[k - 1] {
            return Err(Error::InvalidGrid(format!(
                "temperatures must be strictly descending: T[{}] = {} follows {}",
                k,
                t,
                temperatures[k - 1]
            )));
        }
    }
    Ok(())
}

/// Cold solve at the first (highest) temperature, then each lower temperature
/// warm-started from the solution above it.
pub fn anneal_schedule(
    model: &ModelParams,
    temperatures: &[f64],
    blocks_p: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<Vec<ThermalSolution>> {
    validate_descending(temperatures)?;
    let mut out: Vec<ThermalSolution> = Vec::with_capacity(temperatures.len());
    for &t in temperatures {
        let init = match out.last() {
            None => Init::Random { seed },
            Some(prev) => Init::WarmStart(prev.params.clone()),
        };
        out.push(solve(&SolveRequest {
            model: *model,
            temperature: t,
            blocks_p,
            init,
            solver: *solver,
            record_trace: false,
        })?);
    }
    Ok(out)
}
