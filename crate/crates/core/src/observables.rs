//! Susceptibility, crossover lines, correlation functions and exponential fits.
//!
//! Everything here takes a density matrix, so the same code measures
//! variational and exact thermal states.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{eig_hermitian, pauli_expectation, trace_product, DensityMatrix, SpectralDecomposition};
use crate::error::{Error, FitError, Result};
use crate::model::{build_kitaev_ring, build_observable_xx, ModelParams};
use crate::oracle::check_crossover_grid;
use crate::pauli::{Pauli, PauliString};
use crate::vqa::{solve, validate_descending, Init, SolveRequest, SolverConfig, ThermalSolution};
use crate::CMatrix;

/// C(t) magnitudes below this are dropped before log-domain fitting.
pub const MIN_FIT_MAGNITUDE: f64 = 1e-12;
/// Minimum number of monotone samples for a coherence-time fit.
pub const MIN_WINDOW: usize = 4;

/// Signed susceptibility pair at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityValue {
    /// `-∂²F/∂λ²`, positive and peaked.
    pub chi: f64,
    /// The raw second difference `∂²F/∂λ²`.
    pub second_difference: f64,
}

/// `[F(λ+δ) + F(λ-δ) - 2F(λ)] / δ²`.
pub fn second_difference(f_minus: f64, f_center: f64, f_plus: f64, delta: f64) -> f64 {
    (f_plus + f_minus - 2.0 * f_center) / (delta * delta)
}

/// Susceptibility from three converged solutions at `λ-δ, λ, λ+δ`.
pub fn susceptibility(
    minus: &ThermalSolution,
    center: &ThermalSolution,
    plus: &ThermalSolution,
    delta_lambda: f64,
) -> Result<SusceptibilityValue> {
    if !(delta_lambda > 0.0 && delta_lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("delta_lambda must be positive, got {delta_lambda}")));
    }
    for s in [minus, center, plus] {
        if !s.converged {
            return Err(Error::Unconverged { lambda: s.model.field_lambda });
        }
    }
    for s in [minus, plus] {
        if s.model.n_sites != center.model.n_sites
            || s.model.coupling_j != center.model.coupling_j
            || s.temperature != center.temperature
            || s.blocks_p() != center.blocks_p()
        {
            return Err(Error::InconsistentTriple("solutions differ in N, J, T or p".into()));
        }
    }
    let l = center.model.field_lambda;
    let tol = 1e-9 * (1.0 + l.abs());
    if (minus.model.field_lambda - (l - delta_lambda)).abs() > tol || (plus.model.field_lambda - (l + delta_lambda)).abs() > tol {
        return Err(Error::InconsistentTriple(format!(
            "expected fields {} and {}, got {} and {}",
            l - delta_lambda,
            l + delta_lambda,
            minus.model.field_lambda,
            plus.model.field_lambda
        )));
    }
    let d2 = second_difference(minus.free_energy, center.free_energy, plus.free_energy, delta_lambda);
    Ok(SusceptibilityValue { chi: -d2, second_difference: d2 })
}

/// Location of the susceptibility maximum on a temperature grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Parabolic refinement through the grid maximum and its neighbours.
    pub t_star: f64,
    pub grid_temperature: f64,
    pub grid_chi: f64,
    /// The maximum sits at a grid endpoint (no refinement applied).
    pub boundary: bool,
}

/// Argmax of `(T, χ)` samples plus a three-point parabolic refinement.
pub fn locate_peak(curve: &[(f64, f64)]) -> Peak {
    let mut pts = curve.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut k = 0;
    for (i, p) in pts.iter().enumerate() {
        if p.1 > pts[k].1 {
            k = i;
        }
    }
    let (t, chi) = pts[k];
    if k == 0 || k + 1 == pts.len() {
        return Peak { t_star: t, grid_temperature: t, grid_chi: chi, boundary: true };
    }
    let (x0, y0) = pts[k - 1];
    let (x2, y2) = pts[k + 1];
    let (x1, y1) = (t, chi);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    let vertex = -b / (2.0 * a);
    let t_star = if a < 0.0 && vertex.is_finite() { vertex.clamp(x0, x2) } else { x1 };
    Peak { t_star, grid_temperature: t, grid_chi: chi, boundary: false }
}

/// Source of previously optimized solutions, used to resume sweeps.
pub trait SolutionCache: Sync {
    fn lookup(&self, lambda: f64, temperature: f64) -> Option<ThermalSolution>;
}

/// No cached solutions.
pub struct NoCache;

impl SolutionCache for NoCache {
    fn lookup(&self, _: f64, _: f64) -> Option<ThermalSolution> {
        None
    }
}

/// Per-chain seed, independent of grid ordering and scheduling.
pub fn chain_seed(seed: u64, lambda: f64) -> u64 {
    let mut z = seed ^ lambda.to_bits().rotate_left(17) ^ 0x9e37_79b9_7f4a_7c15;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub blocks_p: usize,
    pub delta_lambda: f64,
    pub seed: u64,
    pub solver: SolverConfig,
}

/// The three solutions behind one susceptibility sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverCell {
    pub temperature: f64,
    pub minus: ThermalSolution,
    pub center: ThermalSolution,
    pub plus: ThermalSolution,
    pub chi: std::result::Result<SusceptibilityValue, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverLine {
    pub lambda: f64,
    /// In the (descending) order of the temperature grid.
    pub cells: Vec<CrossoverCell>,
    /// `None` when no temperature produced a usable susceptibility.
    pub peak: Option<Peak>,
}

impl CrossoverLine {
    pub fn chi_curve(&self) -> Vec<(f64, f64)> {
        self.cells.iter().filter_map(|c| c.chi.as_ref().ok().map(|v| (c.temperature, v.chi))).collect()
    }
}

fn cached_or_solve(
    cache: &dyn SolutionCache,
    model: ModelParams,
    temperature: f64,
    init: Init,
    settings: &ScanSettings,
) -> Result<ThermalSolution> {
    if let Some(s) = cache.lookup(model.field_lambda, temperature) {
        if s.converged && s.blocks_p() == settings.blocks_p && s.model.n_sites == model.n_sites {
            return Ok(s);
        }
    }
    solve(&SolveRequest { model, temperature, blocks_p: settings.blocks_p, init, solver: settings.solver, record_trace: false })
}

fn scan_chain(model: &ModelParams, temperatures: &[f64], settings: &ScanSettings, cache: &dyn SolutionCache) -> Result<CrossoverLine> {
    let lambda = model.field_lambda;
    let delta = settings.delta_lambda;
    let mut cells: Vec<CrossoverCell> = Vec::with_capacity(temperatures.len());
    for &t in temperatures {
        let init = match cells.last() {
            None => Init::Random { seed: chain_seed(settings.seed, lambda) },
            Some(prev) => Init::WarmStart(prev.center.params.clone()),
        };
        let center = cached_or_solve(cache, *model, t, init, settings)?;
        let warm = Init::WarmStart(center.params.clone());
        let minus = cached_or_solve(cache, model.with_lambda(lambda - delta), t, warm.clone(), settings)?;
        let plus = cached_or_solve(cache, model.with_lambda(lambda + delta), t, warm, settings)?;
        let chi = susceptibility(&minus, &center, &plus, delta).map_err(|e| e.to_string());
        cells.push(CrossoverCell { temperature: t, minus, center, plus, chi });
    }
    let mut line = CrossoverLine { lambda, cells, peak: None };
    let curve = line.chi_curve();
    if !curve.is_empty() {
        line.peak = Some(locate_peak(&curve));
    }
    Ok(line)
}

/// Variational crossover line: for each `λ` anneal down the temperature grid,
/// solving the `(λ-δ, λ, λ+δ)` triple at every temperature. The offset solves
/// start from the center solution at the same temperature.
pub fn crossover_scan(
    model: &ModelParams,
    lambda_grid: &[f64],
    temperature_grid: &[f64],
    settings: &ScanSettings,
    cache: &dyn SolutionCache,
) -> Result<Vec<CrossoverLine>> {
    validate_descending(temperature_grid)?;
    check_crossover_grid(model, temperature_grid)?;
    if lambda_grid.is_empty() {
        return Err(Error::InvalidGrid("lambda grid is empty".into()));
    }
    if !(settings.delta_lambda > 0.0) {
        return Err(Error::InvalidParams("delta_lambda must be positive".into()));
    }
    lambda_grid
        .par_iter()
        .map(|&l| scan_chain(&model.with_lambda(l), temperature_grid, settings, cache))
        .collect()
}

/// `R(n) = Σ_i Tr[ρ X_i X_{i+n}]` with periodic wrap.
pub fn static_correlation(state: &DensityMatrix, n: usize) -> Result<f64> {
    let sites = state.qubit_count();
    if n >= sites {
        return Err(Error::SiteOutOfRange { index: n, n_sites: sites });
    }
    let mut total = 0.0;
    for i in 1..=sites {
        let j = (i + n - 1) % sites + 1;
        let obs = build_observable_xx(sites, i, j)?;
        total += pauli_expectation(state, &obs).re;
    }
    Ok(total)
}

/// Exact propagator `e^{-iHt}` through the Hamiltonian's eigenbasis.
#[derive(Debug, Clone)]
pub struct TimeEvolution {
    spectral: SpectralDecomposition,
    n_sites: usize,
}

impl TimeEvolution {
    pub fn from_model(model: &ModelParams) -> Result<Self> {
        let h = build_kitaev_ring(model)?.dense_matrix()?;
        Ok(Self::from_spectral(eig_hermitian(&h)?))
    }

    pub fn from_spectral(spectral: SpectralDecomposition) -> Self {
        let n_sites = spectral.dim().trailing_zeros() as usize;
        Self { spectral, n_sites }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        self.spectral.apply_fn(|e| Complex64::new(0.0, -e * t).exp())
    }

    fn check(&self, state: &DensityMatrix, site: usize, t: f64) -> Result<()> {
        if state.qubit_count() != self.n_sites {
            return Err(Error::QubitMismatch { expected: self.n_sites, got: state.qubit_count() });
        }
        if site == 0 || site > self.n_sites {
            return Err(Error::SiteOutOfRange { index: site, n_sites: self.n_sites });
        }
        if !t.is_finite() {
            return Err(Error::InvalidParams(format!("non-finite time {t}")));
        }
        Ok(())
    }
}

fn site_x(n_sites: usize, site: usize) -> Result<PauliString> {
    PauliString::from_sparse(n_sites, &[(site - 1, Pauli::X)], 1.0)
}

fn correlator_with(state: &DensityMatrix, u: &CMatrix, x: &CMatrix) -> Complex64 {
    // Tr[ρ U† X U X]
    let heis = u.adjoint() * x * u;
    trace_product(state.matrix(), &(heis * x))
}

/// `Tr[ρ X_i(t) X_i]` with `X_i(t) = e^{iHt} X_i e^{-iHt}`; `site` is 1-based.
pub fn dynamical_correlation_direct(state: &DensityMatrix, evolution: &TimeEvolution, site: usize, t: f64) -> Result<Complex64> {
    evolution.check(state, site, t)?;
    let x = site_x(evolution.n_sites, site)?.to_matrix();
    Ok(correlator_with(state, &evolution.unitary(t), &x))
}

/// Reduced ancilla state of the Hadamard-test circuit just before readout.
///
/// Register layout: the ancilla is qubit 0 (leftmost factor), prepared in
/// `|0>`. Sequence: Hadamard on the ancilla, controlled-`X_i`, `e^{-iHt}` on
/// the system, controlled-`X_i`, `e^{iHt}` on the system. The `|1>` branch
/// thereby carries `e^{iHt} X_i e^{-iHt} X_i`.
pub fn hadamard_test_ancilla(state: &DensityMatrix, evolution: &TimeEvolution, site: usize, t: f64) -> Result<CMatrix> {
    evolution.check(state, site, t)?;
    let n = evolution.n_sites;
    let d = 1usize << n;
    let one = Complex64::from(1.0);
    let zero = CMatrix::zeros(2, 2);
    let p0 = CMatrix::from_row_slice(2, 2, &[one, 0.0.into(), 0.0.into(), 0.0.into()]);
    let p1 = CMatrix::from_row_slice(2, 2, &[0.0.into(), 0.0.into(), 0.0.into(), one]);
    let id_sys = CMatrix::identity(d, d);

    let hadamard = Pauli::X.matrix() + Pauli::Z.matrix();
    let hadamard = hadamard * Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
    let h_anc = hadamard.kronecker(&id_sys);
    let x = site_x(n, site)?.to_matrix();
    let cx = p0.kronecker(&id_sys) + p1.kronecker(&x);
    let u = evolution.unitary(t);
    let evolve = CMatrix::identity(2, 2).kronecker(&u);
    let unevolve = CMatrix::identity(2, 2).kronecker(&u.adjoint());

    let mut full = p0.kronecker(state.matrix()) + zero.kronecker(&id_sys);
    for gate in [&h_anc, &cx, &evolve, &cx, &unevolve] {
        full = gate * &full * gate.adjoint();
    }

    let mut reduced = CMatrix::zeros(2, 2);
    for a in 0..2 {
        for b in 0..2 {
            reduced[(a, b)] = (0..d).map(|s| full[(a * d + s, b * d + s)]).sum();
        }
    }
    Ok(reduced)
}

/// `<σ^x + iσ^y>` on the ancilla of the Hadamard-test circuit.
pub fn dynamical_correlation_hadamard(state: &DensityMatrix, evolution: &TimeEvolution, site: usize, t: f64) -> Result<Complex64> {
    let reduced = hadamard_test_ancilla(state, evolution, site, t)?;
    let sx = trace_product(&reduced, &Pauli::X.matrix());
    let sy = trace_product(&reduced, &Pauli::Y.matrix());
    Ok(sx + Complex64::i() * sy)
}

/// Per-site `Tr[ρ X_i(t) X_i]` for all sites, sharing one propagator.
pub fn site_correlations(state: &DensityMatrix, evolution: &TimeEvolution, t: f64) -> Result<Vec<Complex64>> {
    evolution.check(state, 1, t)?;
    let u = evolution.unitary(t);
    (1..=evolution.n_sites)
        .map(|i| Ok(correlator_with(state, &u, &site_x(evolution.n_sites, i)?.to_matrix())))
        .collect()
}

/// `C(t) = Σ_i |Tr[ρ X_i(t) X_i]|`.
pub fn aggregate_c(state: &DensityMatrix, evolution: &TimeEvolution, t: f64) -> Result<f64> {
    Ok(site_correlations(state, evolution, t)?.iter().map(|c| c.norm()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Spatial,
    Temporal,
}

impl CorrelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationKind::Spatial => "spatial",
            CorrelationKind::Temporal => "temporal",
        }
    }
}

/// `y ≈ amplitude · exp(-x / length_scale)` fitted in the log domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFit {
    pub kind: CorrelationKind,
    pub abscissae: Vec<f64>,
    pub ordinates: Vec<f64>,
    pub amplitude: f64,
    /// `ξ` or `τ`; infinite for a flat (degenerate) fit.
    pub length_scale: f64,
    /// RMS residual of `ln y`.
    pub residual: f64,
    pub degenerate: bool,
}

impl CorrelationFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.amplitude * (-x / self.length_scale).exp()
    }
}

pub fn fit_exponential(kind: CorrelationKind, points: &[(f64, f64)]) -> std::result::Result<CorrelationFit, FitError> {
    if points.len() < 2 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if let Some(&(abscissa, value)) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(FitError::NonPositive { abscissa, value });
    }
    let k = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_l = points.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::DegenerateAbscissae);
    }
    let sxl: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1.ln() - mean_l)).sum();
    let slope = sxl / sxx;
    let intercept = mean_l - slope * mean_x;
    let degenerate = slope.abs() < 1e-12;
    if !degenerate && slope > 0.0 {
        return Err(FitError::NotDecaying { slope });
    }
    let residual = (points.iter().map(|p| (p.1.ln() - intercept - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    Ok(CorrelationFit {
        kind,
        abscissae: points.iter().map(|p| p.0).collect(),
        ordinates: points.iter().map(|p| p.1).collect(),
        amplitude: intercept.exp(),
        length_scale: if degenerate { f64::INFINITY } else { -1.0 / slope },
        residual,
        degenerate,
    })
}

/// Length of the longest strictly decreasing prefix.
pub fn monotone_prefix(values: &[f64]) -> usize {
    if values.is_empty() {
        return 0;
    }
    let mut k = 1;
    while k < values.len() && values[k] < values[k - 1] {
        k += 1;
    }
    k
}

/// Truncates `(t, C)` samples to their strictly decreasing prefix.
pub fn truncate_window(samples: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let len = monotone_prefix(&values);
    if len < MIN_WINDOW {
        return Err(Error::WindowTooShort { len, min: MIN_WINDOW });
    }
    Ok(samples[..len].to_vec())
}

fn check_time_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.first().is_none_or(|&t| !(t > 0.0)) {
        return Err(Error::InvalidGrid("time grid must start at a positive time".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("time grid must be strictly ascending".into()));
    }
    Ok(())
}

/// `C(t)` on the longest prefix of `t_grid` where it strictly decreases.
pub fn fit_window_c(state: &DensityMatrix, evolution: &TimeEvolution, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_time_grid(t_grid)?;
    let samples = t_grid
        .iter()
        .map(|&t| aggregate_c(state, evolution, t).map(|c| (t, c)))
        .collect::<Result<Vec<_>>>()?;
    truncate_window(&samples)
}

/// 30 points from 0.1 to 3.0.
pub fn default_time_grid() -> Vec<f64> {
    (1..=30).map(|k| k as f64 / 10.0).collect()
}

/// `1..=⌊N/2⌋`.
pub fn default_spacings(n_sites: usize) -> Vec<usize> {
    (1..=n_sites / 2).collect()
}

/// All correlation data and fits measured on one state.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSet {
    /// `(n, R(n))`.
    pub static_values: Vec<(usize, f64)>,
    /// `(t, C(t))` over the full time grid.
    pub dynamic_values: Vec<(f64, f64)>,
    pub xi_fit: std::result::Result<CorrelationFit, String>,
    pub tau_fit: std::result::Result<CorrelationFit, String>,
}

pub fn measure_correlations(
    state: &DensityMatrix,
    evolution: &TimeEvolution,
    spacings: &[usize],
    t_grid: &[f64],
) -> Result<CorrelationSet> {
    check_time_grid(t_grid)?;
    let static_values = spacings
        .iter()
        .map(|&n| static_correlation(state, n).map(|r| (n, r)))
        .collect::<Result<Vec<_>>>()?;
    let dynamic_values = t_grid
        .iter()
        .map(|&t| aggregate_c(state, evolution, t).map(|c| (t, c)))
        .collect::<Result<Vec<_>>>()?;

    let r_points: Vec<(f64, f64)> = static_values.iter().map(|&(n, r)| (n as f64, r)).collect();
    let xi_fit = fit_exponential(CorrelationKind::Spatial, &r_points).map_err(|e| e.to_string());
    let tau_fit = truncate_window(&dynamic_values).map_err(|e| e.to_string()).and_then(|window| {
        let usable: Vec<(f64, f64)> = window.into_iter().filter(|p| p.1.abs() >= MIN_FIT_MAGNITUDE).collect();
        fit_exponential(CorrelationKind::Temporal, &usable).map_err(|e| e.to_string())
    });
    Ok(CorrelationSet { static_values, dynamic_values, xi_fit, tau_fit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSettings {
    pub blocks_p: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub time_grid: Vec<f64>,
    /// Empty selects [`default_spacings`].
    pub spacings: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCell {
    pub lambda: f64,
    pub temperature: f64,
    pub solution: ThermalSolution,
    pub correlations: CorrelationSet,
}

impl ScalingCell {
    pub fn xi(&self) -> Option<f64> {
        self.correlations.xi_fit.as_ref().ok().map(|f| f.length_scale)
    }

    pub fn tau(&self) -> Option<f64> {
        self.correlations.tau_fit.as_ref().ok().map(|f| f.length_scale)
    }
}

/// For each `λ`, anneal down the temperatures, then measure `R(n)`, `C(t)`
/// and fit `ξ`, `τ` on every optimized state. Fit failures stay in the cell.
pub fn scaling_study(
    model: &ModelParams,
    lambdas: &[f64],
    temperatures: &[f64],
    settings: &ScalingSettings,
    cache: &dyn SolutionCache,
) -> Result<Vec<ScalingCell>> {
    validate_descending(temperatures)?;
    check_time_grid(&settings.time_grid)?;
    let spacings = if settings.spacings.is_empty() { default_spacings(model.n_sites) } else { settings.spacings.clone() };
    let scan = ScanSettings { blocks_p: settings.blocks_p, delta_lambda: 1.0, seed: settings.seed, solver: settings.solver };
    let per_lambda: Vec<Vec<ScalingCell>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let m = model.with_lambda(lambda);
            let terms = build_kitaev_ring(&m)?;
            let evolution = TimeEvolution::from_model(&m)?;
            let mut cells: Vec<ScalingCell> = Vec::with_capacity(temperatures.len());
            for &t in temperatures {
                let init = match cells.last() {
                    None => Init::Random { seed: chain_seed(settings.seed, lambda) },
                    Some(prev) => Init::WarmStart(prev.solution.params.clone()),
                };
                let solution = cached_or_solve(cache, m, t, init, &scan)?;
                let state = crate::ansatz::variational_state(&solution.params, &terms)?;
                let correlations = measure_correlations(&state, &evolution, &spacings, &settings.time_grid)?;
                cells.push(ScalingCell { lambda, temperature: t, solution, correlations });
            }
            Ok(cells)
        })
        .collect::<Result<_>>()?;
    Ok(per_lambda.into_iter().flatten().collect())
}
