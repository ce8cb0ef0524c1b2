//! Exact Gibbs-state quantities from full diagonalization.

use crate::dense::{eig_hermitian, shannon_entropy, DensityMatrix, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::model::{build_kitaev_ring, ModelParams};
use crate::observables::{aggregate_c, locate_peak, second_difference, static_correlation, Peak, SusceptibilityValue, TimeEvolution};

/// Exact thermal data of one `(model, T)` point.
#[derive(Debug, Clone)]
pub struct ExactGibbs {
    pub model: ModelParams,
    pub temperature: f64,
    pub spectral: SpectralDecomposition,
    /// `e^{-(E_k - E_0)/T}` normalized to sum 1.
    pub boltzmann_weights: Vec<f64>,
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    /// `ln Z`, computed with the ground-energy shift undone.
    pub log_partition: f64,
}

impl ExactGibbs {
    pub fn density_matrix(&self) -> DensityMatrix {
        let v = &self.spectral.eigenvectors;
        let mut scaled = v.clone();
        for (k, &w) in self.boltzmann_weights.iter().enumerate() {
            scaled.column_mut(k).iter_mut().for_each(|x| *x *= w);
        }
        DensityMatrix::from_trusted(scaled * v.adjoint())
    }
}

pub fn exact_gibbs(model: &ModelParams, temperature: f64) -> Result<ExactGibbs> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidTemperature(temperature));
    }
    let h = build_kitaev_ring(model)?.dense_matrix()?;
    let spectral = eig_hermitian(&h)?;
    Ok(gibbs_from_spectrum(model, temperature, spectral))
}

pub(crate) fn gibbs_from_spectrum(model: &ModelParams, temperature: f64, spectral: SpectralDecomposition) -> ExactGibbs {
    let e0 = spectral.eigenvalues[0];
    let raw: Vec<f64> = spectral.eigenvalues.iter().map(|e| (-(e - e0) / temperature).exp()).collect();
    let z_shifted: f64 = raw.iter().sum();
    let boltzmann_weights: Vec<f64> = raw.iter().map(|w| w / z_shifted).collect();
    let log_partition = z_shifted.ln() - e0 / temperature;
    let free_energy = -temperature * log_partition;
    let energy = boltzmann_weights.iter().zip(&spectral.eigenvalues).map(|(w, e)| w * e).sum();
    let entropy = shannon_entropy(boltzmann_weights.iter().copied());
    ExactGibbs { model: *model, temperature, spectral, boltzmann_weights, free_energy, energy, entropy, log_partition }
}

pub fn exact_free_energy(model: &ModelParams, temperature: f64) -> Result<f64> {
    Ok(exact_gibbs(model, temperature)?.free_energy)
}

pub fn exact_susceptibility_value(model: &ModelParams, temperature: f64, delta_lambda: f64) -> Result<SusceptibilityValue> {
    if !(delta_lambda > 0.0 && delta_lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("delta_lambda must be positive, got {delta_lambda}")));
    }
    let l = model.field_lambda;
    let fm = exact_free_energy(&model.with_lambda(l - delta_lambda), temperature)?;
    let f0 = exact_free_energy(model, temperature)?;
    let fp = exact_free_energy(&model.with_lambda(l + delta_lambda), temperature)?;
    let d2 = second_difference(fm, f0, fp, delta_lambda);
    Ok(SusceptibilityValue { chi: -d2, second_difference: d2 })
}

/// `χ = -[F(λ+δ) + F(λ-δ) - 2F(λ)]/δ²` from exact free energies.
pub fn exact_susceptibility(model: &ModelParams, temperature: f64, delta_lambda: f64) -> Result<f64> {
    Ok(exact_susceptibility_value(model, temperature, delta_lambda)?.chi)
}

/// Crossover temperature for one field value.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverPoint {
    pub lambda: f64,
    pub peak: Peak,
    /// `(T, χ, ∂²F/∂λ²)` in the order of the supplied grid.
    pub curve: Vec<(f64, f64, f64)>,
}

pub(crate) fn check_crossover_grid(model: &ModelParams, temperatures: &[f64]) -> Result<()> {
    if temperatures.is_empty() {
        return Err(Error::InvalidGrid("temperature grid is empty".into()));
    }
    for &t in temperatures {
        if !(t > 0.0 && t <= model.coupling_j.abs()) {
            return Err(Error::InvalidGrid(format!("temperature {t} outside (0, J = {}]", model.coupling_j)));
        }
    }
    Ok(())
}

pub fn exact_crossover(
    model: &ModelParams,
    lambda_grid: &[f64],
    temperature_grid: &[f64],
    delta_lambda: f64,
) -> Result<Vec<CrossoverPoint>> {
    check_crossover_grid(model, temperature_grid)?;
    if lambda_grid.is_empty() {
        return Err(Error::InvalidGrid("lambda grid is empty".into()));
    }
    lambda_grid
        .iter()
        .map(|&lambda| {
            let m = model.with_lambda(lambda);
            let curve = temperature_grid
                .iter()
                .map(|&t| exact_susceptibility_value(&m, t, delta_lambda).map(|v| (t, v.chi, v.second_difference)))
                .collect::<Result<Vec<_>>>()?;
            let pts: Vec<(f64, f64)> = curve.iter().map(|&(t, c, _)| (t, c)).collect();
            Ok(CrossoverPoint { lambda, peak: locate_peak(&pts), curve })
        })
        .collect()
}

/// `R(n)` for each spacing and `C(t)` for each time on the exact Gibbs state.
pub fn exact_correlations(model: &ModelParams, temperature: f64, spacings: &[usize], times: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = exact_gibbs(model, temperature)?;
    let rho = g.density_matrix();
    let r = spacings.iter().map(|&n| static_correlation(&rho, n)).collect::<Result<Vec<_>>>()?;
    let evo = TimeEvolution::from_spectral(g.spectral.clone());
    let c = times.iter().map(|&t| aggregate_c(&rho, &evo, t)).collect::<Result<Vec<_>>>()?;
    Ok((r, c))
}
