//! TOML run configuration.
//!
//! ```toml
//! n_sites = 3
//! lambda_grid = { start = 0.5, stop = 1.5, step = 0.1 }
//! temperature_grid = { start = 1.0, stop = 0.05, step = -0.05 }
//! seed = 7
//!
//! [optimizer]
//! tolerance = 1e-9
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, DEFAULT_DENSE_CAP};
use crate::observables::{default_spacings, default_time_grid};
use crate::vqa::SolverConfig;

pub const DEFAULT_BLOCKS_P: usize = 5;
pub const DEFAULT_DELTA_LAMBDA: f64 = 1e-3;

/// Upper bound on points generated by a range grid.
pub const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    SweepCrossover,
    Correlations,
    Oracle,
    Verify,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SweepCrossover => "sweep-crossover",
            Command::Correlations => "correlations",
            Command::Oracle => "oracle",
            Command::Verify => "verify",
        }
    }
}

/// Either an explicit list or an arithmetic range with inclusive `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridSpec {
    pub fn values(&self, field: &str) -> Result<Vec<f64>> {
        match self {
            GridSpec::List(v) => Ok(v.clone()),
            &GridSpec::Range { start, stop, step } => {
                if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step == 0.0 {
                    return Err(Error::config(field, "range needs finite start, stop and a nonzero step"));
                }
                let span = (stop - start) / step;
                if span < -1e-9 {
                    return Err(Error::config(field, "step points away from stop"));
                }
                let intervals = (span + 1e-9).floor();
                if intervals >= MAX_GRID_POINTS as f64 {
                    return Err(Error::config(field, format!("range has more than {MAX_GRID_POINTS} points")));
                }
                let count = intervals as usize + 1;
                Ok((0..count).map(|k| start + k as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub n_sites: usize,
    #[serde(default = "default_coupling")]
    pub coupling_j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Strictly descending: sweeps anneal from hot to cold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_grid: Option<GridSpec>,
    #[serde(default = "default_blocks")]
    pub blocks_p: usize,
    #[serde(default = "default_delta")]
    pub delta_lambda: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Times for `C(t)`; strictly ascending and positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<GridSpec>,
    /// Spacings for `R(n)`; defaults to `1..=N/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacings: Option<Vec<usize>>,
    /// Largest N for which exact-oracle columns are filled.
    #[serde(default = "default_oracle_cap")]
    pub oracle_max_sites: usize,
    #[serde(default)]
    pub optimizer: SolverConfig,
}

fn default_coupling() -> f64 {
    1.0
}

fn default_blocks() -> usize {
    DEFAULT_BLOCKS_P
}

fn default_delta() -> f64 {
    DEFAULT_DELTA_LAMBDA
}

fn default_oracle_cap() -> usize {
    8
}

impl RunConfig {
    /// Minimal single-point configuration with defaults.
    pub fn single(n_sites: usize, lambda: f64, temperature: f64) -> Self {
        Self {
            command: None,
            n_sites,
            coupling_j: 1.0,
            lambda: Some(lambda),
            lambda_grid: None,
            temperature: Some(temperature),
            temperature_grid: None,
            blocks_p: DEFAULT_BLOCKS_P,
            delta_lambda: DEFAULT_DELTA_LAMBDA,
            seed: 0,
            output_dir: None,
            workers: None,
            time_grid: None,
            spacings: None,
            oracle_max_sites: default_oracle_cap(),
            optimizer: SolverConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::ConfigParse("configuration is empty".into()));
        }
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::config("n_sites", "must be at least 2"));
        }
        if self.n_sites > DEFAULT_DENSE_CAP {
            return Err(Error::config("n_sites", format!("must be at most {DEFAULT_DENSE_CAP}")));
        }
        if !self.coupling_j.is_finite() || self.coupling_j == 0.0 {
            return Err(Error::config("coupling_j", "must be finite and nonzero"));
        }
        if self.blocks_p == 0 {
            return Err(Error::config("blocks_p", "must be at least 1"));
        }
        if !(self.delta_lambda > 0.0 && self.delta_lambda.is_finite()) {
            return Err(Error::config("delta_lambda", "must be positive and finite"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if !(self.optimizer.tolerance > 0.0 && self.optimizer.tolerance.is_finite()) {
            return Err(Error::config("optimizer.tolerance", "must be positive and finite"));
        }
        if self.optimizer.max_iterations == 0 {
            return Err(Error::config("optimizer.max_iterations", "must be at least 1"));
        }
        if self.optimizer.restarts == 0 {
            return Err(Error::config("optimizer.restarts", "must be at least 1"));
        }
        if self.optimizer.warm_restarts == 0 {
            return Err(Error::config("optimizer.warm_restarts", "must be at least 1"));
        }
        self.lambdas()?;
        self.temperatures()?;
        self.times()?;
        self.spacing_list()?;
        Ok(())
    }

    /// Field values sorted ascending.
    pub fn lambdas(&self) -> Result<Vec<f64>> {
        let (field, mut v) = match (&self.lambda, &self.lambda_grid) {
            (Some(l), None) => ("lambda", vec![*l]),
            (None, Some(g)) => ("lambda_grid", g.values("lambda_grid")?),
            (Some(_), Some(_)) => return Err(Error::config("lambda", "give either lambda or lambda_grid, not both")),
            (None, None) => return Err(Error::config("lambda", "missing; give lambda or lambda_grid")),
        };
        check_finite(field, &v)?;
        let ascending = v.windows(2).all(|w| w[1] > w[0]);
        let descending = v.windows(2).all(|w| w[1] < w[0]);
        if !(ascending || descending) {
            return Err(Error::config(field, "must be strictly monotone"));
        }
        if descending {
            v.reverse();
        }
        Ok(v)
    }

    /// Temperatures in annealing (strictly descending) order.
    pub fn temperatures(&self) -> Result<Vec<f64>> {
        let (field, v) = match (&self.temperature, &self.temperature_grid) {
            (Some(t), None) => ("temperature", vec![*t]),
            (None, Some(g)) => ("temperature_grid", g.values("temperature_grid")?),
            (Some(_), Some(_)) => {
                return Err(Error::config("temperature", "give either temperature or temperature_grid, not both"))
            }
            (None, None) => return Err(Error::config("temperature", "missing; give temperature or temperature_grid")),
        };
        check_finite(field, &v)?;
        if let Some(&t) = v.iter().find(|&&t| !(t > 0.0)) {
            return Err(Error::config(field, format!("temperatures must be positive, got {t}")));
        }
        if let Some(k) = (1..v.len()).find(|&k| !(v[k] < v[k - 1])) {
            return Err(Error::config(
                field,
                format!("must be strictly descending (hot to cold); entry {k} = {} follows {}", v[k], v[k - 1]),
            ));
        }
        Ok(v)
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        let v = match &self.time_grid {
            Some(g) => g.values("time_grid")?,
            None => return Ok(default_time_grid()),
        };
        check_finite("time_grid", &v)?;
        if v.first().is_none_or(|&t| !(t > 0.0)) || v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("time_grid", "must be nonempty, positive and strictly ascending"));
        }
        Ok(v)
    }

    pub fn spacing_list(&self) -> Result<Vec<usize>> {
        match &self.spacings {
            None => Ok(default_spacings(self.n_sites)),
            Some(v) => {
                if v.is_empty() {
                    return Err(Error::config("spacings", "must not be empty"));
                }
                if let Some(&n) = v.iter().find(|&&n| n >= self.n_sites) {
                    return Err(Error::config("spacings", format!("spacing {n} must be below n_sites = {}", self.n_sites)));
                }
                if v.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::config("spacings", "must be strictly ascending"));
                }
                Ok(v.clone())
            }
        }
    }

    /// Model at the first field value.
    pub fn model(&self) -> Result<ModelParams> {
        let lambda = self.lambdas()?[0];
        Ok(ModelParams { n_sites: self.n_sites, coupling_j: self.coupling_j, field_lambda: lambda })
    }

    pub fn oracle_enabled(&self) -> bool {
        self.n_sites <= self.oracle_max_sites
    }
}

fn check_finite(field: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::config(field, "must not be empty"));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::config(field, format!("non-finite value {x}")));
    }
    Ok(())
}
