//! Command execution: grid sweeps, CSV export, run manifest and checkpoints.
//!
//! Every CSV row starts with the provenance columns
//! `lambda, temperature, n_sites, blocks_p, seed`; rows are sorted by `λ` then
//! `T` ascending and floats carry 17 significant digits.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ansatz::{spectrum_entropy, variational_state, AnsatzParams};
use crate::checkpoint::Checkpoint;
use crate::config::{Command, RunConfig};
use crate::dense::von_neumann_entropy;
use crate::error::{Error, Result};
use crate::model::{build_kitaev_ring, ModelParams};
use crate::observables::{
    chain_seed, crossover_scan, dynamical_correlation_direct, dynamical_correlation_hadamard, locate_peak,
    measure_correlations, scaling_study, CorrelationSet, CrossoverLine, ScalingCell, ScalingSettings, ScanSettings,
    SolutionCache, TimeEvolution,
};
use crate::oracle::{check_crossover_grid, exact_gibbs, exact_susceptibility_value};
use crate::vqa::{solve, Init, Objective, SolveRequest, ThermalSolution};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Command-line overrides applied on top of a [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub command: Command,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Write per-iteration optimizer traces (`solve` only).
    pub record_trace: bool,
}

impl RunOptions {
    pub fn new(command: Command) -> Self {
        Self { command, seed: None, out_dir: None, resume: None, workers: None, record_trace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckCount {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    /// Largest observed deviation.
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: Command,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub cells: usize,
    pub failures: Vec<String>,
    pub checks: Vec<CheckCount>,
}

impl RunReport {
    /// False when every cell failed or a self-check failed.
    pub fn success(&self) -> bool {
        let cells_ok = self.cells == 0 || self.failures.len() < self.cells;
        cells_ok && self.checks.iter().all(|c| c.failed == 0)
    }
}

/// Loads the configuration and the resume checkpoint, then runs.
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunReport> {
    config.validate()?;
    if let Some(c) = config.command {
        if c != options.command {
            return Err(Error::config("command", format!("config says {} but {} was requested", c.as_str(), options.command.as_str())));
        }
    }
    let mut cfg = config.clone();
    if let Some(seed) = options.seed {
        cfg.seed = seed;
    }
    if let Some(w) = options.workers {
        if w == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        cfg.workers = Some(w);
    }
    let out_dir = options.out_dir.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));

    let resumed = match &options.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if !ck.is_compatible(cfg.n_sites, cfg.coupling_j, cfg.blocks_p) {
                return Err(Error::Checkpoint(format!(
                    "{} was written for N = {}, J = {}, p = {}",
                    path.display(),
                    ck.n_sites,
                    ck.coupling_j,
                    ck.blocks_p
                )));
            }
            ck.verify()?;
            Some(ck)
        }
        None => None,
    };

    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let pool = match cfg.workers {
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| Error::InvalidParams(format!("worker pool: {e}")))?;

    let started = Instant::now();
    let mut runner = Runner::new(&cfg, out_dir, resumed, options.record_trace)?;
    pool.install(|| runner.execute(options.command))?;
    runner.write_manifest(options, started.elapsed().as_secs_f64())?;
    Ok(runner.report(options.command))
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    model: ModelParams,
    lambdas: Vec<f64>,
    temps: Vec<f64>,
    out_dir: PathBuf,
    checkpoint: Mutex<Checkpoint>,
    record_trace: bool,
    files: Vec<String>,
    cells: usize,
    failures: Vec<String>,
    checks: Vec<CheckCount>,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a RunConfig, out_dir: PathBuf, resumed: Option<Checkpoint>, record_trace: bool) -> Result<Self> {
        let checkpoint = resumed.unwrap_or_else(|| Checkpoint::new(cfg.n_sites, cfg.coupling_j, cfg.blocks_p));
        Ok(Self {
            cfg,
            model: cfg.model()?,
            lambdas: cfg.lambdas()?,
            temps: cfg.temperatures()?,
            out_dir,
            checkpoint: Mutex::new(checkpoint),
            record_trace,
            files: Vec::new(),
            cells: 0,
            failures: Vec::new(),
            checks: Vec::new(),
        })
    }

    fn provenance(&self, lambda: f64, temperature: Option<f64>) -> Vec<String> {
        vec![
            num(lambda),
            opt_num(temperature),
            self.cfg.n_sites.to_string(),
            self.cfg.blocks_p.to_string(),
            self.cfg.seed.to_string(),
        ]
    }

    fn write_csv(&mut self, name: &str, columns: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let path = self.out_dir.join(name);
        let to_err = |e: csv::Error| Error::Io { path: path.display().to_string(), message: e.to_string() };
        let mut w = csv::Writer::from_path(&path).map_err(to_err)?;
        let mut header = vec!["lambda", "temperature", "n_sites", "blocks_p", "seed"];
        header.extend_from_slice(columns);
        w.write_record(&header).map_err(to_err)?;
        for row in rows {
            w.write_record(&row).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn record(&self, solutions: impl IntoIterator<Item = ThermalSolution>) -> Result<()> {
        let mut ck = self.checkpoint.lock().expect("checkpoint lock");
        for s in solutions {
            ck.insert(s)?;
        }
        ck.save(&self.out_dir.join(CHECKPOINT_FILE))
    }

    fn oracle_enabled(&self) -> bool {
        self.cfg.oracle_enabled()
    }

    fn exact_f(&self, lambda: f64, t: f64) -> Result<Option<f64>> {
        if !self.oracle_enabled() {
            return Ok(None);
        }
        Ok(Some(exact_gibbs(&self.model.with_lambda(lambda), t)?.free_energy))
    }

    fn execute(&mut self, command: Command) -> Result<()> {
        match command {
            Command::Solve => self.run_solve(),
            Command::SweepCrossover => self.run_sweep(),
            Command::Correlations => self.run_correlations(),
            Command::Oracle => self.run_oracle(),
            Command::Verify => self.run_verify(),
        }
    }

    fn free_energy_rows(&self, solutions: &[&ThermalSolution]) -> Result<Vec<Vec<String>>> {
        let mut sorted: Vec<&ThermalSolution> = solutions.to_vec();
        sorted.sort_by(|a, b| a.model.field_lambda.total_cmp(&b.model.field_lambda).then(a.temperature.total_cmp(&b.temperature)));
        sorted
            .into_iter()
            .map(|s| {
                let mut row = self.provenance(s.model.field_lambda, Some(s.temperature));
                row.extend([
                    num(s.free_energy),
                    opt_num(self.exact_f(s.model.field_lambda, s.temperature)?),
                    num(s.energy),
                    num(s.entropy),
                    num(s.grad_norm),
                    s.iterations.to_string(),
                    s.converged.to_string(),
                ]);
                Ok(row)
            })
            .collect()
    }

    const FREE_ENERGY_COLUMNS: [&'static str; 7] = ["F_var", "F_exact", "E", "S", "grad_norm", "iterations", "converged"];

    fn note_unconverged(&mut self, solutions: &[&ThermalSolution]) {
        for s in solutions {
            if !s.converged {
                self.failures.push(format!(
                    "lambda = {}, T = {}: not converged (grad_norm {:e})",
                    s.model.field_lambda, s.temperature, s.grad_norm
                ));
            }
        }
    }

    fn run_solve(&mut self) -> Result<()> {
        let ck = self.checkpoint.lock().expect("checkpoint lock").clone();
        let chains: Vec<(f64, Result<Vec<ThermalSolution>>)> = self
            .lambdas
            .par_iter()
            .map(|&lambda| {
                let chain = self.solve_chain(lambda, &ck);
                if let Ok(c) = &chain {
                    if let Err(e) = self.record(c.iter().cloned()) {
                        return (lambda, Err(e));
                    }
                }
                (lambda, chain)
            })
            .collect();

        let mut solutions = Vec::new();
        for (lambda, chain) in chains {
            match chain {
                Ok(c) => solutions.extend(c),
                Err(e) if e.is_usage() || matches!(e, Error::Io { .. }) => return Err(e),
                Err(e) => {
                    self.cells += self.temps.len();
                    for t in &self.temps {
                        self.failures.push(format!("lambda = {lambda}, T = {t}: {e}"));
                    }
                }
            }
        }
        let refs: Vec<&ThermalSolution> = solutions.iter().collect();
        self.cells += refs.len();
        self.note_unconverged(&refs);
        let rows = self.free_energy_rows(&refs)?;
        self.write_csv("free_energy.csv", &Self::FREE_ENERGY_COLUMNS, rows)?;

        if self.record_trace {
            let mut rows = Vec::new();
            let mut sorted = refs.clone();
            sorted.sort_by(|a, b| a.model.field_lambda.total_cmp(&b.model.field_lambda).then(a.temperature.total_cmp(&b.temperature)));
            for s in sorted {
                for r in &s.trace {
                    let mut row = self.provenance(s.model.field_lambda, Some(s.temperature));
                    row.extend([r.iteration.to_string(), num(r.value), num(r.grad_norm)]);
                    rows.push(row);
                }
            }
            self.write_csv("traces.csv", &["iteration", "F", "grad_norm"], rows)?;
        }
        Ok(())
    }

    fn solve_chain(&self, lambda: f64, cache: &Checkpoint) -> Result<Vec<ThermalSolution>> {
        let model = self.model.with_lambda(lambda);
        let mut out: Vec<ThermalSolution> = Vec::with_capacity(self.temps.len());
        for &t in &self.temps {
            // Traces are only meaningful for fresh solves.
            let cached = if self.record_trace { None } else { cache.lookup(lambda, t) };
            let s = match cached {
                Some(s) => s,
                None => {
                    let init = match out.last() {
                        None => Init::Random { seed: chain_seed(self.cfg.seed, lambda) },
                        Some(prev) => Init::WarmStart(prev.params.clone()),
                    };
                    solve(&SolveRequest {
                        model,
                        temperature: t,
                        blocks_p: self.cfg.blocks_p,
                        init,
                        solver: self.cfg.optimizer,
                        record_trace: self.record_trace,
                    })?
                }
            };
            out.push(s);
        }
        Ok(out)
    }

    fn scan_settings(&self) -> ScanSettings {
        ScanSettings {
            blocks_p: self.cfg.blocks_p,
            delta_lambda: self.cfg.delta_lambda,
            seed: self.cfg.seed,
            solver: self.cfg.optimizer,
        }
    }

    fn run_sweep(&mut self) -> Result<()> {
        check_crossover_grid(&self.model, &self.temps).map_err(|e| Error::config("temperature_grid", e.to_string()))?;
        let ck = self.checkpoint.lock().expect("checkpoint lock").clone();
        let settings = self.scan_settings();
        let lines: Vec<(f64, Result<CrossoverLine>)> = self
            .lambdas
            .par_iter()
            .map(|&lambda| {
                let line = crossover_scan(&self.model, &[lambda], &self.temps, &settings, &ck).map(|mut v| v.remove(0));
                if let Ok(l) = &line {
                    let sols = l.cells.iter().flat_map(|c| [c.minus.clone(), c.center.clone(), c.plus.clone()]);
                    if let Err(e) = self.record(sols) {
                        return (lambda, Err(e));
                    }
                }
                (lambda, line)
            })
            .collect();

        let mut fe_rows_src: Vec<ThermalSolution> = Vec::new();
        let mut chi_rows = Vec::new();
        let mut cross_rows = Vec::new();
        for (lambda, line) in lines {
            let line = match line {
                Ok(l) => l,
                Err(e) if e.is_usage() || matches!(e, Error::Io { .. }) => return Err(e),
                Err(e) => {
                    self.cells += self.temps.len();
                    for t in &self.temps {
                        self.failures.push(format!("lambda = {lambda}, T = {t}: {e}"));
                    }
                    continue;
                }
            };
            let m = self.model.with_lambda(lambda);
            let mut exact_curve = Vec::new();
            for cell in line.cells.iter().rev() {
                self.cells += 1;
                let exact = if self.oracle_enabled() {
                    Some(exact_susceptibility_value(&m, cell.temperature, self.cfg.delta_lambda)?)
                } else {
                    None
                };
                if let Some(v) = exact {
                    exact_curve.push((cell.temperature, v.chi));
                }
                let (chi, d2, err) = match &cell.chi {
                    Ok(v) => (Some(v.chi), Some(v.second_difference), String::new()),
                    Err(e) => {
                        self.failures.push(format!("lambda = {lambda}, T = {}: {e}", cell.temperature));
                        (None, None, e.clone())
                    }
                };
                let mut row = self.provenance(lambda, Some(cell.temperature));
                row.extend([
                    opt_num(chi),
                    opt_num(exact.map(|v| v.chi)),
                    opt_num(d2),
                    opt_num(exact.map(|v| v.second_difference)),
                    err,
                ]);
                chi_rows.push(row);
                fe_rows_src.push(cell.center.clone());
            }
            let exact_peak = (!exact_curve.is_empty()).then(|| locate_peak(&exact_curve));
            let mut row = self.provenance(lambda, line.peak.map(|p| p.grid_temperature));
            row.extend([
                opt_num(line.peak.map(|p| p.t_star)),
                opt_num(exact_peak.map(|p| p.t_star)),
                line.peak.map(|p| p.boundary.to_string()).unwrap_or_default(),
                exact_peak.map(|p| p.boundary.to_string()).unwrap_or_default(),
            ]);
            cross_rows.push(row);
        }
        let refs: Vec<&ThermalSolution> = fe_rows_src.iter().collect();
        let rows = self.free_energy_rows(&refs)?;
        self.write_csv("free_energy.csv", &Self::FREE_ENERGY_COLUMNS, rows)?;
        self.write_csv("susceptibility.csv", &["chi_var", "chi_exact", "d2F_var", "d2F_exact", "error"], chi_rows)?;
        self.write_csv("crossover.csv", &["T_star_var", "T_star_exact", "boundary_flag", "boundary_flag_exact"], cross_rows)
    }

    fn correlation_rows(&self, cell_lambda: f64, t: f64, var: &CorrelationSet, exact: Option<&CorrelationSet>) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for (k, &(n, r)) in var.static_values.iter().enumerate() {
            let mut row = self.provenance(cell_lambda, Some(t));
            row.extend(["static".to_string(), n.to_string(), num(r), opt_num(exact.map(|e| e.static_values[k].1))]);
            rows.push(row);
        }
        for (k, &(time, c)) in var.dynamic_values.iter().enumerate() {
            let mut row = self.provenance(cell_lambda, Some(t));
            row.extend(["dynamic".to_string(), num(time), num(c), opt_num(exact.map(|e| e.dynamic_values[k].1))]);
            rows.push(row);
        }
        rows
    }

    fn run_correlations(&mut self) -> Result<()> {
        let ck = self.checkpoint.lock().expect("checkpoint lock").clone();
        let settings = ScalingSettings {
            blocks_p: self.cfg.blocks_p,
            seed: self.cfg.seed,
            solver: self.cfg.optimizer,
            time_grid: self.cfg.times()?,
            spacings: self.cfg.spacing_list()?,
        };
        let studies: Vec<(f64, Result<Vec<ScalingCell>>)> = self
            .lambdas
            .par_iter()
            .map(|&lambda| {
                let cells = scaling_study(&self.model, &[lambda], &self.temps, &settings, &ck);
                if let Ok(c) = &cells {
                    if let Err(e) = self.record(c.iter().map(|c| c.solution.clone())) {
                        return (lambda, Err(e));
                    }
                }
                (lambda, cells)
            })
            .collect();

        let mut solutions = Vec::new();
        let mut corr_rows = Vec::new();
        let mut fit_rows = Vec::new();
        for (lambda, cells) in studies {
            let cells = match cells {
                Ok(c) => c,
                Err(e) if e.is_usage() || matches!(e, Error::Io { .. }) => return Err(e),
                Err(e) => {
                    self.cells += self.temps.len();
                    for t in &self.temps {
                        self.failures.push(format!("lambda = {lambda}, T = {t}: {e}"));
                    }
                    continue;
                }
            };
            for cell in cells.iter().rev() {
                self.cells += 1;
                let exact = if self.oracle_enabled() {
                    let g = exact_gibbs(&self.model.with_lambda(lambda), cell.temperature)?;
                    let evo = TimeEvolution::from_spectral(g.spectral.clone());
                    Some(measure_correlations(&g.density_matrix(), &evo, &settings.spacings, &settings.time_grid)?)
                } else {
                    None
                };
                corr_rows.extend(self.correlation_rows(lambda, cell.temperature, &cell.correlations, exact.as_ref()));
                let c = &cell.correlations;
                let mut errors = Vec::new();
                if let Err(e) = &c.xi_fit {
                    errors.push(format!("xi: {e}"));
                }
                if let Err(e) = &c.tau_fit {
                    errors.push(format!("tau: {e}"));
                }
                if !errors.is_empty() {
                    self.failures.push(format!("lambda = {lambda}, T = {}: {}", cell.temperature, errors.join("; ")));
                }
                let exact_xi = exact.as_ref().and_then(|e| e.xi_fit.as_ref().ok().map(|f| f.length_scale));
                let exact_tau = exact.as_ref().and_then(|e| e.tau_fit.as_ref().ok().map(|f| f.length_scale));
                let mut row = self.provenance(lambda, Some(cell.temperature));
                row.extend([
                    opt_num(cell.xi()),
                    opt_num(cell.tau()),
                    opt_num(c.xi_fit.as_ref().ok().map(|f| f.residual)),
                    opt_num(c.tau_fit.as_ref().ok().map(|f| f.residual)),
                    opt_num(exact_xi),
                    opt_num(exact_tau),
                    c.tau_fit.as_ref().map(|f| f.abscissae.len().to_string()).unwrap_or_default(),
                    errors.join("; "),
                ]);
                fit_rows.push(row);
                solutions.push(cell.solution.clone());
            }
        }
        let refs: Vec<&ThermalSolution> = solutions.iter().collect();
        self.note_unconverged(&refs);
        let rows = self.free_energy_rows(&refs)?;
        self.write_csv("free_energy.csv", &Self::FREE_ENERGY_COLUMNS, rows)?;
        self.write_csv("correlations.csv", &["kind", "abscissa", "value", "value_exact"], corr_rows)?;
        self.write_csv(
            "fits.csv",
            &["xi", "tau", "residual_xi", "residual_tau", "xi_exact", "tau_exact", "tau_window", "error"],
            fit_rows,
        )
    }

    fn run_oracle(&mut self) -> Result<()> {
        let cap = self.cfg.oracle_max_sites;
        if !self.oracle_enabled() {
            return Err(Error::config("n_sites", format!("oracle is limited to n_sites <= {cap}")));
        }
        let crossover_ok = check_crossover_grid(&self.model, &self.temps).is_ok();
        let mut fe_rows = Vec::new();
        let mut chi_rows = Vec::new();
        let mut cross_rows = Vec::new();
        for &lambda in &self.lambdas.clone() {
            let m = self.model.with_lambda(lambda);
            let mut curve = Vec::new();
            for &t in self.temps.iter().rev() {
                self.cells += 1;
                let g = exact_gibbs(&m, t)?;
                let mut row = self.provenance(lambda, Some(t));
                row.extend([String::new(), num(g.free_energy), num(g.energy), num(g.entropy), String::new(), String::new(), String::new()]);
                fe_rows.push(row);
                let v = exact_susceptibility_value(&m, t, self.cfg.delta_lambda)?;
                curve.push((t, v.chi));
                let mut row = self.provenance(lambda, Some(t));
                row.extend([String::new(), num(v.chi), String::new(), num(v.second_difference), String::new()]);
                chi_rows.push(row);
            }
            if crossover_ok {
                let p = locate_peak(&curve);
                let mut row = self.provenance(lambda, Some(p.grid_temperature));
                row.extend([String::new(), num(p.t_star), String::new(), p.boundary.to_string()]);
                cross_rows.push(row);
            }
        }
        self.write_csv("free_energy.csv", &Self::FREE_ENERGY_COLUMNS, fe_rows)?;
        self.write_csv("susceptibility.csv", &["chi_var", "chi_exact", "d2F_var", "d2F_exact", "error"], chi_rows)?;
        if crossover_ok {
            self.write_csv("crossover.csv", &["T_star_var", "T_star_exact", "boundary_flag", "boundary_flag_exact"], cross_rows)?;
        }
        Ok(())
    }

    fn run_verify(&mut self) -> Result<()> {
        let draws = 20;
        self.checks = verify_invariants(&self.model, self.temps[0], self.cfg.blocks_p, draws, self.cfg.seed)?;
        let rows = self
            .checks
            .iter()
            .map(|c| {
                let mut row = self.provenance(self.model.field_lambda, Some(self.temps[0]));
                row.extend([c.name.clone(), c.passed.to_string(), c.failed.to_string(), num(c.worst)]);
                row
            })
            .collect();
        self.write_csv("verify.csv", &["check", "passed", "failed", "worst"], rows)
    }

    fn write_manifest(&mut self, options: &RunOptions, wall_time: f64) -> Result<()> {
        let ck_path = self.out_dir.join(CHECKPOINT_FILE);
        let has_checkpoint = matches!(options.command, Command::Solve | Command::SweepCrossover | Command::Correlations);
        if has_checkpoint {
            // Resumed runs with no new cells still get a checkpoint in the output directory.
            self.checkpoint.lock().expect("checkpoint lock").save(&ck_path)?;
        }
        let manifest = serde_json::json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": options.command.as_str(),
            "seed": self.cfg.seed,
            "workers": self.cfg.workers,
            "config": self.cfg,
            "config_toml": self.cfg.to_toml_string(),
            "resumed_from": options.resume.as_ref().map(|p| p.display().to_string()),
            "checkpoint": has_checkpoint.then_some(CHECKPOINT_FILE),
            "files": self.files,
            "cells": self.cells,
            "failures": self.failures,
            "checks": self.checks,
            "wall_time_seconds": wall_time,
        });
        let path = self.out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn report(&self, command: Command) -> RunReport {
        RunReport {
            command,
            out_dir: self.out_dir.clone(),
            files: self.files.clone(),
            cells: self.cells,
            failures: self.failures.clone(),
            checks: self.checks.clone(),
        }
    }
}

fn random_params(n: usize, p: usize, rng: &mut ChaCha8Rng) -> AnsatzParams {
    let len = n * (1 + 2 * p);
    let flat: Vec<f64> = (0..len).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
    AnsatzParams::from_slice(n, p, &flat).expect("length matches")
}

fn tally(name: &str, deviations: &[f64], tolerance: f64) -> CheckCount {
    let failed = deviations.iter().filter(|&&d| !(d <= tolerance)).count();
    CheckCount {
        name: name.to_string(),
        passed: deviations.len() - failed,
        failed,
        worst: deviations.iter().copied().fold(0.0, f64::max),
    }
}

/// Self-test on random draws: analytic vs central-difference gradient,
/// Hadamard-test vs direct `C(t)`, and entropy invariance under the circuit.
pub fn verify_invariants(model: &ModelParams, temperature: f64, blocks_p: usize, draws: usize, seed: u64) -> Result<Vec<CheckCount>> {
    let n = model.n_sites;
    let terms = build_kitaev_ring(model)?;
    let objective = Objective::new(terms.clone(), temperature, blocks_p)?;
    let evolution = TimeEvolution::from_model(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut grad_dev = Vec::with_capacity(draws);
    let mut hadamard_dev = Vec::with_capacity(draws);
    let mut entropy_dev = Vec::with_capacity(draws);
    for _ in 0..draws {
        let params = random_params(n, blocks_p, &mut rng);
        let (_, g) = objective.evaluate_with_gradient(&params)?;
        let x = params.to_vec();
        let h = 1e-5;
        let mut fd = vec![0.0; x.len()];
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fp = objective.evaluate(&AnsatzParams::from_slice(n, blocks_p, &xp)?)?.free_energy;
            let fm = objective.evaluate(&AnsatzParams::from_slice(n, blocks_p, &xm)?)?.free_energy;
            fd[k] = (fp - fm) / (2.0 * h);
        }
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        grad_dev.push(diff / norm.max(1e-12));

        let state = variational_state(&params, &terms)?;
        let site = rng.gen_range(1..=n);
        let t = rng.gen_range(0.0..3.0);
        let direct = dynamical_correlation_direct(&state, &evolution, site, t)?;
        let hadamard = dynamical_correlation_hadamard(&state, &evolution, site, t)?;
        hadamard_dev.push((direct - hadamard).norm());

        entropy_dev.push((von_neumann_entropy(&state)? - spectrum_entropy(&params.theta)).abs());
    }
    Ok(vec![
        tally("gradient_vs_finite_difference", &grad_dev, 1e-6),
        tally("hadamard_vs_direct", &hadamard_dev, 1e-10),
        tally("entropy_invariance", &entropy_dev, 1e-10),
    ])
}

/// Path of the checkpoint written into an output directory.
pub fn checkpoint_path(out_dir: &Path) -> PathBuf {
    out_dir.join(CHECKPOINT_FILE)
}
