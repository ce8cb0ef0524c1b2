//! JSON checkpoints of optimized solutions, keyed by `(λ, T)`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{build_kitaev_ring, DEFAULT_DENSE_CAP};
use crate::observables::SolutionCache;
use crate::vqa::{Objective, ThermalSolution};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Re-evaluated free energies must match stored ones this closely.
pub const REEVALUATION_TOLERANCE: f64 = 1e-10;

/// Hash of the settings that make stored parameters reusable.
pub fn fingerprint(n_sites: usize, coupling_j: f64, blocks_p: usize) -> String {
    let mut h = Sha256::new();
    h.update(format!("n_sites={n_sites};coupling_j={:016x};blocks_p={blocks_p}", coupling_j.to_bits()));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub fingerprint: String,
    pub n_sites: usize,
    pub coupling_j: f64,
    pub blocks_p: usize,
    /// Sorted by `λ`, then `T`, on save.
    pub entries: Vec<ThermalSolution>,
}

type Key = (u64, u64);

fn key(lambda: f64, temperature: f64) -> Key {
    (lambda.to_bits(), temperature.to_bits())
}

impl Checkpoint {
    pub fn new(n_sites: usize, coupling_j: f64, blocks_p: usize) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            fingerprint: fingerprint(n_sites, coupling_j, blocks_p),
            n_sites,
            coupling_j,
            blocks_p,
            entries: Vec::new(),
        }
    }

    pub fn is_compatible(&self, n_sites: usize, coupling_j: f64, blocks_p: usize) -> bool {
        self.fingerprint == fingerprint(n_sites, coupling_j, blocks_p)
    }

    fn position(&self, lambda: f64, temperature: f64) -> Option<usize> {
        let k = key(lambda, temperature);
        self.entries.iter().position(|e| key(e.model.field_lambda, e.temperature) == k)
    }

    /// Adds or replaces the entry at the solution's `(λ, T)`.
    pub fn insert(&mut self, solution: ThermalSolution) -> Result<()> {
        self.check_entry(&solution)?;
        let mut s = solution;
        s.trace.clear();
        match self.position(s.model.field_lambda, s.temperature) {
            Some(i) => self.entries[i] = s,
            None => self.entries.push(s),
        }
        Ok(())
    }

    pub fn get(&self, lambda: f64, temperature: f64) -> Option<&ThermalSolution> {
        self.position(lambda, temperature).map(|i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn check_entry(&self, s: &ThermalSolution) -> Result<()> {
        if s.model.n_sites != self.n_sites || s.model.coupling_j.to_bits() != self.coupling_j.to_bits() || s.blocks_p() != self.blocks_p {
            return Err(Error::Checkpoint(format!(
                "entry at lambda = {}, T = {} does not match N = {}, J = {}, p = {}",
                s.model.field_lambda, s.temperature, self.n_sites, self.coupling_j, self.blocks_p
            )));
        }
        if s.params.n_sites() != self.n_sites {
            return Err(Error::Checkpoint(format!("entry has {} angles for {} sites", s.params.n_sites(), self.n_sites)));
        }
        s.params.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let finite = [s.model.field_lambda, s.temperature, s.free_energy, s.energy, s.entropy];
        if !finite.iter().all(|x| x.is_finite()) || !(s.temperature > 0.0) || !(s.grad_norm >= 0.0) {
            return Err(Error::Checkpoint(format!("entry at lambda = {} has invalid numbers", s.model.field_lambda)));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if !(2..=DEFAULT_DENSE_CAP).contains(&self.n_sites) || self.blocks_p == 0 || !self.coupling_j.is_finite() {
            return Err(Error::Checkpoint("invalid model header".into()));
        }
        if self.fingerprint != fingerprint(self.n_sites, self.coupling_j, self.blocks_p) {
            return Err(Error::Checkpoint("fingerprint does not match the stored model".into()));
        }
        let mut seen = BTreeMap::new();
        for e in &self.entries {
            self.check_entry(e)?;
            if seen.insert(key(e.model.field_lambda, e.temperature), ()).is_some() {
                return Err(Error::Checkpoint(format!(
                    "duplicate entry at lambda = {}, T = {}",
                    e.model.field_lambda, e.temperature
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json_string(&self) -> String {
        let mut sorted = self.clone();
        sorted
            .entries
            .sort_by(|a, b| a.model.field_lambda.total_cmp(&b.model.field_lambda).then(a.temperature.total_cmp(&b.temperature)));
        serde_json::to_string_pretty(&sorted).expect("checkpoint serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Writes through a temporary file so an interrupted save leaves the old file intact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json_string()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Recomputes every stored free energy; returns the largest absolute deviation.
    pub fn reevaluate(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for e in &self.entries {
            let objective = Objective::new(build_kitaev_ring(&e.model)?, e.temperature, e.blocks_p())?;
            let f = objective.evaluate(&e.params)?.free_energy;
            worst = worst.max((f - e.free_energy).abs());
        }
        Ok(worst)
    }

    /// Fails unless every entry reproduces its stored free energy.
    pub fn verify(&self) -> Result<()> {
        let worst = self.reevaluate()?;
        if worst > REEVALUATION_TOLERANCE {
            return Err(Error::Checkpoint(format!("stored free energies deviate by up to {worst:e} on re-evaluation")));
        }
        Ok(())
    }
}

impl SolutionCache for Checkpoint {
    fn lookup(&self, lambda: f64, temperature: f64) -> Option<ThermalSolution> {
        self.get(lambda, temperature).filter(|s| s.converged).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::vqa::{solve, Init, SolveRequest, SolverConfig};

    fn solved(lambda: f64, t: f64) -> ThermalSolution {
        solve(&SolveRequest {
            model: ModelParams::new(2, lambda),
            temperature: t,
            blocks_p: 2,
            init: Init::Random { seed: 5 },
            solver: SolverConfig { restarts: 1, ..SolverConfig::default() },
            record_trace: false,
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut c = Checkpoint::new(2, 1.0, 2);
        c.insert(solved(0.7, 0.5)).unwrap();
        c.insert(solved(0.3, 0.5)).unwrap();
        let text = c.to_json_string();
        let back = Checkpoint::from_json_str(&text).unwrap();
        assert_eq!(back.len(), 2);
        for e in &c.entries {
            assert_eq!(back.get(e.model.field_lambda, e.temperature), Some(e));
        }
        assert!(back.reevaluate().unwrap() <= REEVALUATION_TOLERANCE);
        back.verify().unwrap();
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let mut c = Checkpoint::new(2, 1.0, 2);
        c.insert(solved(0.5, 1.0)).unwrap();
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap().entries, c.entries);
    }

    #[test]
    fn insert_replaces_same_point() {
        let mut c = Checkpoint::new(2, 1.0, 2);
        c.insert(solved(0.5, 1.0)).unwrap();
        let mut s = solved(0.5, 1.0);
        s.iterations = 12345;
        c.insert(s).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.get(0.5, 1.0).unwrap().iterations, 12345);
    }

    #[test]
    fn rejects_mismatched_entries() {
        let mut c = Checkpoint::new(3, 1.0, 2);
        assert!(c.insert(solved(0.5, 1.0)).is_err());
    }

    #[test]
    fn rejects_tampering() {
        let mut c = Checkpoint::new(2, 1.0, 2);
        c.insert(solved(0.5, 1.0)).unwrap();
        let text = c.to_json_string();
        assert!(Checkpoint::from_json_str(&text.replace("\"blocks_p\": 2,\n  \"entries\"", "\"blocks_p\": 3,\n  \"entries\"")).is_err());
        assert!(Checkpoint::from_json_str(&text.replace("\"format_version\": 1", "\"format_version\": 9")).is_err());
        assert!(Checkpoint::from_json_str("").is_err());
        assert!(Checkpoint::from_json_str("{}").is_err());

        let mut bad = c.clone();
        bad.entries[0].free_energy += 1e-6;
        let reloaded = Checkpoint::from_json_str(&bad.to_json_string()).unwrap();
        assert!(reloaded.verify().is_err());
    }

    #[test]
    fn fingerprint_tracks_model_and_depth() {
        let a = fingerprint(3, 1.0, 5);
        assert_eq!(a, fingerprint(3, 1.0, 5));
        assert_ne!(a, fingerprint(4, 1.0, 5));
        assert_ne!(a, fingerprint(3, 0.5, 5));
        assert_ne!(a, fingerprint(3, 1.0, 4));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn cache_serves_only_converged() {
        let mut c = Checkpoint::new(2, 1.0, 2);
        let mut s = solved(0.5, 1.0);
        s.converged = false;
        c.insert(s).unwrap();
        assert!(c.lookup(0.5, 1.0).is_none());
        assert!(c.lookup(0.6, 1.0).is_none());
    }
}
