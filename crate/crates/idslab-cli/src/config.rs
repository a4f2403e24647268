//! Experiment configuration: a fully resolved, hashable description of one
//! run. The digest covers the canonical config serialization plus the model
//! content, so identical hashes imply identical artifacts.

use idslab::model::{preset, ModelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub log: bool,
}

impl GridConfig {
    pub fn energies(&self) -> Result<Vec<f64>, String> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(format!("bad grid range [{}, {}]", self.min, self.max));
        }
        if self.points < 2 {
            return Err("grid needs at least 2 points".into());
        }
        if self.log && self.min <= 0.0 {
            return Err("log grid needs a positive lower edge".into());
        }
        let n = self.points;
        let grid: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if self.log {
                    self.min * (self.max / self.min).powf(t)
                } else {
                    self.min + (self.max - self.min) * t
                }
            })
            .collect();
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: String,
    /// `preset:NAME` or a file path, as given on the command line.
    pub model_ref: String,
    /// Resolved model content; reproduction does not depend on the file
    /// still existing.
    pub model: serde_json::Value,
    pub l: i64,
    pub m: u32,
    pub k: u32,
    pub theta_points: usize,
    pub j_max: usize,
    pub e_grid: GridConfig,
    /// Test energies of the periodic-approximation study.
    pub energies: Vec<f64>,
    pub ks: Vec<u32>,
    pub ref_l: i64,
    pub n_realizations: u32,
    pub master_seed: u64,
    pub window: (f64, f64),
    pub budget_secs: Option<u64>,
    /// Worker count is an execution detail: excluded from the digest.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: String::new(),
            model_ref: String::new(),
            model: serde_json::Value::Null,
            l: 100,
            m: 8,
            k: 0,
            theta_points: 64,
            j_max: 3,
            e_grid: GridConfig { min: 0.1, max: 2.0, points: 20, log: false },
            energies: Vec::new(),
            ks: Vec::new(),
            ref_l: 1000,
            n_realizations: 1,
            master_seed: 0,
            window: (0.0, 0.0),
            budget_secs: None,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    /// Stable digest of the canonicalized config and the model content.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 0;
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&canonical).expect("config serializes"));
        hasher.update(serde_json::to_vec(&self.model).expect("model serializes"));
        hex::encode(&hasher.finalize()[..16])
    }

    pub fn run_name(&self) -> String {
        format!("{}-{}", self.command, &self.hash()[..12])
    }

    pub fn model_spec(&self) -> Result<ModelSpec, String> {
        serde_json::from_value(self.model.clone()).map_err(|e| format!("model content: {e}"))
    }
}

/// Resolve a model reference to its JSON content: `preset:NAME` or a path.
pub fn resolve_model(model_ref: &str) -> Result<serde_json::Value, String> {
    if let Some(name) = model_ref.strip_prefix("preset:") {
        let spec = preset(name).ok_or_else(|| {
            format!(
                "unknown preset `{name}`; run `idslab preset-list` for the available names"
            )
        })?;
        Ok(serde_json::to_value(&spec).expect("preset serializes"))
    } else {
        let bytes = std::fs::read(model_ref)
            .map_err(|e| format!("cannot read model file {model_ref}: {e}"))?;
        serde_json::from_slice(&bytes).map_err(|e| format!("model file {model_ref}: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_worker_count() {
        let mut a = ExperimentConfig {
            command: "ids".into(),
            model: resolve_model("preset:free-d1").unwrap(),
            ..Default::default()
        };
        let h0 = a.hash();
        a.workers = 7;
        assert_eq!(a.hash(), h0);
        a.master_seed = 1;
        assert_ne!(a.hash(), h0);
    }

    #[test]
    fn grids_are_monotone() {
        let lin = GridConfig { min: 0.5, max: 4.0, points: 50, log: false };
        let log = GridConfig { min: 0.003, max: 0.05, points: 24, log: true };
        for g in [lin, log] {
            let e = g.energies().unwrap();
            assert_eq!(e.len(), g.points);
            assert!(e.windows(2).all(|w| w[0] < w[1]));
            assert!((e[0] - g.min).abs() < 1e-12);
            assert!((e[g.points - 1] - g.max).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_preset_is_reported() {
        assert!(resolve_model("preset:nope").is_err());
    }
}
