//! Pipeline execution, artifact persistence, manifest records, result
//! caching, and byte-exact reproduction of recorded runs.

use crate::config::ExperimentConfig;
use idslab::model::{spectral_shift, validate_spec, BoxDiscretization, ValidatedSpec};
use idslab::{
    approximation_convergence, band_structure, empirical_ids, fit_from_ids, MonteCarlo,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum RunError {
    /// Bad configuration or an invalid model: exit status 1.
    Config(String),
    /// Numerical failure inside a pipeline: exit status 2.
    Numerical(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }
}

pub struct Artifact {
    pub kind: String,
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(kind: &str, name: &str, bytes: Vec<u8>) -> Self {
        Artifact { kind: kind.into(), name: name.into(), bytes }
    }

    fn json<T: Serialize>(kind: &str, name: &str, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
        bytes.push(b'\n');
        Artifact::new(kind, name, bytes)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub kind: String,
    pub path: String,
    pub sha256: String,
}

/// On-disk record of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub created_unix: u64,
    /// `complete` or `partial` (wall-time cap hit).
    pub status: String,
    pub artifacts: Vec<ArtifactRecord>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn validated_spec(config: &ExperimentConfig) -> Result<ValidatedSpec, RunError> {
    let spec = config.model_spec().map_err(RunError::Config)?;
    validate_spec(spec).map_err(|e| RunError::Config(format!("model validation: {e}")))
}

fn shifted_spec(config: &ExperimentConfig) -> Result<(ValidatedSpec, f64), RunError> {
    let spec = validated_spec(config)?;
    let mesh = BoxDiscretization::new(config.l.max(1), config.m);
    spectral_shift(&spec, &mesh)
        .map_err(|e| RunError::Numerical(format!("spectral normalization: {e}")))
}

fn monte_carlo(config: &ExperimentConfig) -> MonteCarlo {
    MonteCarlo {
        n_realizations: config.n_realizations,
        master_seed: config.master_seed,
        budget: config.budget_secs.map(Duration::from_secs),
    }
}

/// Run the configured pipeline; returns the artifacts and whether a
/// wall-time cap truncated the run.
pub fn execute(config: &ExperimentConfig) -> Result<(Vec<Artifact>, bool), RunError> {
    match config.command.as_str() {
        "validate" => {
            let spec = validated_spec(config)?;
            println!(
                "model ok: d={} D={} kind={:?} sup(support)={:?} hash={}",
                spec.d,
                spec.fiber,
                spec.kind,
                spec.sup_support(),
                spec.hash()
            );
            Ok((Vec::new(), false))
        }
        "bands" => {
            let (spec, e_bottom) = shifted_spec(config)?;
            let band = band_structure(
                &spec,
                None,
                config.k,
                config.theta_points,
                config.j_max,
                config.m,
            )
            .map_err(|e| RunError::Numerical(e.to_string()))?;
            println!(
                "bands: k={} grid={} j_max={} bottom_shift={e_bottom:.6e}",
                config.k, config.theta_points, config.j_max
            );
            Ok((
                vec![Artifact::new("bands-csv", "bands.csv", band.to_csv().into_bytes())],
                false,
            ))
        }
        "ids" => {
            let (spec, _) = shifted_spec(config)?;
            let disc = BoxDiscretization::new(config.l, config.m);
            let grid = config.e_grid.energies().map_err(RunError::Config)?;
            let est = empirical_ids(&spec, &disc, &grid, &monte_carlo(config))
                .map_err(|e| RunError::Numerical(e.to_string()))?;
            let exhausted = est.budget_exhausted;
            println!(
                "ids: L={} m={} n={} grid {}..{} ({} points){}",
                config.l,
                config.m,
                est.n_realizations,
                grid[0],
                grid[grid.len() - 1],
                grid.len(),
                if exhausted { " [budget exhausted]" } else { "" }
            );
            Ok((
                vec![
                    Artifact::json("ids-json", "ids.json", &est),
                    Artifact::new("ids-csv", "ids.csv", est.to_csv().into_bytes()),
                ],
                exhausted,
            ))
        }
        "lifshitz" => {
            let (spec, _) = shifted_spec(config)?;
            let disc = BoxDiscretization::new(config.l, config.m);
            let grid = config.e_grid.energies().map_err(RunError::Config)?;
            let est = empirical_ids(&spec, &disc, &grid, &monte_carlo(config))
                .map_err(|e| RunError::Numerical(e.to_string()))?;
            let exhausted = est.budget_exhausted;
            let fit = fit_from_ids(&est, spec.d, config.window)
                .map_err(|e| RunError::Numerical(e.to_string()))?;
            println!(
                "tail fit: slope {:.4} +- {:.4} over window [{}, {}] ({} points used, {} empty, {} out of regime)",
                fit.slope,
                fit.slope_stderr,
                config.window.0,
                config.window.1,
                fit.points.len(),
                fit.dropped_empty,
                fit.dropped_regime
            );
            let mut points_csv = String::from("log_energy,loglog_mass\n");
            for (x, y) in &fit.points {
                points_csv.push_str(&format!("{x},{y}\n"));
            }
            Ok((
                vec![
                    Artifact::json("ids-json", "ids.json", &est),
                    Artifact::new("ids-csv", "ids.csv", est.to_csv().into_bytes()),
                    Artifact::json("fit-json", "fit.json", &fit),
                    Artifact::new("points-csv", "points.csv", points_csv.into_bytes()),
                ],
                exhausted,
            ))
        }
        "compare-k" => {
            let (spec, _) = shifted_spec(config)?;
            if config.energies.is_empty() || config.ks.is_empty() {
                return Err(RunError::Config(
                    "compare-k needs --energies and --ks".into(),
                ));
            }
            let disc = BoxDiscretization::new(config.ref_l, config.m);
            let reference = empirical_ids(&spec, &disc, &config.energies, &monte_carlo(config))
                .map_err(|e| RunError::Numerical(e.to_string()))?;
            let rows = approximation_convergence(
                &spec,
                &config.ks,
                &config.energies,
                config.theta_points,
                config.m,
                &monte_carlo(config),
                &reference,
            )
            .map_err(|e| RunError::Numerical(e.to_string()))?;
            let mut csv = String::from("k,energy,mean,stderr,ref_mean,ref_stderr,deviation\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.k, r.energy, r.mean, r.stderr, r.ref_mean, r.ref_stderr, r.deviation
                ));
            }
            println!(
                "compare-k: ks={:?} at {} energies against L={} reference",
                config.ks,
                config.energies.len(),
                config.ref_l
            );
            Ok((
                vec![
                    Artifact::new("compare-k-csv", "compare_k.csv", csv.into_bytes()),
                    Artifact::json("reference-json", "reference.json", &reference),
                ],
                false,
            ))
        }
        other => Err(RunError::Config(format!("unknown command `{other}`"))),
    }
}

fn cache_hit(dir: &Path, config: &ExperimentConfig) -> bool {
    let manifest_path = dir.join("manifest.json");
    let Ok(bytes) = std::fs::read(&manifest_path) else {
        return false;
    };
    let Ok(manifest) = serde_json::from_slice::<Manifest>(&bytes) else {
        return false;
    };
    if manifest.config_hash != config.hash() || manifest.status != "complete" {
        return false;
    }
    manifest.artifacts.iter().all(|a| {
        std::fs::read(dir.join(&a.path))
            .map(|bytes| sha256_hex(&bytes) == a.sha256)
            .unwrap_or(false)
    })
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Run a config, writing artifacts and a manifest under
/// `<out_root>/<command>-<hash12>/`. Returns the process exit status.
pub fn run(config: &ExperimentConfig, out_root: &Path, force: bool) -> Result<i32, RunError> {
    let dir = out_root.join(config.run_name());
    if !force && cache_hit(&dir, config) {
        println!("cached: {}", dir.display());
        return Ok(0);
    }
    let (artifacts, exhausted) = execute(config)?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| RunError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let mut records = Vec::new();
    for artifact in &artifacts {
        let path = dir.join(&artifact.name);
        std::fs::write(&path, &artifact.bytes)
            .map_err(|e| RunError::Config(format!("cannot write {}: {e}", path.display())))?;
        records.push(ArtifactRecord {
            kind: artifact.kind.clone(),
            path: artifact.name.clone(),
            sha256: sha256_hex(&artifact.bytes),
        });
    }
    let manifest = Manifest {
        code_version: CODE_VERSION.into(),
        config: config.clone(),
        config_hash: config.hash(),
        created_unix: now_unix(),
        status: if exhausted { "partial" } else { "complete" }.into(),
        artifacts: records,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    let manifest_path = dir.join("manifest.json");
    std::fs::write(&manifest_path, bytes)
        .map_err(|e| RunError::Config(format!("cannot write manifest: {e}")))?;
    println!("wrote {}", manifest_path.display());
    Ok(if exhausted { 3 } else { 0 })
}

/// Re-run a recorded config and byte-compare against the manifest record;
/// missing payload files are restored from the recomputation. Returns 0
/// when every artifact matches.
pub fn reproduce(manifest_path: &Path) -> Result<i32, RunError> {
    let bytes = std::fs::read(manifest_path)
        .map_err(|e| RunError::Config(format!("cannot read manifest: {e}")))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| RunError::Config(format!("manifest parse: {e}")))?;
    if manifest.code_version != CODE_VERSION {
        eprintln!(
            "warning: manifest was written by version {} (running {}); comparing anyway",
            manifest.code_version, CODE_VERSION
        );
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let (artifacts, _) = execute(&manifest.config)?;
    let mut all_match = true;
    for record in &manifest.artifacts {
        let Some(recomputed) = artifacts.iter().find(|a| a.name == record.path) else {
            println!("missing from recomputation: {}", record.path);
            all_match = false;
            continue;
        };
        let recomputed_sha = sha256_hex(&recomputed.bytes);
        if recomputed_sha != record.sha256 {
            println!("mismatch: {} (recorded {} != recomputed {})",
                record.path, record.sha256, recomputed_sha);
            all_match = false;
            continue;
        }
        let on_disk = dir.join(&record.path);
        let disk_ok = std::fs::read(&on_disk)
            .map(|b| sha256_hex(&b) == record.sha256)
            .unwrap_or(false);
        if !disk_ok {
            std::fs::write(&on_disk, &recomputed.bytes)
                .map_err(|e| RunError::Config(format!("cannot restore {}: {e}", record.path)))?;
            println!("restored: {}", record.path);
        } else {
            println!("match: {}", record.path);
        }
    }
    Ok(if all_match { 0 } else { 1 })
}

/// Output root: flag value, else `IDSLAB_OUT`, else `./runs`.
pub fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("IDSLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}
