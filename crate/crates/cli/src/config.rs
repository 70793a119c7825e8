//! Run-config files.
//!
//! Every key is optional; anything left out takes the value from
//! [`RunConfig::rag_default`]. `space` and `catalog` are paths relative to
//! the config file. See `configs/default.toml` for the full schema.

use std::fs;
use std::path::{Path, PathBuf};

use ragtune_core::simrag::ModelCatalog;
use ragtune_core::{Algorithm, NoiseModel, ObjectiveSpec, RunConfig, SearchSpace};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    algorithm: Option<Algorithm>,
    iterations: Option<usize>,
    initial: Option<usize>,
    mc_draws: Option<usize>,
    space: Option<PathBuf>,
    catalog: Option<PathBuf>,
    objectives: Option<Vec<ObjectiveSpec>>,
    noise: Option<NoiseModel>,
    #[serde(default)]
    workload: WorkloadSection,
    #[serde(default)]
    acquisition: AcquisitionSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkloadSection {
    seed: Option<u64>,
    train_queries: Option<usize>,
    test_queries: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AcquisitionSection {
    raw_samples: Option<usize>,
    refine_starts: Option<usize>,
    sweeps: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub sha256: String,
    pub run: RunConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Parses run-config text. Relative `space`/`catalog` paths resolve
/// against `base`.
pub fn parse_run_config(text: &str, base: &Path, seed: u64) -> Result<RunConfig, CliError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let mut cfg = RunConfig::rag_default(file.algorithm.unwrap_or(Algorithm::Nehvi), seed);
    if let Some(p) = file.space {
        let p = base.join(p);
        cfg.space =
            SearchSpace::from_toml_str(&read(&p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = file.catalog {
        let p = base.join(p);
        cfg.catalog =
            ModelCatalog::from_toml_str(&read(&p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
    }
    if let Some(o) = file.objectives {
        cfg.objectives = o;
    }
    if let Some(n) = file.noise {
        cfg.noise = n;
    }
    cfg.iterations = file.iterations.unwrap_or(cfg.iterations);
    cfg.initial = file.initial.unwrap_or(cfg.initial);
    cfg.mc_draws = file.mc_draws.unwrap_or(cfg.mc_draws);
    cfg.workload_seed = file.workload.seed.unwrap_or(cfg.workload_seed);
    cfg.train_queries = file.workload.train_queries.unwrap_or(cfg.train_queries);
    cfg.test_queries = file.workload.test_queries.unwrap_or(cfg.test_queries);
    let a = file.acquisition;
    cfg.propose.raw_samples = a.raw_samples.unwrap_or(cfg.propose.raw_samples);
    cfg.propose.refine_starts = a.refine_starts.unwrap_or(cfg.propose.refine_starts);
    cfg.propose.sweeps = a.sweeps.unwrap_or(cfg.propose.sweeps);
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn load_run_config(path: &Path, seed: u64) -> Result<LoadedConfig, CliError> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(LoadedConfig {
        path: path.to_path_buf(),
        sha256: sha256_hex(text.as_bytes()),
        run: parse_run_config(&text, base, seed)?,
    })
}

/// Loads a space file, or the space a run config points at.
pub fn load_space(path: &Path) -> Result<SearchSpace, CliError> {
    let text = read(path)?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if table.contains_key("parameters") {
        return SearchSpace::from_toml_str(&text).map_err(|e| CliError::Space(e.to_string()));
    }
    Ok(load_run_config(path, 0)?.run.space)
}
