//! Parallel Monte-Carlo execution.

use std::path::Path;

use rayon::prelude::*;

use reprocs_core::pipeline::{run_single, ExperimentReport, ExperimentSpec};

use crate::config::Config;
use crate::error::CliError;

/// Runs every seed of `spec` on up to `jobs` threads (all cores if `None`).
/// The report is identical for any thread count.
pub fn run_spec(spec: &ExperimentSpec, seeds: &[u64], jobs: Option<usize>) -> Result<ExperimentReport, CliError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config {
            key: "jobs".into(),
            reason: e.to_string(),
        })?;
    let runs = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .flat_map_iter(|(i, &seed)| run_single(spec, i, seed))
            .collect::<Vec<_>>()
    });
    let names = spec.alignment.iter().map(|a| a.name.clone()).collect();
    Ok(ExperimentReport::from_runs(runs, names, &spec.modes))
}

pub fn run_config(cfg: &Config, base_dir: &Path, jobs: Option<usize>) -> Result<ExperimentReport, CliError> {
    let spec = cfg.to_spec(base_dir)?;
    run_spec(&spec, &cfg.seeds(), jobs)
}
