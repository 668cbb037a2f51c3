//! Experiment runner: JSON configs in, deterministic CSV/JSON artifacts out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use commands::Command;
use config::{resolve_output_dir, DataSource, ExperimentConfig};
use error::CliError;
use output::OutDir;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// One configured run and the directory it writes to.
#[derive(Clone, Debug)]
pub struct Job {
    pub label: String,
    pub config: ExperimentConfig,
    pub out: PathBuf,
}

/// Loads every config, applies overrides and assigns output directories.
/// A single config writes to the resolved output directory itself; several
/// configs each get `<out>/<label>`, so labels must be unique.
pub fn plan_jobs(paths: &[PathBuf], overrides: &[String], standardize: bool, out_flag: Option<&Path>) -> Result<Vec<Job>, CliError> {
    if paths.is_empty() {
        return Err(CliError::Config("at least one --config is required".into()));
    }
    let mut jobs = Vec::with_capacity(paths.len());
    let mut seen = BTreeSet::new();
    for path in paths {
        let mut config = ExperimentConfig::load(path, overrides)?;
        if standardize {
            if let DataSource::Mnist { standardize, .. } = &mut config.data {
                *standardize = true;
            }
        }
        let stem = path.file_stem().map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
        let label = config.label(&stem);
        if !seen.insert(label.clone()) {
            return Err(CliError::Config(format!("duplicate experiment label `{label}`")));
        }
        let root = resolve_output_dir(out_flag, &config);
        let out = if paths.len() == 1 { root } else { root.join(&label) };
        jobs.push(Job { label, config, out });
    }
    Ok(jobs)
}

/// Runs `cmd` for every job on up to `workers` threads. Results come back in
/// job order regardless of scheduling.
pub fn run_jobs(cmd: Command, jobs: &[Job], workers: usize) -> Vec<Result<(), CliError>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<(), CliError>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = OutDir::create(&job.out).and_then(|out| cmd.run(&job.config, &out));
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    results.into_inner().expect("result lock").into_iter().map(|r| r.expect("every job ran")).collect()
}
