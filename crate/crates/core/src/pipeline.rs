//! End-to-end drivers shared by the command line: load the configured
//! inputs, train one or many seeds, and write reproducible artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{read_samples_jsonl, read_splits, SampleSet, SplitAssignment};
use crate::embedding::{Role, RoleStores};
use crate::error::{Error, Result};
use crate::io::{sha256_file, write_bytes_atomic, write_json_atomic};
use crate::kernel::TrainHyper;
use crate::parallel::{self, Exec};
use crate::train::{
    aggregate_runs, evaluate, format_table, save_checkpoint, train, Metrics, Provenance, RunReport, TrainedRun,
};

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "report.txt";

/// SHA-256 of every file a run reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InputDigests {
    pub samples_sha256: String,
    pub splits_sha256: String,
    pub store_files_sha256: BTreeMap<Role, String>,
}

pub struct Inputs {
    pub samples: SampleSet,
    pub splits: SplitAssignment,
    pub stores: RoleStores,
    pub digests: InputDigests,
}

/// The canonical description of a run, embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub hyper: TrainHyper,
    pub inputs: InputDigests,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let samples = read_samples_jsonl(&cfg.samples)?;
    let splits = read_splits(&cfg.splits)?;
    splits.check_against(&samples)?;
    let roles = cfg.model.kind.roles();
    let paths: BTreeMap<Role, &PathBuf> = cfg.stores.iter().filter(|(r, _)| roles.contains(r)).map(|(r, p)| (*r, p)).collect();
    let stores = RoleStores::load(&paths)?;
    let digests = InputDigests {
        samples_sha256: sha256_file(&cfg.samples)?,
        splits_sha256: sha256_file(&cfg.splits)?,
        store_files_sha256: paths
            .iter()
            .map(|(r, p)| sha256_file(p).map(|d| (*r, d)))
            .collect::<Result<_>>()?,
    };
    Ok(Inputs {
        samples,
        splits,
        stores,
        digests,
    })
}

/// Validates the config against the loaded inputs and pins every default.
pub fn resolve(cfg: &RunConfig, inputs: &Inputs) -> Result<ResolvedRun> {
    cfg.validate()?;
    let mut config = cfg.clone();
    config.resolve_model(&inputs.stores)?;
    let hyper = config.train_hyper()?;
    config.model.dropout = hyper.dropout;
    Ok(ResolvedRun {
        config,
        hyper,
        inputs: inputs.digests.clone(),
    })
}

pub struct SeedResult {
    pub run: TrainedRun,
    pub test: Metrics,
}

fn provenance(resolved: &ResolvedRun, run: &TrainedRun) -> Provenance {
    Provenance {
        samples_sha256: Some(resolved.inputs.samples_sha256.clone()),
        splits_sha256: Some(resolved.inputs.splits_sha256.clone()),
        ..run.provenance.clone()
    }
}

pub fn train_seed(resolved: &ResolvedRun, inputs: &Inputs, seed: u64, exec: Exec) -> Result<SeedResult> {
    let spec = &resolved.config.model;
    let mut run = train(spec, &inputs.samples, &inputs.splits, &inputs.stores, &resolved.hyper, seed, exec)?;
    run.provenance = provenance(resolved, &run);
    let test = evaluate(&run, &inputs.splits.test, &inputs.samples, &inputs.stores, exec)?;
    Ok(SeedResult { run, test })
}

/// Trains every configured seed, at most `jobs` at a time (0 = all cores),
/// and aggregates test metrics. Results do not depend on `jobs` or `exec`.
pub fn run_seeds(resolved: &ResolvedRun, inputs: &Inputs, jobs: usize, exec: Exec) -> Result<(Vec<SeedResult>, RunReport)> {
    let seeds = &resolved.config.seeds;
    let results = parallel::with_jobs(exec, jobs, || {
        parallel::map(exec, seeds, |&seed| train_seed(resolved, inputs, seed, exec))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let per_seed: Vec<Metrics> = results.iter().map(|r| r.test).collect();
    let agg = aggregate_runs(&per_seed, seeds)?;
    let config = serde_json::to_value(resolved).map_err(|e| Error::json("resolved config", e))?;
    let report = RunReport::new(config, agg, results[0].run.provenance.clone());
    Ok((results, report))
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

/// Writes the resolved config, each seed's checkpoint and test metrics, the
/// JSON report and its table. Each file is replaced atomically.
pub fn write_outputs(out: &Path, resolved: &ResolvedRun, results: &[SeedResult], report: Option<&RunReport>) -> Result<()> {
    write_json_atomic(&out.join(RESOLVED_CONFIG_FILE), resolved)?;
    for r in results {
        let dir = seed_dir(out, r.run.seed);
        save_checkpoint(&r.run, &dir)?;
        write_json_atomic(
            &dir.join("test_metrics.json"),
            &serde_json::json!({ "config": resolved, "seed": r.run.seed, "test": r.test }),
        )?;
    }
    if let Some(report) = report {
        write_json_atomic(&out.join(REPORT_FILE), report)?;
        let title = format!("{:?} test split, {} seed(s)", resolved.config.model.kind, report.seeds.len());
        write_bytes_atomic(&out.join(TABLE_FILE), format_table(&title, &report.mean, &report.std).as_bytes())?;
    }
    Ok(())
}
