use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, HistoryMode};
use super::run::{records_per_algorithm, ExperimentResult, FoldSummary};
use super::HarnessError;
use crate::metrics::write_per_user;
use crate::recommenders::{Algorithm, Hyperparameters};

pub const POOLING_POLICY: &str =
    "per-user records of every fold's test users are pooled; each cell is one median (mean for NDCG) over the pool";

#[derive(Debug, Serialize)]
struct Seeds {
    split: u64,
    algorithms: u64,
    sample_items: Option<u64>,
    synthetic: Option<u64>,
}

#[derive(Debug, Serialize)]
struct DatasetSummary {
    users: usize,
    items: usize,
    interactions: usize,
    sampled_users_dropped: Option<usize>,
    sampled_items_dropped: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    seeds: Seeds,
    pooling: &'static str,
    history: HistoryMode,
    epsilon: f64,
    dataset: DatasetSummary,
    roster: &'a [Algorithm],
    records_per_algorithm: Vec<(Algorithm, usize)>,
    hyperparameters: Hyperparameters,
    folds: &'a [FoldSummary],
    failures: usize,
    exclusion_violations: usize,
    finished_unix_seconds: u64,
    wall_seconds: f64,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml().as_bytes()))
}

fn write_file(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(&path, contents).map_err(|source| HarnessError::Io { path, source })
}

/// Writes report.tsv, report.json, per_user.tsv and provenance.json, plus
/// the filter report, the decile bins and the failed users.
pub fn write_outputs(result: &ExperimentResult, config: &ExperimentConfig, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
    write_file(dir.join("report.tsv"), result.report.to_tsv())?;
    write_file(dir.join("report.json"), result.report.to_json())?;

    let mut per_user = Vec::new();
    write_per_user(&result.records, &mut per_user).expect("writing to memory");
    write_file(dir.join("per_user.tsv"), per_user)?;

    let mut failures = String::from("user_id\talgorithm\tfold\treason\n");
    for f in &result.failures {
        failures.push_str(&format!("{}\t{}\t{}\t{}\n", f.user_id, f.algorithm, f.fold, f.reason));
    }
    write_file(dir.join("failures.tsv"), failures)?;
    write_file(dir.join("filter_report.json"), result.prepared.filter_report.to_json())?;
    let mut bins = Vec::new();
    result.prepared.bins.write_tsv(&mut bins).expect("writing to memory");
    write_file(dir.join("bins.tsv"), bins)?;

    let d = &result.prepared.dataset;
    let provenance = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: config_hash(config),
        seeds: Seeds {
            split: config.split.seed,
            algorithms: config.algorithms.seed,
            sample_items: config.data.sample_items.map(|_| config.data.sample_seed),
            synthetic: config.data.synthetic.as_ref().map(|s| s.seed),
        },
        pooling: POOLING_POLICY,
        history: config.metrics.history,
        epsilon: config.metrics.epsilon,
        dataset: DatasetSummary {
            users: d.n_users(),
            items: d.n_items(),
            interactions: d.n_interactions(),
            sampled_users_dropped: result.prepared.sampled.map(|s| s.0),
            sampled_items_dropped: result.prepared.sampled.map(|s| s.1),
        },
        roster: &config.algorithms.roster,
        records_per_algorithm: records_per_algorithm(&result.records).into_iter().collect(),
        hyperparameters: config.hyperparameters(),
        folds: &result.folds,
        failures: result.failures.len(),
        exclusion_violations: result.exclusion_violations(),
        finished_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        wall_seconds: result.wall_seconds,
    };
    let path = dir.join("provenance.json");
    let file = fs::File::create(&path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &provenance).expect("provenance serializes");
    writeln!(out).and_then(|_| out.flush()).map_err(|source| HarnessError::Io { path, source })
}
