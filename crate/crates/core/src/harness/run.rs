use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, HistoryMode};
use super::HarnessError;
use crate::dataset::{self, apply_filters, make_split_plan, Dataset, FilterReport, Fold, SplitPlan};
use crate::metrics::{
    build_report, kendall_tau_binned, kl_divergence, moment_summary, ndcg_at_k, percent_delta, BiasReport,
    PerUserBiasRecord,
};
use crate::popularity::{
    bin_distribution, build_decile_bins, history_distribution, recommendation_distribution, DecileBins,
    DistributionKind, PopularityDistribution, PopularityIndex,
};
use crate::recommenders::{self, Algorithm, Model, RecommendationList, RecommenderError};
use crate::rng;

/// Everything derived from the data before any model is trained.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub filter_report: FilterReport,
    /// Users and items dropped when sampling, if sampling is configured.
    pub sampled: Option<(usize, usize)>,
    pub popularity: PopularityIndex,
    pub bins: DecileBins,
    pub plan: SplitPlan,
}

/// Loads (or generates), filters, optionally samples, and splits the data.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    let (interactions, users) = match &config.data.synthetic {
        Some(spec) => {
            let data = spec.generate()?;
            (data.interactions, data.users)
        }
        None => {
            let parsed = dataset::read_interactions(&config.data.interactions)?;
            if parsed.malformed > 0 {
                log::warn!("skipped {} malformed of {} interaction lines", parsed.malformed, parsed.lines);
            }
            (parsed.interactions, dataset::read_users(&config.data.users)?)
        }
    };
    let (mut data, filter_report) = apply_filters(&interactions, &users, &config.filter)?;
    let mut sampled = None;
    if let Some(n) = config.data.sample_items {
        let before = (data.n_users(), data.n_items());
        data = dataset::sample_items(&data, n, config.data.sample_seed)?;
        sampled = Some((before.0 - data.n_users(), before.1 - data.n_items()));
    }
    let popularity = PopularityIndex::compute(&data);
    let bins = build_decile_bins(&popularity)?;
    let plan = make_split_plan(&data, &config.split)?;
    Ok(Prepared { dataset: data, filter_report, sampled, popularity, bins, plan })
}

/// Which of a fold's held-out user groups to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    Test,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserFailure {
    pub user_id: String,
    pub algorithm: Algorithm,
    pub fold: usize,
    pub reason: String,
}

/// What one per-user evaluation saw; handed to an inspector if one is set.
#[derive(Debug)]
pub struct Inspection<'a> {
    pub algorithm: Algorithm,
    pub fold: usize,
    pub user: u32,
    pub input: &'a [u32],
    pub excluded: &'a [u32],
    pub list: &'a RecommendationList,
}

pub type Inspector<'a> = dyn Fn(&Inspection<'_>) + Sync + 'a;

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub algorithm: Algorithm,
    pub fold: usize,
    pub evaluated: usize,
    pub records: Vec<PerUserBiasRecord>,
    pub failures: Vec<UserFailure>,
    /// Recommended items that were in the user's exclusion set. Always zero
    /// unless a model breaks its contract.
    pub exclusion_violations: usize,
    pub train_seconds: f64,
    pub evaluate_seconds: f64,
}

impl FoldOutcome {
    pub fn failure_rate(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.failures.len() as f64 / self.evaluated as f64
        }
    }
}

pub fn model_seed(base: u64, algorithm: Algorithm, fold: usize) -> u64 {
    rng::derive_seed(base, &[rng::fnv1a(algorithm.name().bytes()), fold as u64])
}

/// Trains `algorithm` on the fold's training users only.
pub fn train_fold_model(prepared: &Prepared, fold: &Fold, algorithm: Algorithm, config: &ExperimentConfig) -> Result<Model, HarnessError> {
    let matrix = prepared.dataset.submatrix(&fold.train);
    let seed = model_seed(config.algorithms.seed, algorithm, fold.index);
    Ok(recommenders::train(algorithm, &matrix, &config.hyperparameters(), seed)?)
}

/// Trains one model on the fold and evaluates every user of `population`.
pub fn run_fold(
    prepared: &Prepared,
    fold_index: usize,
    algorithm: Algorithm,
    config: &ExperimentConfig,
    population: Population,
    inspector: Option<&Inspector<'_>>,
) -> Result<FoldOutcome, HarnessError> {
    let fold = prepared
        .plan
        .folds
        .get(fold_index)
        .ok_or_else(|| HarnessError::Config(format!("fold {fold_index} does not exist")))?;
    let started = Instant::now();
    let model = train_fold_model(prepared, fold, algorithm, config)?;
    let train_seconds = started.elapsed().as_secs_f64();
    let started = Instant::now();
    let outcome = evaluate_fold(prepared, fold, &model, config, population, inspector);
    let (records, failures, exclusion_violations, evaluated) = outcome;
    Ok(FoldOutcome {
        algorithm,
        fold: fold_index,
        evaluated,
        records,
        failures,
        exclusion_violations,
        train_seconds,
        evaluate_seconds: started.elapsed().as_secs_f64(),
    })
}

type Evaluated = (Vec<PerUserBiasRecord>, Vec<UserFailure>, usize, usize);

/// Evaluates a trained model on a fold's test or validation users.
pub fn evaluate_fold(
    prepared: &Prepared,
    fold: &Fold,
    model: &Model,
    config: &ExperimentConfig,
    population: Population,
    inspector: Option<&Inspector<'_>>,
) -> Evaluated {
    let users = match population {
        Population::Test => &fold.test,
        Population::Validation => &fold.validation,
    };
    let violations = AtomicUsize::new(0);
    let results: Vec<Result<PerUserBiasRecord, UserFailure>> = users
        .par_iter()
        .map(|&u| {
            evaluate_user(prepared, fold, model, config, u, inspector, &violations).map_err(|reason| UserFailure {
                user_id: prepared.dataset.user_id(u).to_string(),
                algorithm: model.algorithm(),
                fold: fold.index,
                reason,
            })
        })
        .collect();
    let mut records = Vec::with_capacity(users.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    (records, failures, violations.into_inner(), users.len())
}

fn describe(e: RecommenderError) -> String {
    match e {
        RecommenderError::NoKnownItems(_) => "no known input items".to_string(),
        RecommenderError::NotEnoughItems { .. } => "no recommendable items".to_string(),
        other => other.to_string(),
    }
}

fn evaluate_user(
    prepared: &Prepared,
    fold: &Fold,
    model: &Model,
    config: &ExperimentConfig,
    user: u32,
    inspector: Option<&Inspector<'_>>,
    violations: &AtomicUsize,
) -> Result<PerUserBiasRecord, String> {
    let split = fold.holdouts.get(&user).ok_or("user has no holdout split")?;
    let history = match config.metrics.history {
        HistoryMode::Full => history_distribution(user, &prepared.dataset, &prepared.popularity),
        HistoryMode::Input => {
            PopularityDistribution::from_items(user, DistributionKind::History, &split.input, &prepared.popularity)
        }
    }
    .map_err(|e| e.to_string())?;
    if history.is_empty() {
        return Err("empty history".into());
    }

    let k = history.len();
    let n = k.max(10);
    let filter = model.algorithm() != Algorithm::Pop || config.pop.filter_consumed;
    let excluded: &[u32] = if filter { &split.input } else { &[] };
    if n + excluded.len() > model.n_items() {
        return Err("no recommendable items".into());
    }
    let repr = model.fold_in(&split.input).map_err(describe)?;
    let list = model.recommend(&repr, n, excluded).map_err(describe)?;

    let bad = list.items().filter(|i| excluded.binary_search(i).is_ok()).count();
    if bad > 0 {
        violations.fetch_add(bad, Ordering::Relaxed);
    }
    if let Some(inspect) = inspector {
        inspect(&Inspection { algorithm: model.algorithm(), fold: fold.index, user, input: &split.input, excluded, list: &list });
    }

    let recommended = recommendation_distribution(user, &list, k, &prepared.popularity).map_err(|e| e.to_string())?;
    let eps = config.metrics.epsilon;
    let h_bins = bin_distribution(&history, &prepared.bins, eps).map_err(|e| e.to_string())?;
    let r_bins = bin_distribution(&recommended, &prepared.bins, eps).map_err(|e| e.to_string())?;
    let h_mom = moment_summary(&history.values).map_err(|e| e.to_string())?.as_array();
    let r_mom = moment_summary(&recommended.values).map_err(|e| e.to_string())?.as_array();
    let pct_delta = std::array::from_fn(|m| percent_delta(h_mom[m], r_mom[m]));
    let ranked: Vec<u32> = list.items().collect();
    let ndcg = ndcg_at_k(&ranked, &split.holdout, 10).map_err(|e| e.to_string())?;

    Ok(PerUserBiasRecord {
        user_id: prepared.dataset.user_id(user).to_string(),
        gender: prepared.dataset.gender(user),
        algorithm: model.algorithm(),
        fold: fold.index,
        pct_delta,
        kl: kl_divergence(&h_bins, &r_bins),
        kendall_tau: kendall_tau_binned(&h_bins.counts, &r_bins.counts),
        ndcg_at_10: ndcg,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldSummary {
    pub algorithm: Algorithm,
    pub fold: usize,
    pub evaluated: usize,
    pub records: usize,
    pub failures: usize,
    pub exclusion_violations: usize,
    pub train_seconds: f64,
    pub evaluate_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub report: BiasReport,
    /// Pooled test-user records sorted by (algorithm, user id).
    pub records: Vec<PerUserBiasRecord>,
    pub failures: Vec<UserFailure>,
    pub folds: Vec<FoldSummary>,
    pub prepared: Prepared,
    pub wall_seconds: f64,
}

impl ExperimentResult {
    pub fn exclusion_violations(&self) -> usize {
        self.folds.iter().map(|f| f.exclusion_violations).sum()
    }
}

/// Runs every fold for every algorithm in the roster and pools the test
/// users' records across folds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    run_experiment_with(config, None)
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    inspector: Option<&Inspector<'_>>,
) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let prepared = prepare(config)?;
    log::info!(
        "{} users, {} items, {} interactions after filtering",
        prepared.dataset.n_users(),
        prepared.dataset.n_items(),
        prepared.dataset.n_interactions()
    );
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut folds = Vec::new();
    let mut invalid = Vec::new();
    for &algorithm in &config.algorithms.roster {
        for f in 0..prepared.plan.folds.len() {
            let outcome = run_fold(&prepared, f, algorithm, config, Population::Test, inspector)?;
            log::info!(
                "{algorithm} fold {f}: {} users, {} failed, trained in {:.2}s",
                outcome.evaluated,
                outcome.failures.len(),
                outcome.train_seconds
            );
            if outcome.failure_rate() > config.algorithms.max_failure_rate {
                invalid.push(format!(
                    "{algorithm} fold {f}: {} of {} users failed",
                    outcome.failures.len(),
                    outcome.evaluated
                ));
            }
            folds.push(FoldSummary {
                algorithm,
                fold: f,
                evaluated: outcome.evaluated,
                records: outcome.records.len(),
                failures: outcome.failures.len(),
                exclusion_violations: outcome.exclusion_violations,
                train_seconds: outcome.train_seconds,
                evaluate_seconds: outcome.evaluate_seconds,
            });
            records.extend(outcome.records);
            failures.extend(outcome.failures);
        }
    }
    if !invalid.is_empty() {
        return Err(HarnessError::InvalidFolds(invalid));
    }
    records.sort_by(|a, b| (a.algorithm, &a.user_id).cmp(&(b.algorithm, &b.user_id)));
    failures.sort_by(|a, b| (a.algorithm, &a.user_id).cmp(&(b.algorithm, &b.user_id)));
    let report = build_report(&records)?;
    Ok(ExperimentResult { report, records, failures, folds, prepared, wall_seconds: started.elapsed().as_secs_f64() })
}

/// Number of pooled records per algorithm.
pub fn records_per_algorithm(records: &[PerUserBiasRecord]) -> BTreeMap<Algorithm, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.algorithm).or_insert(0) += 1;
    }
    counts
}
