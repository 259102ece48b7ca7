use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{evaluate_fold, model_seed, Population, Prepared};
use super::HarnessError;
use crate::recommenders::{self, Algorithm, Hyperparameters};

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub hyperparameters: Hyperparameters,
    /// Mean NDCG@10 over every fold's validation users.
    pub mean_ndcg: f64,
    pub users: usize,
}

/// Grid search over candidate hyperparameters, scored on validation users
/// only. Test users are never touched. Returns one point per candidate in
/// input order; pick the best with [`best`].
pub fn grid_search(
    prepared: &Prepared,
    config: &ExperimentConfig,
    algorithm: Algorithm,
    candidates: &[Hyperparameters],
) -> Result<Vec<SweepPoint>, HarnessError> {
    let mut points = Vec::with_capacity(candidates.len());
    for hp in candidates {
        let mut total = 0.0;
        let mut users = 0;
        for fold in &prepared.plan.folds {
            let matrix = prepared.dataset.submatrix(&fold.train);
            let seed = model_seed(config.algorithms.seed, algorithm, fold.index);
            let model = recommenders::train(algorithm, &matrix, hp, seed)?;
            let (records, _, _, _) = evaluate_fold(prepared, fold, &model, config, Population::Validation, None);
            total += records.iter().map(|r| r.ndcg_at_10).sum::<f64>();
            users += records.len();
        }
        let mean_ndcg = if users == 0 { 0.0 } else { total / users as f64 };
        log::info!("{algorithm} candidate: mean validation NDCG@10 {mean_ndcg:.4} over {users} users");
        points.push(SweepPoint { hyperparameters: hp.clone(), mean_ndcg, users });
    }
    Ok(points)
}

/// The highest-scoring point; the earliest wins ties.
pub fn best(points: &[SweepPoint]) -> Option<&SweepPoint> {
    points.iter().reduce(|a, b| if b.mean_ndcg > a.mean_ndcg { b } else { a })
}
