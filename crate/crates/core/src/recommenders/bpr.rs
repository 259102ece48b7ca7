use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::factors::{dot, solve_implicit, Factors};
use super::RecommenderError;
use crate::rng;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BprParams {
    pub factors: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub epochs: usize,
    pub init_sd: f64,
    /// Confidence weight on input items when folding in a new user.
    pub fold_in_confidence: f64,
    /// Ridge penalty of the fold-in solve.
    pub fold_in_regularization: f64,
}

impl Default for BprParams {
    fn default() -> Self {
        BprParams {
            factors: 64,
            learning_rate: 0.05,
            regularization: 0.0025,
            epochs: 30,
            init_sd: 0.1,
            fold_in_confidence: 40.0,
            fold_in_regularization: 1.0,
        }
    }
}

/// A (user, consumed item, unconsumed item) training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub user: u32,
    pub positive: u32,
    pub negative: u32,
}

/// Matrix factorization trained on pairwise rankings with SGD.
///
/// Training runs on one thread so results are reproducible for a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct BprModel {
    users: Factors,
    items: Factors,
    gramian: DMatrix<f64>,
    fold_in_confidence: f64,
    regularization: f64,
}

fn sample_negative<R: Rng>(rng: &mut R, consumed: &[u32], n_items: usize) -> Option<u32> {
    if consumed.len() >= n_items {
        return None;
    }
    loop {
        let j = rng.random_range(0..n_items as u32);
        if consumed.binary_search(&j).is_err() {
            return Some(j);
        }
    }
}

/// Draws `n` triplets uniformly over observed entries, one negative each.
pub fn sample_triplets(matrix: &CsrMatrix, n: usize, seed: u64) -> Vec<Triplet> {
    let mut rng = rng::seeded(seed, &[rng::fnv1a(*b"bpr_triplets")]);
    let positives: Vec<(u32, u32)> =
        (0..matrix.n_rows()).flat_map(|u| matrix.row(u).iter().map(move |&i| (u as u32, i))).collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n && !positives.is_empty() {
        let (u, i) = positives[rng.random_range(0..positives.len())];
        if let Some(j) = sample_negative(&mut rng, matrix.row(u as usize), matrix.n_cols()) {
            out.push(Triplet { user: u, positive: i, negative: j });
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl BprModel {
    pub(crate) fn train(matrix: &CsrMatrix, params: &BprParams, seed: u64) -> Result<BprModel, RecommenderError> {
        if params.factors == 0 {
            return Err(RecommenderError::InvalidHyperparameter("bpr.factors must be positive".into()));
        }
        if !(params.learning_rate > 0.0 && params.regularization > 0.0 && params.init_sd > 0.0) {
            return Err(RecommenderError::InvalidHyperparameter(
                "bpr.learning_rate, bpr.regularization and bpr.init_sd must be positive".into(),
            ));
        }
        if !(params.fold_in_confidence >= 0.0 && params.fold_in_regularization > 0.0) {
            return Err(RecommenderError::InvalidHyperparameter(
                "bpr.fold_in_confidence must be non-negative and bpr.fold_in_regularization positive".into(),
            ));
        }
        let mut rng = rng::seeded(seed, &[rng::fnv1a(*b"bpr")]);
        let k = params.factors;
        let mut users = Factors::random(matrix.n_rows(), k, params.init_sd, &mut rng);
        let mut items = Factors::random(matrix.n_cols(), k, params.init_sd, &mut rng);
        let mut positives: Vec<(u32, u32)> =
            (0..matrix.n_rows()).flat_map(|u| matrix.row(u).iter().map(move |&i| (u as u32, i))).collect();

        let (lr, reg) = (params.learning_rate, params.regularization);
        let mut xu = vec![0.0; k];
        for epoch in 0..params.epochs {
            positives.shuffle(&mut rng);
            for &(u, i) in &positives {
                let Some(j) = sample_negative(&mut rng, matrix.row(u as usize), matrix.n_cols()) else {
                    continue;
                };
                xu.copy_from_slice(users.row(u as usize));
                let x_uij: f64 = {
                    let (yi, yj) = (items.row(i as usize), items.row(j as usize));
                    (0..k).map(|d| xu[d] * (yi[d] - yj[d])).sum()
                };
                let g = sigmoid(-x_uij);
                {
                    let yi = items.row(i as usize).to_vec();
                    let yj = items.row(j as usize);
                    let x = users.row_mut(u as usize);
                    for d in 0..k {
                        x[d] += lr * (g * (yi[d] - yj[d]) - reg * xu[d]);
                    }
                }
                let yi = items.row_mut(i as usize);
                for d in 0..k {
                    yi[d] += lr * (g * xu[d] - reg * yi[d]);
                }
                let yj = items.row_mut(j as usize);
                for d in 0..k {
                    yj[d] += lr * (-g * xu[d] - reg * yj[d]);
                }
            }
            log::debug!("BPR epoch {} of {}", epoch + 1, params.epochs);
        }
        Ok(Self::from_parts(users, items, params.fold_in_confidence, params.fold_in_regularization))
    }

    pub(crate) fn from_parts(users: Factors, items: Factors, fold_in_confidence: f64, regularization: f64) -> BprModel {
        let gramian = items.gramian();
        BprModel { users, items, gramian, fold_in_confidence, regularization }
    }

    pub fn user_factors(&self) -> &Factors {
        &self.users
    }

    pub fn item_factors(&self) -> &Factors {
        &self.items
    }

    pub(crate) fn factors(&self) -> &Factors {
        &self.items
    }

    /// New users are placed with a confidence-weighted least-squares solve
    /// against the trained item factors.
    pub(crate) fn fold_in(&self, items: &[u32]) -> Vec<f64> {
        solve_implicit(&self.items, &self.gramian, items, self.fold_in_confidence, self.regularization)
    }

    /// Mean `−ln σ(x_u·(y_i − y_j))` over the triplets, using the trained
    /// user factors.
    pub fn ranking_loss(&self, triplets: &[Triplet]) -> f64 {
        let total: f64 = triplets
            .iter()
            .map(|t| {
                let x = self.users.row(t.user as usize);
                let s = dot(x, self.items.row(t.positive as usize)) - dot(x, self.items.row(t.negative as usize));
                -sigmoid(s).ln()
            })
            .sum();
        total / triplets.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recommenders::tests::widened_blocks;

    #[test]
    fn training_lowers_the_ranking_loss() {
        let m = widened_blocks(20, 15);
        let triplets = sample_triplets(&m, 2000, 1);
        let untrained = BprModel::train(&m, &BprParams { factors: 8, epochs: 0, ..BprParams::default() }, 3).unwrap();
        let trained = BprModel::train(&m, &BprParams { factors: 8, epochs: 30, ..BprParams::default() }, 3).unwrap();
        let (before, after) = (untrained.ranking_loss(&triplets), trained.ranking_loss(&triplets));
        assert!((before - std::f64::consts::LN_2).abs() < 0.05, "{before}");
        assert!(after < 0.5 * before, "{before} -> {after}");
    }

    #[test]
    fn negatives_are_unconsumed() {
        let m = widened_blocks(5, 4);
        for t in sample_triplets(&m, 500, 2) {
            assert!(m.contains(t.user as usize, t.positive));
            assert!(!m.contains(t.user as usize, t.negative));
        }
    }
}
