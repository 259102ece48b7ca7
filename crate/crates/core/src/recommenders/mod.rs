//! Baseline, neighborhood and factorization recommenders behind one
//! train / fold-in / recommend contract.
//!
//! Models are trained on a binary user × item matrix of training users and
//! serve users they have never seen through [`Model::fold_in`], which builds
//! a representation from the user's input items alone.

mod als;
mod baseline;
mod bpr;
mod factors;
mod itemknn;
mod persist;
mod slim;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::sparse::CsrMatrix;

pub use als::{AlsModel, AlsParams};
pub use baseline::{PopParams, PopularityModel};
pub use bpr::{sample_triplets, BprModel, BprParams, Triplet};
pub use factors::Factors;
pub use itemknn::{item_similarities, ItemKnnModel, ItemKnnParams};
pub use persist::{from_bytes, load_model, save_model, sidecar_path, to_bytes, FORMAT_VERSION};
pub use slim::{SlimModel, SlimParams};

#[derive(Debug, Error)]
pub enum RecommenderError {
    #[error("training matrix is empty")]
    EmptyTrainingData,
    #[error("none of the {0} input items is known to the model")]
    NoKnownItems(usize),
    #[error("requested {requested} recommendations but only {available} items are recommendable")]
    NotEnoughItems { requested: usize, available: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "RAND")]
    Rand,
    #[serde(rename = "POP")]
    Pop,
    #[serde(rename = "ItemKNN")]
    ItemKnn,
    #[serde(rename = "SLIM")]
    Slim,
    #[serde(rename = "ALS")]
    Als,
    #[serde(rename = "BPR")]
    Bpr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] =
        [Algorithm::Rand, Algorithm::Pop, Algorithm::ItemKnn, Algorithm::Slim, Algorithm::Als, Algorithm::Bpr];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rand => "RAND",
            Algorithm::Pop => "POP",
            Algorithm::ItemKnn => "ItemKNN",
            Algorithm::Slim => "SLIM",
            Algorithm::Als => "ALS",
            Algorithm::Bpr => "BPR",
        }
    }

    fn tag(self) -> u8 {
        self as u8
    }

    fn from_tag(tag: u8) -> Option<Algorithm> {
        Algorithm::ALL.get(tag as usize).copied()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// Per-variant training settings. Every field has a default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub pop: PopParams,
    pub itemknn: ItemKnnParams,
    pub slim: SlimParams,
    pub als: AlsParams,
    pub bpr: BprParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub item: u32,
    pub score: f64,
}

/// Ranked recommendations, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    ranked: Vec<ScoredItem>,
}

impl RecommendationList {
    pub fn new(ranked: Vec<ScoredItem>) -> RecommendationList {
        RecommendationList { ranked }
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn ranked(&self) -> &[ScoredItem] {
        &self.ranked
    }

    pub fn items(&self) -> impl Iterator<Item = u32> + '_ {
        self.ranked.iter().map(|s| s.item)
    }
}

/// What a model needs to score items for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRepresentation {
    /// Known input items, sorted.
    pub items: Vec<u32>,
    /// Latent factor for the factorization models.
    pub factors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Params {
    Random,
    Popularity(PopularityModel),
    ItemKnn(ItemKnnModel),
    Slim(SlimModel),
    Als(AlsModel),
    Bpr(BprModel),
}

/// A trained recommender. Immutable; scoring is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    algorithm: Algorithm,
    seed: u64,
    hyperparameters: Hyperparameters,
    n_items: usize,
    /// Number of training users per item.
    item_support: Vec<u32>,
    params: Params,
}

/// Trains `algorithm` on the binary matrix of training users.
pub fn train(
    algorithm: Algorithm,
    matrix: &CsrMatrix,
    hyperparameters: &Hyperparameters,
    seed: u64,
) -> Result<Model, RecommenderError> {
    if matrix.nnz() == 0 {
        return Err(RecommenderError::EmptyTrainingData);
    }
    let item_support = matrix.column_counts();
    let params = match algorithm {
        Algorithm::Rand => Params::Random,
        Algorithm::Pop => Params::Popularity(PopularityModel::train(&item_support)),
        Algorithm::ItemKnn => Params::ItemKnn(ItemKnnModel::train(matrix, &hyperparameters.itemknn)?),
        Algorithm::Slim => Params::Slim(SlimModel::train(matrix, &hyperparameters.slim)?),
        Algorithm::Als => Params::Als(AlsModel::train(matrix, &hyperparameters.als, seed)?),
        Algorithm::Bpr => Params::Bpr(BprModel::train(matrix, &hyperparameters.bpr, seed)?),
    };
    Ok(Model {
        algorithm,
        seed,
        hyperparameters: hyperparameters.clone(),
        n_items: matrix.n_cols(),
        item_support,
        params,
    })
}

impl Model {
    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyperparameters
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn item_support(&self) -> &[u32] {
        &self.item_support
    }

    pub fn as_popularity(&self) -> Option<&PopularityModel> {
        match &self.params {
            Params::Popularity(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_itemknn(&self) -> Option<&ItemKnnModel> {
        match &self.params {
            Params::ItemKnn(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_slim(&self) -> Option<&SlimModel> {
        match &self.params {
            Params::Slim(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_als(&self) -> Option<&AlsModel> {
        match &self.params {
            Params::Als(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_bpr(&self) -> Option<&BprModel> {
        match &self.params {
            Params::Bpr(m) => Some(m),
            _ => None,
        }
    }

    fn is_known(&self, item: u32) -> bool {
        self.item_support.get(item as usize).is_some_and(|&s| s > 0)
    }

    /// Builds a representation for a user from their input items. Items the
    /// model never saw in training are ignored; if none remain this fails.
    pub fn fold_in(&self, input: &[u32]) -> Result<UserRepresentation, RecommenderError> {
        let mut items: Vec<u32> = input.iter().copied().filter(|&i| self.is_known(i)).collect();
        items.sort_unstable();
        items.dedup();
        if items.is_empty() {
            return Err(RecommenderError::NoKnownItems(input.len()));
        }
        let factors = match &self.params {
            Params::Als(m) => Some(m.fold_in(&items)),
            Params::Bpr(m) => Some(m.fold_in(&items)),
            _ => None,
        };
        Ok(UserRepresentation { items, factors })
    }

    /// Scores for every catalog item. Random models have no scores and
    /// return zeros.
    pub fn scores(&self, user: &UserRepresentation) -> Vec<f64> {
        match &self.params {
            Params::Random => vec![0.0; self.n_items],
            Params::Popularity(m) => m.scores(),
            Params::ItemKnn(m) => m.scores(&user.items, self.n_items),
            Params::Slim(m) => m.scores(&user.items, self.n_items),
            Params::Als(m) => m.factors().scores(user.factors.as_deref().expect("folded-in factor")),
            Params::Bpr(m) => m.factors().scores(user.factors.as_deref().expect("folded-in factor")),
        }
    }

    /// The top `n` items by score, never including anything in `exclude`.
    /// Ties rank by ascending item index. Random models draw `n` items
    /// uniformly without replacement from a stream keyed on the model seed
    /// and the user's input items.
    pub fn recommend(
        &self,
        user: &UserRepresentation,
        n: usize,
        exclude: &[u32],
    ) -> Result<RecommendationList, RecommenderError> {
        let mut excluded = vec![false; self.n_items];
        for &i in exclude {
            if let Some(e) = excluded.get_mut(i as usize) {
                *e = true;
            }
        }
        let candidates: Vec<u32> = (0..self.n_items as u32).filter(|&i| !excluded[i as usize]).collect();
        if n > candidates.len() {
            return Err(RecommenderError::NotEnoughItems { requested: n, available: candidates.len() });
        }

        if let Params::Random = self.params {
            let key = rng::fnv1a(user.items.iter().flat_map(|i| i.to_le_bytes()));
            let mut rng = rng::seeded(self.seed, &[rng::fnv1a(*b"rand_recommend"), key]);
            let ranked = index::sample(&mut rng, candidates.len(), n)
                .into_iter()
                .enumerate()
                .map(|(rank, k)| ScoredItem { item: candidates[k], score: (n - rank) as f64 })
                .collect();
            return Ok(RecommendationList::new(ranked));
        }

        let scores = self.scores(user);
        let mut ranked: Vec<ScoredItem> =
            candidates.into_iter().map(|i| ScoredItem { item: i, score: scores[i as usize] }).collect();
        let order = |a: &ScoredItem, b: &ScoredItem| b.score.total_cmp(&a.score).then(a.item.cmp(&b.item));
        if n < ranked.len() && n > 0 {
            ranked.select_nth_unstable_by(n - 1, order);
        }
        ranked.truncate(n);
        ranked.sort_by(order);
        Ok(RecommendationList::new(ranked))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Users 0 and 1 consume items 0 and 1; users 2 and 3 consume 2 and 3.
    pub(crate) fn two_blocks() -> CsrMatrix {
        CsrMatrix::from_rows(4, vec![vec![0, 1], vec![0, 1], vec![2, 3], vec![2, 3]])
    }

    pub(crate) fn widened_blocks(users_per_block: usize, items_per_block: usize) -> CsrMatrix {
        let n_items = 2 * items_per_block;
        let rows = (0..2 * users_per_block).map(|u| {
            let block = u / users_per_block;
            let base = block * items_per_block;
            // every user misses one block item, cycling, so pairs co-occur unevenly
            let skip = u % items_per_block;
            (0..items_per_block)
                .filter(move |&k| k != skip)
                .map(move |k| (base + k) as u32)
                .collect::<Vec<u32>>()
        });
        CsrMatrix::from_rows(n_items, rows)
    }

    const LEARNED: [Algorithm; 4] = [Algorithm::ItemKnn, Algorithm::Slim, Algorithm::Als, Algorithm::Bpr];

    fn toy_params() -> Hyperparameters {
        let mut p = Hyperparameters::default();
        p.als.factors = 4;
        p.bpr.factors = 4;
        p.bpr.epochs = 200;
        p
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
            assert_eq!(Algorithm::from_tag(a.tag()), Some(a));
        }
        assert_eq!("itemknn".parse::<Algorithm>().unwrap(), Algorithm::ItemKnn);
        assert!("VAE".parse::<Algorithm>().is_err());
    }

    #[test]
    fn empty_training_matrix() {
        let m = CsrMatrix::from_rows(3, vec![Vec::<u32>::new()]);
        assert!(matches!(
            train(Algorithm::Pop, &m, &Hyperparameters::default(), 0),
            Err(RecommenderError::EmptyTrainingData)
        ));
    }

    #[test]
    fn within_block_item_beats_cross_block_items() {
        // hold out each observed entry in turn and train on the rest
        let full = two_blocks();
        for algorithm in LEARNED {
            for u in 0..4usize {
                for &held in full.row(u) {
                    let rows: Vec<Vec<u32>> = (0..4)
                        .map(|r| full.row(r).iter().copied().filter(|&i| r != u || i != held).collect())
                        .collect();
                    let train_m = CsrMatrix::from_rows(4, rows.clone());
                    let model = train(algorithm, &train_m, &toy_params(), 11).unwrap();
                    let repr = model.fold_in(&rows[u]).unwrap();
                    let scores = model.scores(&repr);
                    let cross: Vec<u32> = if u < 2 { vec![2, 3] } else { vec![0, 1] };
                    for c in cross {
                        assert!(
                            scores[held as usize] > scores[c as usize],
                            "{algorithm}: user {u} held {held} scored {} vs cross {c} {}",
                            scores[held as usize],
                            scores[c as usize]
                        );
                    }
                    let list = model.recommend(&repr, 1, &rows[u]).unwrap();
                    assert_eq!(list.ranked()[0].item, held, "{algorithm} user {u}");
                }
            }
        }
    }

    #[test]
    fn popularity_cannot_separate_symmetric_blocks() {
        let model = train(Algorithm::Pop, &two_blocks(), &Hyperparameters::default(), 0).unwrap();
        let a = model.recommend(&model.fold_in(&[0]).unwrap(), 3, &[]).unwrap();
        let b = model.recommend(&model.fold_in(&[3]).unwrap(), 3, &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forced_choice() {
        let m = CsrMatrix::from_rows(3, vec![vec![0, 1, 2], vec![0, 1], vec![2]]);
        for algorithm in Algorithm::ALL {
            let model = train(algorithm, &m, &toy_params(), 3).unwrap();
            let repr = model.fold_in(&[0, 1]).unwrap();
            let list = model.recommend(&repr, 1, &[0, 1]).unwrap();
            assert_eq!(list.items().collect::<Vec<_>>(), vec![2], "{algorithm}");
            assert!(matches!(
                model.recommend(&repr, 2, &[0, 1]),
                Err(RecommenderError::NotEnoughItems { requested: 2, available: 1 })
            ));
        }
    }

    #[test]
    fn pop_full_ranking() {
        // column counts 5, 3, 1
        let rows: Vec<Vec<u32>> = (0..5)
            .map(|u| match u {
                0 => vec![0, 1, 2],
                1 | 2 => vec![0, 1],
                _ => vec![0],
            })
            .collect();
        let m = CsrMatrix::from_rows(3, rows);
        let model = train(Algorithm::Pop, &m, &Hyperparameters::default(), 0).unwrap();
        let list = model.recommend(&model.fold_in(&[0]).unwrap(), 3, &[]).unwrap();
        assert_eq!(list.items().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(model.as_popularity().unwrap().ranking(), &[0, 1, 2]);
    }

    #[test]
    fn random_is_seeded_and_excludes() {
        let m = widened_blocks(5, 10);
        let model = train(Algorithm::Rand, &m, &Hyperparameters::default(), 21).unwrap();
        let repr = model.fold_in(&[0, 1, 2]).unwrap();
        let a = model.recommend(&repr, 8, &[0, 1, 2]).unwrap();
        let b = model.recommend(&repr, 8, &[0, 1, 2]).unwrap();
        assert_eq!(a, b);
        assert!(a.items().all(|i| i > 2));
        let other = train(Algorithm::Rand, &m, &Hyperparameters::default(), 22).unwrap();
        assert_ne!(other.recommend(&repr, 8, &[0, 1, 2]).unwrap(), a);
        let mut items: Vec<u32> = a.items().collect();
        items.sort_unstable();
        items.dedup();
        assert_eq!(items.len(), 8);
    }

    #[test]
    fn unknown_inputs_fail_fold_in() {
        let m = CsrMatrix::from_rows(5, vec![vec![0, 1], vec![1, 2]]);
        for algorithm in Algorithm::ALL {
            let model = train(algorithm, &m, &toy_params(), 0).unwrap();
            assert!(matches!(model.fold_in(&[3, 4, 99]), Err(RecommenderError::NoKnownItems(3))));
            assert_eq!(model.fold_in(&[4, 1, 0]).unwrap().items, vec![0, 1]);
        }
    }

    #[test]
    fn neighborhood_fold_in_is_the_input_vector() {
        let m = widened_blocks(4, 6);
        for algorithm in [Algorithm::ItemKnn, Algorithm::Slim, Algorithm::Pop, Algorithm::Rand] {
            let model = train(algorithm, &m, &toy_params(), 0).unwrap();
            let repr = model.fold_in(&[5, 1, 3]).unwrap();
            assert_eq!(repr, UserRepresentation { items: vec![1, 3, 5], factors: None });
        }
    }

    #[test]
    fn rankings_are_deterministic_and_exclusive() {
        let m = widened_blocks(6, 8);
        for algorithm in Algorithm::ALL {
            let model = train(algorithm, &m, &toy_params(), 5).unwrap();
            let twin = train(algorithm, &m, &toy_params(), 5).unwrap();
            assert_eq!(model, twin, "{algorithm} training is deterministic");
            for u in 0..m.n_rows() {
                let input = m.row(u);
                let repr = model.fold_in(input).unwrap();
                let list = model.recommend(&repr, 16 - input.len(), input).unwrap();
                assert_eq!(list, twin.recommend(&repr, 16 - input.len(), input).unwrap());
                assert!(list.items().all(|i| !input.contains(&i)), "{algorithm}");
                let w = list.ranked();
                for pair in w.windows(2) {
                    assert!(
                        pair[0].score > pair[1].score
                            || (pair[0].score == pair[1].score && pair[0].item < pair[1].item)
                            || algorithm == Algorithm::Rand
                    );
                }
            }
        }
    }
}
