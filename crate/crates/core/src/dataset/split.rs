use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Train, validation and test user fractions.
    pub ratios: [f64; 3],
    pub folds: usize,
    /// Fraction of each evaluation user's items given to the model as input.
    pub input_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { ratios: [0.6, 0.2, 0.2], folds: 5, input_fraction: 0.8, seed: 42 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Train,
    Validation,
    Test,
}

/// Partition of one evaluation user's items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holdout {
    /// Items shown to the model (sorted).
    pub input: Vec<u32>,
    /// Items used as relevance targets (sorted, never empty).
    pub holdout: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<u32>,
    pub validation: Vec<u32>,
    pub test: Vec<u32>,
    /// One entry per validation and test user.
    pub holdouts: BTreeMap<u32, Holdout>,
}

impl Fold {
    pub fn role(&self, user: u32) -> Role {
        if self.test.binary_search(&user).is_ok() {
            Role::Test
        } else if self.validation.binary_search(&user).is_ok() {
            Role::Validation
        } else {
            Role::Train
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
}

/// Holdout size for a profile of `n` items: the non-input share rounded to
/// nearest, but at least one item.
pub(crate) fn holdout_size(n: usize, input_fraction: f64) -> usize {
    (((1.0 - input_fraction) * n as f64).round() as usize).max(1).min(n)
}

/// Shuffles the users once, cuts them into `folds` equal blocks and rotates
/// block roles so that every user is a test user in exactly one fold.
///
/// Fold `f` tests on block `f`, validates on the blocks following it and
/// trains on the rest. Each validation and test user's items are split into
/// input and holdout with a generator keyed on (seed, fold, user).
pub fn make_split_plan(dataset: &Dataset, config: &SplitConfig) -> Result<SplitPlan, DatasetError> {
    let folds = config.folds;
    if folds < 2 {
        return Err(DatasetError::InvalidSplit(format!("need at least 2 folds, got {folds}")));
    }
    let [train_r, val_r, test_r] = config.ratios;
    if config.ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (train_r + val_r + test_r - 1.0).abs() > 1e-9 {
        return Err(DatasetError::InvalidSplit(format!("ratios {:?} must be fractions summing to 1", config.ratios)));
    }
    let test_blocks = test_r * folds as f64;
    let val_blocks = val_r * folds as f64;
    if (test_blocks - 1.0).abs() > 1e-9 || (val_blocks - val_blocks.round()).abs() > 1e-9 {
        return Err(DatasetError::InvalidSplit(format!(
            "ratios {:?} do not rotate over {folds} folds: the test share must be one block",
            config.ratios
        )));
    }
    let val_blocks = val_blocks.round() as usize;
    if val_blocks + 1 >= folds {
        return Err(DatasetError::InvalidSplit("no blocks left for training".into()));
    }
    if !(0.0..1.0).contains(&config.input_fraction) {
        return Err(DatasetError::InvalidSplit(format!(
            "input fraction {} must lie in [0, 1)",
            config.input_fraction
        )));
    }
    let n = dataset.n_users();
    if n < folds {
        return Err(DatasetError::TooFewUsers { needed: folds, available: n });
    }

    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng::seeded(config.seed, &[rng::fnv1a(*b"split_users")]));
    let blocks: Vec<Vec<u32>> = (0..folds)
        .map(|b| {
            let mut block = order[b * n / folds..(b + 1) * n / folds].to_vec();
            block.sort_unstable();
            block
        })
        .collect();

    let plan = (0..folds)
        .map(|f| {
            let test = blocks[f].clone();
            let mut validation: Vec<u32> =
                (1..=val_blocks).flat_map(|k| blocks[(f + k) % folds].iter().copied()).collect();
            validation.sort_unstable();
            let mut train: Vec<u32> = (val_blocks + 1..folds)
                .flat_map(|k| blocks[(f + k) % folds].iter().copied())
                .collect();
            train.sort_unstable();

            let holdouts = test
                .iter()
                .chain(&validation)
                .map(|&u| {
                    let mut items = dataset.user_items(u).to_vec();
                    items.shuffle(&mut rng::seeded(config.seed, &[rng::fnv1a(*b"holdout"), f as u64, u as u64]));
                    let h = holdout_size(items.len(), config.input_fraction);
                    let mut holdout = items[..h].to_vec();
                    let mut input = items[h..].to_vec();
                    holdout.sort_unstable();
                    input.sort_unstable();
                    (u, Holdout { input, holdout })
                })
                .collect();
            Fold { index: f, train, validation, test, holdouts }
        })
        .collect();
    Ok(SplitPlan { folds: plan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Interaction;
    use proptest::prelude::*;

    fn dataset(n_users: usize, items_per_user: impl Fn(usize) -> usize) -> Dataset {
        let recs: Vec<Interaction> = (0..n_users)
            .flat_map(|u| {
                (0..items_per_user(u)).map(move |i| Interaction {
                    user_id: format!("u{u:04}"),
                    item_id: format!("i{:04}", (u * 7 + i) % 500),
                    play_count: 2,
                    timestamp: None,
                })
            })
            .collect();
        Dataset::from_interactions(&recs, &[])
    }

    #[test]
    fn hundred_users_rotate_sixty_twenty_twenty() {
        let d = dataset(100, |_| 6);
        let plan = make_split_plan(&d, &SplitConfig::default()).unwrap();
        assert_eq!(plan.folds.len(), 5);
        let mut tested: Vec<u32> = Vec::new();
        for fold in &plan.folds {
            assert_eq!((fold.train.len(), fold.validation.len(), fold.test.len()), (60, 20, 20));
            tested.extend(&fold.test);
        }
        tested.sort_unstable();
        assert_eq!(tested, (0..100).collect::<Vec<u32>>());
    }

    #[test]
    fn five_items_split_four_one() {
        assert_eq!(holdout_size(5, 0.8), 1);
        assert_eq!(holdout_size(7, 0.8), 1);
        assert_eq!(holdout_size(8, 0.8), 2);
        assert_eq!(holdout_size(1, 0.8), 1);
        let d = dataset(10, |_| 5);
        let plan = make_split_plan(&d, &SplitConfig::default()).unwrap();
        for h in plan.folds[0].holdouts.values() {
            assert_eq!((h.input.len(), h.holdout.len()), (4, 1));
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let d = dataset(53, |u| 5 + u % 9);
        let a = make_split_plan(&d, &SplitConfig::default()).unwrap();
        let b = make_split_plan(&d, &SplitConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = make_split_plan(&d, &SplitConfig { seed: 7, ..SplitConfig::default() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_few_users() {
        let d = dataset(4, |_| 5);
        assert!(matches!(
            make_split_plan(&d, &SplitConfig::default()),
            Err(DatasetError::TooFewUsers { needed: 5, available: 4 })
        ));
    }

    #[test]
    fn non_rotating_ratios_are_rejected() {
        let d = dataset(20, |_| 5);
        let config = SplitConfig { ratios: [0.5, 0.1, 0.4], ..SplitConfig::default() };
        assert!(matches!(make_split_plan(&d, &config), Err(DatasetError::InvalidSplit(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn coverage_and_partition(n_users in 5usize..120, seed in any::<u64>(), spread in 1usize..20) {
            let d = dataset(n_users, |u| 5 + (u * 31) % spread);
            let plan = make_split_plan(&d, &SplitConfig { seed, ..SplitConfig::default() }).unwrap();
            let mut test_count = vec![0usize; n_users];
            for fold in &plan.folds {
                let mut all: Vec<u32> = fold.train.iter().chain(&fold.validation).chain(&fold.test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n_users as u32).collect::<Vec<_>>());
                for &u in &fold.test {
                    test_count[u as usize] += 1;
                }
                prop_assert_eq!(fold.holdouts.len(), fold.validation.len() + fold.test.len());
                prop_assert!(fold.train.len().abs_diff(3 * n_users / 5) <= 3);
                for (&u, h) in &fold.holdouts {
                    prop_assert!(!h.holdout.is_empty());
                    prop_assert!(h.input.iter().all(|i| h.holdout.binary_search(i).is_err()));
                    let mut union: Vec<u32> = h.input.iter().chain(&h.holdout).copied().collect();
                    union.sort_unstable();
                    prop_assert_eq!(union.as_slice(), d.user_items(u));
                    prop_assert!(fold.role(u) != Role::Train);
                }
            }
            prop_assert!(test_count.iter().all(|&c| c == 1));
        }
    }
}
