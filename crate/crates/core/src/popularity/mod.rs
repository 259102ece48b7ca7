//! Item popularity, per-user popularity distributions and decile binning by
//! cumulative popularity mass.

mod bins;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::recommenders::RecommendationList;

pub use bins::{bin_distribution, build_decile_bins, BinSummary, BinnedDistribution, DecileBins, N_BINS};

#[derive(Debug, Error, PartialEq)]
pub enum PopularityError {
    #[error("unknown user index {0}")]
    UnknownUser(u32),
    #[error("unknown item index {0}")]
    UnknownItem(u32),
    #[error("recommendation list has {available} items, {needed} required")]
    ListTooShort { needed: usize, available: usize },
    #[error("decile binning needs at least {N_BINS} items with positive popularity, catalog has {0}")]
    TooFewItems(usize),
    #[error("empty distribution")]
    Empty,
}

/// Total play count per catalog item, summed over every user in the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopularityIndex {
    popularity: Vec<u64>,
    total_mass: u64,
}

impl PopularityIndex {
    pub fn compute(dataset: &Dataset) -> PopularityIndex {
        let mut popularity = vec![0u64; dataset.n_items()];
        for u in 0..dataset.n_users() as u32 {
            for (&i, &pc) in dataset.user_items(u).iter().zip(dataset.user_play_counts(u)) {
                popularity[i as usize] += pc;
            }
        }
        let total_mass = popularity.iter().sum();
        PopularityIndex { popularity, total_mass }
    }

    /// Builds an index from raw per-item popularity values.
    pub fn from_values(popularity: Vec<u64>) -> PopularityIndex {
        let total_mass = popularity.iter().sum();
        PopularityIndex { popularity, total_mass }
    }

    pub fn len(&self) -> usize {
        self.popularity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.popularity.is_empty()
    }

    pub fn total_mass(&self) -> u64 {
        self.total_mass
    }

    /// Popularity of `item`, `None` for items outside the index.
    pub fn get(&self, item: u32) -> Option<u64> {
        self.popularity.get(item as usize).copied()
    }

    pub fn values(&self) -> &[u64] {
        &self.popularity
    }
}

/// Shorthand for [`PopularityIndex::compute`].
pub fn compute_popularity(dataset: &Dataset) -> PopularityIndex {
    PopularityIndex::compute(dataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistributionKind {
    History,
    Recommendation,
}

/// Popularity values of one user's tracks, one per distinct track.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityDistribution {
    pub owner: u32,
    pub kind: DistributionKind,
    pub items: Vec<u32>,
    pub values: Vec<f64>,
}

impl PopularityDistribution {
    /// Looks up the popularity of every item in `items`.
    pub fn from_items(
        owner: u32,
        kind: DistributionKind,
        items: &[u32],
        index: &PopularityIndex,
    ) -> Result<PopularityDistribution, PopularityError> {
        let values = items
            .iter()
            .map(|&i| index.get(i).map(|p| p as f64).ok_or(PopularityError::UnknownItem(i)))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(PopularityDistribution { owner, kind, items: items.to_vec(), values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Popularity distribution over the user's complete filtered profile. Each
/// consumed track contributes its popularity once.
pub fn history_distribution(
    user: u32,
    dataset: &Dataset,
    index: &PopularityIndex,
) -> Result<PopularityDistribution, PopularityError> {
    if user as usize >= dataset.n_users() {
        return Err(PopularityError::UnknownUser(user));
    }
    let items = dataset.user_items(user);
    if items.is_empty() {
        return Err(PopularityError::Empty);
    }
    PopularityDistribution::from_items(user, DistributionKind::History, items, index)
}

/// Popularity distribution over the top `k` entries of `list`, where `k` is
/// the size of the user's history so that the two distributions are length
/// matched.
pub fn recommendation_distribution(
    owner: u32,
    list: &RecommendationList,
    k: usize,
    index: &PopularityIndex,
) -> Result<PopularityDistribution, PopularityError> {
    if list.len() < k {
        return Err(PopularityError::ListTooShort { needed: k, available: list.len() });
    }
    let items: Vec<u32> = list.items().take(k).collect();
    PopularityDistribution::from_items(owner, DistributionKind::Recommendation, &items, index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{apply_filters, fixture, parse_interactions, parse_users, FilterConfig, Interaction};
    use crate::recommenders::ScoredItem;

    fn rec(u: &str, i: &str, pc: u64) -> Interaction {
        Interaction { user_id: u.into(), item_id: i.into(), play_count: pc, timestamp: None }
    }

    fn list(items: &[u32]) -> RecommendationList {
        RecommendationList::new(
            items.iter().enumerate().map(|(r, &i)| ScoredItem { item: i, score: -(r as f64) }).collect(),
        )
    }

    #[test]
    fn popularity_sums_play_counts() {
        let d = Dataset::from_interactions(&[rec("a", "t", 3), rec("b", "t", 2), rec("b", "s", 1)], &[]);
        let index = compute_popularity(&d);
        assert_eq!(index.get(d.item_index("t").unwrap()), Some(5));
        assert_eq!(index.total_mass(), 6);
        assert_eq!(index.get(7), None);
    }

    #[test]
    fn zero_play_items_are_absent() {
        let d = Dataset::from_interactions(&[rec("a", "t", 3), rec("a", "z", 0)], &[]);
        let index = compute_popularity(&d);
        assert_eq!(index.len(), 1);
        assert!(d.item_index("z").is_none());
    }

    #[test]
    fn fixture_popularity_matches_hand_sums() {
        let parsed = parse_interactions(fixture::text().as_bytes()).unwrap();
        let users = parse_users(fixture::users_text().as_bytes()).unwrap();
        let config = FilterConfig { time_window_secs: Some(1000), ..FilterConfig::default() };
        let (d, _) = apply_filters(&parsed.interactions, &users, &config).unwrap();
        let index = compute_popularity(&d);
        // u1 plays i01 3 + 2 times, u2..u6 three times each; i09 has five
        // users at two plays; i10 keeps u1, u2, u3, u6 at three plays.
        let expected = [("i01", 20), ("i02", 18), ("i03", 18), ("i04", 18), ("i05", 18), ("i06", 18), ("i09", 10), ("i10", 12)];
        for (id, p) in expected {
            assert_eq!(index.get(d.item_index(id).unwrap()), Some(p), "{id}");
        }
        let u3 = d.user_index("u3").unwrap();
        let h = history_distribution(u3, &d, &index).unwrap();
        assert_eq!(h.values, vec![20.0, 18.0, 18.0, 18.0, 18.0, 18.0, 10.0, 12.0]);
        let u1 = d.user_index("u1").unwrap();
        let h = history_distribution(u1, &d, &index).unwrap();
        assert_eq!(h.values, vec![20.0, 18.0, 18.0, 18.0, 18.0, 18.0, 12.0]);
    }

    #[test]
    fn history_values() {
        let d = Dataset::from_interactions(
            &[rec("a", "i1", 4), rec("b", "i1", 6), rec("a", "i2", 40), rec("c", "i3", 2)],
            &[],
        );
        let index = compute_popularity(&d);
        let a = d.user_index("a").unwrap();
        let h = history_distribution(a, &d, &index).unwrap();
        assert_eq!(h.values, vec![10.0, 40.0]);
        assert_eq!(h.kind, DistributionKind::History);
        let c = d.user_index("c").unwrap();
        assert_eq!(history_distribution(c, &d, &index).unwrap().values, vec![2.0]);
        assert_eq!(history_distribution(9, &d, &index), Err(PopularityError::UnknownUser(9)));
    }

    #[test]
    fn recommendation_values_are_truncated() {
        let index = PopularityIndex::from_values(vec![1, 2, 3, 4, 5]);
        let l = list(&[4, 3, 2, 1, 0]);
        let r = recommendation_distribution(0, &l, 3, &index).unwrap();
        assert_eq!(r.values, vec![5.0, 4.0, 3.0]);
        assert_eq!(recommendation_distribution(0, &l, 5, &index).unwrap().len(), 5);
        assert_eq!(
            recommendation_distribution(0, &l, 6, &index),
            Err(PopularityError::ListTooShort { needed: 6, available: 5 })
        );
    }
}
