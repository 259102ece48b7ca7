use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopParams {
    /// Remove each user's input items from the global ranking. When false
    /// every user receives the same list.
    pub filter_consumed: bool,
}

impl Default for PopParams {
    fn default() -> Self {
        PopParams { filter_consumed: true }
    }
}

/// Items ranked by the number of training users who consumed them.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityModel {
    counts: Vec<u32>,
    ranking: Vec<u32>,
}

impl PopularityModel {
    pub(crate) fn train(item_support: &[u32]) -> PopularityModel {
        let mut ranking: Vec<u32> = (0..item_support.len() as u32).collect();
        ranking.sort_by(|&a, &b| item_support[b as usize].cmp(&item_support[a as usize]).then(a.cmp(&b)));
        PopularityModel { counts: item_support.to_vec(), ranking }
    }

    /// Catalog items, most consumed first, ties by index.
    pub fn ranking(&self) -> &[u32] {
        &self.ranking
    }

    pub(crate) fn scores(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}
