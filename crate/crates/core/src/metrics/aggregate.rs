use serde::{Deserialize, Serialize};

use super::{Metric, MetricsError, PerUserBiasRecord};
use crate::dataset::Gender;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupFilter {
    All,
    Gender(Gender),
}

impl GroupFilter {
    pub fn admits(self, record: &PerUserBiasRecord) -> bool {
        match self {
            GroupFilter::All => true,
            GroupFilter::Gender(g) => record.gender == g,
        }
    }
}

/// Aggregated metric values for one user group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n_users: usize,
    /// Indexed by [`Metric::position`]; `None` when every user's value was
    /// undefined.
    pub values: [Option<f64>; 8],
    /// Users whose value was undefined and left out, per metric.
    pub skipped: [usize; 8],
}

impl AggregateRow {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.values[metric.position()]
    }
}

/// Median with the two middle values averaged for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[mid] } else { (values[mid - 1] + values[mid]) / 2.0 })
}

/// Medians of the bias metrics and the mean NDCG over the records admitted
/// by `filter`. Undefined per-user values are skipped and counted.
pub fn aggregate<'a, I>(records: I, filter: GroupFilter) -> Result<AggregateRow, MetricsError>
where
    I: IntoIterator<Item = &'a PerUserBiasRecord>,
{
    let group: Vec<&PerUserBiasRecord> = records.into_iter().filter(|r| filter.admits(r)).collect();
    if group.is_empty() {
        return Err(MetricsError::EmptyGroup(format!("{filter:?}")));
    }
    let mut values = [None; 8];
    let mut skipped = [0; 8];
    for metric in Metric::ALL {
        let mut defined: Vec<f64> = group.iter().filter_map(|r| r.value(metric)).collect();
        skipped[metric.position()] = group.len() - defined.len();
        values[metric.position()] = if metric.uses_mean() {
            (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
        } else {
            median(&mut defined)
        };
    }
    Ok(AggregateRow { n_users: group.len(), values, skipped })
}

/// Per-metric `group − all`.
pub fn group_delta(group: &AggregateRow, all: &AggregateRow) -> [Option<f64>; 8] {
    std::array::from_fn(|k| match (group.values[k], all.values[k]) {
        (Some(g), Some(a)) => Some(g - a),
        _ => None,
    })
}
