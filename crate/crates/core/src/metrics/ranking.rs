use super::MetricsError;

/// Binary-relevance NDCG over the first `k` entries of `ranked`. The ideal
/// ranking places `min(k, |holdout|)` relevant items at the top.
/// `holdout` must be sorted.
pub fn ndcg_at_k(ranked: &[u32], holdout: &[u32], k: usize) -> Result<f64, MetricsError> {
    if holdout.is_empty() {
        return Err(MetricsError::EmptyHoldout);
    }
    let discount = |rank: usize| 1.0 / ((rank + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| holdout.binary_search(item).is_ok())
        .map(|(rank, _)| discount(rank))
        .sum();
    let idcg: f64 = (0..k.min(holdout.len())).map(discount).sum();
    Ok(dcg / idcg)
}
