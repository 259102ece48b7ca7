use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{PopularityDistribution, PopularityError, PopularityIndex};

pub const N_BINS: usize = 10;

/// Summary of one decile bin, bins numbered 1 (least popular) to 10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub index: usize,
    pub min_popularity: u64,
    pub max_popularity: u64,
    pub item_count: usize,
    pub mass: u64,
}

/// Ten contiguous, popularity-ordered item groups that each hold roughly a
/// tenth of the catalog's popularity mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileBins {
    /// Zero-based bin of every catalog item.
    item_bin: Vec<u8>,
    bins: Vec<BinSummary>,
    total_mass: u64,
}

impl DecileBins {
    pub fn bin_of(&self, item: u32) -> Option<usize> {
        self.item_bin.get(item as usize).map(|&b| b as usize)
    }

    pub fn summaries(&self) -> &[BinSummary] {
        &self.bins
    }

    pub fn total_mass(&self) -> u64 {
        self.total_mass
    }

    /// Writes `bin_index, min_popularity, max_popularity, item_count,
    /// mass_share` rows with a header line.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_index\tmin_popularity\tmax_popularity\titem_count\tmass_share")?;
        for b in &self.bins {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                b.index,
                b.min_popularity,
                b.max_popularity,
                b.item_count,
                b.mass as f64 / self.total_mass as f64
            )?;
        }
        Ok(())
    }
}

/// Sweeps items in ascending popularity (ties by item index) and closes bin
/// `j` at the first item whose inclusion brings the cumulative mass to at
/// least `j/10` of the total. A bin is also closed early when the items left
/// are just enough to give every remaining bin one item, so there are always
/// exactly ten non-empty bins.
pub fn build_decile_bins(index: &PopularityIndex) -> Result<DecileBins, PopularityError> {
    let mut order: Vec<u32> = (0..index.len() as u32).filter(|&i| index.get(i) > Some(0)).collect();
    if order.len() < N_BINS || order.len() != index.len() {
        return Err(PopularityError::TooFewItems(order.len()));
    }
    order.sort_by_key(|&i| (index.get(i).unwrap(), i));

    let total = index.total_mass() as u128;
    let n = order.len();
    let mut item_bin = vec![0u8; n];
    let mut bins: Vec<BinSummary> = Vec::with_capacity(N_BINS);
    let mut current = BinSummary { index: 1, min_popularity: 0, max_popularity: 0, item_count: 0, mass: 0 };
    let mut cumulative: u128 = 0;
    for (pos, &item) in order.iter().enumerate() {
        let p = index.get(item).unwrap();
        let j = bins.len();
        if current.item_count == 0 {
            current.min_popularity = p;
        }
        current.max_popularity = p;
        current.item_count += 1;
        current.mass += p;
        cumulative += p as u128;
        item_bin[item as usize] = j as u8;

        if j + 1 < N_BINS {
            let reached = cumulative * N_BINS as u128 >= (j as u128 + 1) * total;
            let forced = n - 1 - pos == N_BINS - 1 - j;
            if reached || forced {
                bins.push(std::mem::replace(
                    &mut current,
                    BinSummary { index: j + 2, min_popularity: 0, max_popularity: 0, item_count: 0, mass: 0 },
                ));
            }
        }
    }
    bins.push(current);
    debug_assert_eq!(bins.len(), N_BINS);
    Ok(DecileBins { item_bin, bins, total_mass: index.total_mass() })
}

/// Per-bin track counts and their smoothed normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedDistribution {
    pub counts: [u64; N_BINS],
    /// `(counts[j] + ε) / (Σ counts + 10ε)`.
    pub normalized: [f64; N_BINS],
}

impl BinnedDistribution {
    pub fn from_counts(counts: [u64; N_BINS], epsilon: f64) -> BinnedDistribution {
        let total: u64 = counts.iter().sum();
        let denom = total as f64 + N_BINS as f64 * epsilon;
        let normalized = counts.map(|c| (c as f64 + epsilon) / denom);
        BinnedDistribution { counts, normalized }
    }
}

/// Counts the distribution's tracks per decile bin. `dist` must not be empty.
pub fn bin_distribution(
    dist: &PopularityDistribution,
    bins: &DecileBins,
    epsilon: f64,
) -> Result<BinnedDistribution, PopularityError> {
    if dist.is_empty() {
        return Err(PopularityError::Empty);
    }
    let mut counts = [0u64; N_BINS];
    for &item in &dist.items {
        counts[bins.bin_of(item).ok_or(PopularityError::UnknownItem(item))?] += 1;
    }
    Ok(BinnedDistribution::from_counts(counts, epsilon))
}
