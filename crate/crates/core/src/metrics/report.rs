use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{aggregate, group_delta, AggregateRow, GroupFilter, Metric, MetricsError, PerUserBiasRecord};
use crate::dataset::Gender;
use crate::recommenders::Algorithm;

/// One algorithm's block: the whole population, each gender group, and the
/// group-minus-population deltas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmReport {
    pub algorithm: Algorithm,
    pub all: AggregateRow,
    pub female: Option<AggregateRow>,
    pub male: Option<AggregateRow>,
    pub delta_female: [Option<f64>; 8],
    pub delta_male: [Option<f64>; 8],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub algorithms: Vec<AlgorithmReport>,
}

/// Rounds every value to a power-of-two grid fine enough to cost at most a
/// few ulps at the largest magnitude but coarse enough that differences of
/// grid values are exact, so `all + (group − all) == group` holds bit for
/// bit.
fn snap_to_common_grid(cells: &mut [&mut Option<f64>]) {
    let max = cells.iter().filter_map(|c| **c).map(f64::abs).fold(0.0, f64::max);
    if max == 0.0 || !max.is_normal() {
        return;
    }
    let exponent = ((max.to_bits() >> 52) & 0x7ff) as i64 - 1023;
    let grid_exp = exponent - 50;
    if grid_exp < -1022 {
        return;
    }
    let grid = f64::from_bits(((grid_exp + 1023) as u64) << 52);
    for cell in cells.iter_mut() {
        if let Some(v) = cell.as_mut() {
            *v = (*v / grid).round() * grid;
        }
    }
}

fn group_row(records: &[&PerUserBiasRecord], gender: Gender) -> Result<Option<AggregateRow>, MetricsError> {
    match aggregate(records.iter().copied(), GroupFilter::Gender(gender)) {
        Ok(row) => Ok(Some(row)),
        Err(MetricsError::EmptyGroup(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Aggregates pooled per-user records into one block per algorithm, in
/// algorithm order. Users of unknown gender count towards `All` only.
pub fn build_report(records: &[PerUserBiasRecord]) -> Result<BiasReport, MetricsError> {
    let mut by_algorithm: BTreeMap<Algorithm, Vec<&PerUserBiasRecord>> = BTreeMap::new();
    for r in records {
        by_algorithm.entry(r.algorithm).or_default().push(r);
    }
    let mut algorithms = Vec::new();
    for (algorithm, recs) in by_algorithm {
        let mut all = aggregate(recs.iter().copied(), GroupFilter::All)?;
        let mut female = group_row(&recs, Gender::Female)?;
        let mut male = group_row(&recs, Gender::Male)?;
        for k in 0..8 {
            let mut cells: Vec<&mut Option<f64>> = vec![&mut all.values[k]];
            if let Some(f) = female.as_mut() {
                cells.push(&mut f.values[k]);
            }
            if let Some(m) = male.as_mut() {
                cells.push(&mut m.values[k]);
            }
            snap_to_common_grid(&mut cells);
        }
        let delta = |g: &Option<AggregateRow>| g.as_ref().map_or([None; 8], |g| group_delta(g, &all));
        let delta_female = delta(&female);
        let delta_male = delta(&male);
        algorithms.push(AlgorithmReport { algorithm, all, female, male, delta_female, delta_male });
    }
    Ok(BiasReport { algorithms })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl BiasReport {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmReport> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }

    /// Three rows per algorithm: `All`, `ΔFemale`, `ΔMale`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("algorithm\tusers\tn_users");
        for m in Metric::ALL {
            write!(out, "\t{m}").unwrap();
        }
        out.push('\n');
        for block in &self.algorithms {
            let rows = [
                ("All", block.all.n_users, block.all.values),
                ("ΔFemale", block.female.as_ref().map_or(0, |r| r.n_users), block.delta_female),
                ("ΔMale", block.male.as_ref().map_or(0, |r| r.n_users), block.delta_male),
            ];
            for (label, n, values) in rows {
                write!(out, "{}\t{label}\t{n}", block.algorithm).unwrap();
                for v in values {
                    write!(out, "\t{}", cell(v)).unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            users: usize,
            values: BTreeMap<&'a str, Option<f64>>,
            skipped: BTreeMap<&'a str, usize>,
        }
        #[derive(Serialize)]
        struct Block<'a> {
            algorithm: String,
            all: Row<'a>,
            female: Option<Row<'a>>,
            male: Option<Row<'a>>,
            delta_female: BTreeMap<&'a str, Option<f64>>,
            delta_male: BTreeMap<&'a str, Option<f64>>,
        }
        let named = |values: &[Option<f64>; 8]| -> BTreeMap<&str, Option<f64>> {
            Metric::ALL.iter().map(|m| (m.name(), values[m.position()])).collect()
        };
        let row = |r: &AggregateRow| Row {
            users: r.n_users,
            values: named(&r.values),
            skipped: Metric::ALL.iter().map(|m| (m.name(), r.skipped[m.position()])).collect(),
        };
        let blocks: Vec<Block> = self
            .algorithms
            .iter()
            .map(|b| Block {
                algorithm: b.algorithm.to_string(),
                all: row(&b.all),
                female: b.female.as_ref().map(row),
                male: b.male.as_ref().map(row),
                delta_female: named(&b.delta_female),
                delta_male: named(&b.delta_male),
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "algorithms": blocks })).unwrap() + "\n"
    }
}
