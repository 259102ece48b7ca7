//! Interaction ingestion, filtering, item sampling and the cross-validation
//! split plan.

mod filter;
mod parse;
mod split;

use std::collections::HashMap;
use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::sparse::CsrMatrix;

pub use filter::{apply_filters, FilterConfig, FilterReport, StageCounts};
pub use parse::{parse_interactions, parse_users, read_interactions, read_users, ParsedInteractions};
pub use split::{make_split_plan, Fold, Holdout, Role, SplitConfig, SplitPlan};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {what}: {source}")]
    Io {
        what: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{malformed} of {lines} lines are malformed; is this a tab-separated user/item/count file?")]
    WrongFormat { malformed: usize, lines: usize },
    #[error("duplicate user record for {0}")]
    DuplicateUser(String),
    #[error("dataset is empty after the {stage} filter stage ({report})")]
    EmptyAfterFilter { stage: String, report: String },
    #[error("cannot sample {requested} items from a catalog of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("split needs at least {needed} users, dataset has {available}")]
    TooFewUsers { needed: usize, available: usize },
    #[error("invalid split configuration: {0}")]
    InvalidSplit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

impl Gender {
    /// Accepts `f`/`m` (any case, or the full words); everything else,
    /// including the empty string, is `Unknown`.
    pub fn parse(s: &str) -> Gender {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" => Gender::Female,
            "m" | "male" => Gender::Male,
            _ => Gender::Unknown,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Gender::Female => "f",
            Gender::Male => "m",
            Gender::Unknown => "other",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One aggregated user-item record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    pub play_count: u64,
    /// Seconds since the epoch of the latest event, if known.
    pub timestamp: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: String,
    pub gender: Gender,
}

/// A filtered, canonically ordered interaction dataset.
///
/// Users and items are indexed in ascending identifier order, so index order
/// doubles as the deterministic tie-break order everywhere downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    users: Vec<String>,
    genders: Vec<Gender>,
    items: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
    matrix: CsrMatrix,
    // aligned with the matrix's stored entries
    play_counts: Vec<Vec<u64>>,
}

impl Dataset {
    /// Builds a dataset from aggregated interactions. Records with a zero
    /// play count carry no consumption and are dropped. Users without a
    /// record in `users` get `Gender::Unknown`.
    pub fn from_interactions(interactions: &[Interaction], users: &[UserRecord]) -> Dataset {
        let genders_by_id: HashMap<&str, Gender> =
            users.iter().map(|u| (u.user_id.as_str(), u.gender)).collect();
        let live: Vec<&Interaction> = interactions.iter().filter(|i| i.play_count > 0).collect();

        let mut user_ids: Vec<String> = live.iter().map(|i| i.user_id.clone()).collect();
        user_ids.sort_unstable();
        user_ids.dedup();
        let mut item_ids: Vec<String> = live.iter().map(|i| i.item_id.clone()).collect();
        item_ids.sort_unstable();
        item_ids.dedup();
        let user_index: HashMap<String, u32> =
            user_ids.iter().enumerate().map(|(k, u)| (u.clone(), k as u32)).collect();
        let item_index: HashMap<String, u32> =
            item_ids.iter().enumerate().map(|(k, i)| (i.clone(), k as u32)).collect();

        let mut rows: Vec<Vec<(u32, u64)>> = vec![Vec::new(); user_ids.len()];
        for rec in live {
            rows[user_index[&rec.user_id] as usize].push((item_index[&rec.item_id], rec.play_count));
        }
        for row in &mut rows {
            row.sort_unstable();
            // duplicates are summed, mirroring ingestion
            row.dedup_by(|later, kept| {
                if later.0 == kept.0 {
                    kept.1 += later.1;
                    true
                } else {
                    false
                }
            });
        }
        let matrix = CsrMatrix::from_rows(
            item_ids.len(),
            rows.iter().map(|r| r.iter().map(|&(i, _)| i).collect::<Vec<_>>()),
        );
        let play_counts = rows.into_iter().map(|r| r.into_iter().map(|(_, c)| c).collect()).collect();
        let genders = user_ids
            .iter()
            .map(|u| genders_by_id.get(u.as_str()).copied().unwrap_or(Gender::Unknown))
            .collect();

        Dataset {
            users: user_ids,
            genders,
            items: item_ids,
            user_index,
            item_index,
            matrix,
            play_counts,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_interactions(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn user_id(&self, user: u32) -> &str {
        &self.users[user as usize]
    }

    pub fn item_id(&self, item: u32) -> &str {
        &self.items[item as usize]
    }

    pub fn user_ids(&self) -> &[String] {
        &self.users
    }

    pub fn item_ids(&self) -> &[String] {
        &self.items
    }

    pub fn gender(&self, user: u32) -> Gender {
        self.genders[user as usize]
    }

    pub fn user_index(&self, user_id: &str) -> Option<u32> {
        self.user_index.get(user_id).copied()
    }

    pub fn item_index(&self, item_id: &str) -> Option<u32> {
        self.item_index.get(item_id).copied()
    }

    /// Sorted item indices consumed by `user`.
    pub fn user_items(&self, user: u32) -> &[u32] {
        self.matrix.row(user as usize)
    }

    /// Play counts aligned with [`Dataset::user_items`].
    pub fn user_play_counts(&self, user: u32) -> &[u64] {
        &self.play_counts[user as usize]
    }

    /// The binary user × item incidence matrix.
    pub fn binary_matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Binary matrix restricted to `users` (in the given order), over the
    /// full item catalog.
    pub fn submatrix(&self, users: &[u32]) -> CsrMatrix {
        CsrMatrix::from_rows(
            self.n_items(),
            users.iter().map(|&u| self.user_items(u).iter().copied()),
        )
    }

    /// User records for every user in the dataset.
    pub fn user_records(&self) -> Vec<UserRecord> {
        self.users
            .iter()
            .zip(&self.genders)
            .map(|(u, g)| UserRecord { user_id: u.clone(), gender: *g })
            .collect()
    }

    /// All interactions in canonical (user id, item id) order. Timestamps
    /// are not retained past filtering.
    pub fn interactions(&self) -> impl Iterator<Item = Interaction> + '_ {
        (0..self.n_users() as u32).flat_map(move |u| {
            self.user_items(u)
                .iter()
                .zip(self.user_play_counts(u))
                .map(move |(&i, &pc)| Interaction {
                    user_id: self.user_id(u).to_string(),
                    item_id: self.item_id(i).to_string(),
                    play_count: pc,
                    timestamp: None,
                })
        })
    }

    /// Writes the dataset as a three-column interactions TSV.
    pub fn write_interactions<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in self.interactions() {
            writeln!(out, "{}\t{}\t{}", rec.user_id, rec.item_id, rec.play_count)?;
        }
        Ok(())
    }

    /// Writes the dataset's users as a two-column users TSV.
    pub fn write_users<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (u, g) in self.users.iter().zip(&self.genders) {
            writeln!(out, "{u}\t{}", g.code())?;
        }
        Ok(())
    }
}

/// Keeps exactly `n` items drawn uniformly at random without replacement.
/// Interactions with dropped items go with them, as do users left with no
/// items at all.
pub fn sample_items(dataset: &Dataset, n: usize, seed: u64) -> Result<Dataset, DatasetError> {
    let available = dataset.n_items();
    if n > available {
        return Err(DatasetError::SampleTooLarge { requested: n, available });
    }
    if n == available {
        return Ok(dataset.clone());
    }
    let mut rng = rng::seeded(seed, &[rng::fnv1a(*b"sample_items")]);
    let mut keep = vec![false; available];
    for i in index::sample(&mut rng, available, n) {
        keep[i] = true;
    }
    let kept: Vec<Interaction> = dataset
        .interactions()
        .filter(|rec| keep[dataset.item_index(&rec.item_id).unwrap() as usize])
        .collect();
    let users = dataset.user_records();
    Ok(Dataset::from_interactions(&kept, &users))
}

#[cfg(test)]
pub(crate) mod fixture {
    //! Hand-built 8-user × 12-item ingestion fixture.

    /// TSV lines with timestamps; one duplicate `u1 i01` line.
    pub fn lines() -> Vec<String> {
        let mut rows: Vec<(String, String, u64, i64)> = Vec::new();
        let mut add = |u: &str, i: &str, pc: u64, ts: i64| rows.push((u.into(), i.into(), pc, ts));
        for u in 1..=6 {
            for i in 1..=6 {
                add(&format!("u{u}"), &format!("i{i:02}"), 3, 2000);
            }
        }
        add("u7", "i01", 4, 2000);
        add("u7", "i02", 4, 2000);
        add("u7", "i03", 2, 2000);
        add("u7", "i04", 1, 2000);
        add("u7", "i05", 5, 100);
        for i in ["i01", "i02", "i03", "i04"] {
            add("u8", i, 2, 2000);
        }
        add("u8", "i12", 9, 2000);
        for u in 1..=4 {
            add(&format!("u{u}"), "i07", 2, 2000);
        }
        add("u5", "i07", 1, 2000);
        for u in 1..=3 {
            add(&format!("u{u}"), "i08", 2, 2000);
        }
        add("u4", "i08", 2, 50);
        add("u5", "i08", 2, 50);
        for u in [2, 3, 4, 5, 6] {
            add(&format!("u{u}"), "i09", 2, 2000);
        }
        for u in [1, 2, 3, 6, 7] {
            add(&format!("u{u}"), "i10", 3, 2000);
        }
        for u in 1..=8 {
            add(&format!("u{u}"), "i11", 1, 2000);
        }
        add("u6", "i12", 2, 2000);
        add("u1", "i01", 2, 2000);
        rows.into_iter()
            .map(|(u, i, pc, ts)| format!("{u}\t{i}\t{pc}\t{ts}"))
            .collect()
    }

    pub fn text() -> String {
        lines().join("\n") + "\n"
    }

    pub fn users_text() -> String {
        "u1\tf\nu2\tm\nu3\tf\nu4\tm\nu5\tm\nu6\t\nu7\tf\nu8\tm\n".to_string()
    }

    #[test]
    fn checked_in_copies_match() {
        assert_eq!(include_str!("../../tests/data/fixture_interactions.tsv"), text());
        assert_eq!(include_str!("../../tests/data/fixture_users.tsv"), users_text());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inter(u: &str, i: &str, pc: u64) -> Interaction {
        Interaction { user_id: u.into(), item_id: i.into(), play_count: pc, timestamp: None }
    }

    fn grid(n_users: usize, n_items: usize) -> Dataset {
        let recs: Vec<Interaction> = (0..n_users)
            .flat_map(|u| {
                (0..n_items)
                    .filter(move |i| (u + i) % 3 != 0)
                    .map(move |i| inter(&format!("u{u:03}"), &format!("i{i:04}"), 2))
            })
            .collect();
        Dataset::from_interactions(&recs, &[])
    }

    #[test]
    fn canonical_ordering_and_lookup() {
        let d = Dataset::from_interactions(
            &[inter("b", "y", 1), inter("a", "z", 2), inter("a", "x", 3), inter("c", "q", 0)],
            &[UserRecord { user_id: "a".into(), gender: Gender::Female }],
        );
        assert_eq!(d.user_ids(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.item_ids(), &["x".to_string(), "y".to_string(), "z".to_string()]);
        assert_eq!(d.user_items(0), &[0, 2]);
        assert_eq!(d.user_play_counts(0), &[3, 2]);
        assert_eq!(d.gender(0), Gender::Female);
        assert_eq!(d.gender(1), Gender::Unknown);
        assert_eq!(d.item_index("q"), None);
    }

    #[test]
    fn gender_codes() {
        assert_eq!(Gender::parse("F"), Gender::Female);
        assert_eq!(Gender::parse("m"), Gender::Male);
        assert_eq!(Gender::parse("other"), Gender::Unknown);
        assert_eq!(Gender::parse(""), Gender::Unknown);
    }

    #[test]
    fn full_sample_is_identity() {
        let d = grid(20, 50);
        assert_eq!(sample_items(&d, 50, 3).unwrap(), d);
    }

    #[test]
    fn oversized_sample_is_rejected() {
        let d = grid(5, 10);
        assert!(matches!(
            sample_items(&d, 11, 0),
            Err(DatasetError::SampleTooLarge { requested: 11, available: 10 })
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_exact() {
        let d = grid(10, 5000);
        let a = sample_items(&d, 1000, 99).unwrap();
        let b = sample_items(&d, 1000, 99).unwrap();
        assert_eq!(a.n_items(), 1000);
        assert_eq!(a.item_ids(), b.item_ids());
        let c = sample_items(&d, 1000, 100).unwrap();
        assert_ne!(a.item_ids(), c.item_ids());
        for rec in a.interactions() {
            assert!(a.item_index(&rec.item_id).is_some());
        }
    }

    #[test]
    fn sampling_inclusion_is_uniform() {
        // 200 repetitions, inclusion ~ Binomial(200, 0.2) per item.
        let d = grid(3, 5000);
        let reps = 200;
        let mut hits = vec![0u32; 5000];
        for seed in 0..reps {
            let s = sample_items(&d, 1000, seed).unwrap();
            for id in s.item_ids() {
                hits[d.item_index(id).unwrap() as usize] += 1;
            }
        }
        let p = 0.2;
        let mean = reps as f64 * p;
        let sd = (reps as f64 * p * (1.0 - p)).sqrt();
        let freq_mean = hits.iter().map(|&h| h as f64).sum::<f64>() / 5000.0;
        assert!((freq_mean - mean).abs() < 1e-9, "every draw keeps exactly 1000 items");
        // per-item frequencies: at most a Bonferroni-sized tail beyond 3 sd
        let outside = hits.iter().filter(|&&h| (h as f64 - mean).abs() > 3.0 * sd).count();
        assert!(outside <= 25, "{outside} of 5000 items outside 3 sd");
        // the pooled frequency spread matches the binomial variance
        let var = hits.iter().map(|&h| (h as f64 - mean).powi(2)).sum::<f64>() / 5000.0;
        assert!((var.sqrt() - sd).abs() < 0.1 * sd, "sd {} vs {}", var.sqrt(), sd);
    }
}
