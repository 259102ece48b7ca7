//! Synthetic long-tail listening data.
//!
//! Items have a popularity rank `r` (0-based) and the base draw weight
//! `(r + 1)^-exponent`. Each item belongs to taste cluster `r % clusters`,
//! so every cluster holds a mix of head and tail items. A user belongs to
//! one cluster and draws each item from it with probability
//! `cluster_affinity`, otherwise from the whole catalog. Users also get a
//! mainstreaminess weight `w ~ U(0, spread)`: with probability `w` a draw
//! ignores popularity and picks a catalog item uniformly, so larger spreads
//! produce more niche-leaning users.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Gender, Interaction, UserRecord};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    /// Power-law exponent of item popularity by rank.
    pub exponent: f64,
    /// Mean number of distinct items per user (at least 5).
    pub mean_history: f64,
    pub mainstreaminess_spread: f64,
    /// Probability a user is female; everyone else is male.
    pub gender_ratio: f64,
    pub clusters: usize,
    pub cluster_affinity: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_users: 2000,
            n_items: 5000,
            exponent: 1.0,
            mean_history: 40.0,
            mainstreaminess_spread: 0.5,
            gender_ratio: 0.25,
            clusters: 20,
            cluster_affinity: 0.8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub interactions: Vec<Interaction>,
    pub users: Vec<UserRecord>,
    /// Item id at each popularity rank.
    pub items_by_rank: Vec<String>,
}

impl SyntheticData {
    pub fn write(&self, interactions: &Path, users: &Path) -> io::Result<()> {
        let mut out = BufWriter::new(fs::File::create(interactions)?);
        for rec in &self.interactions {
            writeln!(out, "{}\t{}\t{}", rec.user_id, rec.item_id, rec.play_count)?;
        }
        out.flush()?;
        let mut out = BufWriter::new(fs::File::create(users)?);
        for u in &self.users {
            writeln!(out, "{}\t{}", u.user_id, u.gender.code())?;
        }
        out.flush()
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_items < 10 {
            return bad(format!("need at least 10 items, got {}", self.n_items));
        }
        if self.n_users == 0 {
            return bad("need at least one user".into());
        }
        if !(self.exponent >= 0.0 && self.exponent.is_finite()) {
            return bad(format!("exponent {} must be a non-negative number", self.exponent));
        }
        if self.mean_history.is_nan() || self.mean_history < 5.0 || self.mean_history > (self.n_items / 2) as f64 {
            return bad(format!("mean history {} must lie in [5, n_items / 2]", self.mean_history));
        }
        for (name, v) in [
            ("mainstreaminess_spread", self.mainstreaminess_spread),
            ("gender_ratio", self.gender_ratio),
            ("cluster_affinity", self.cluster_affinity),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} must lie in [0, 1]"));
            }
        }
        if self.clusters == 0 || self.clusters > self.n_items {
            return bad(format!("clusters {} must lie in [1, n_items]", self.clusters));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SyntheticData, SynthError> {
        self.validate()?;
        let n = self.n_items;
        let weights = rank_weights(n, self.exponent);
        let global = WeightedIndex::new(&weights).expect("positive weights");
        let members: Vec<Vec<usize>> =
            (0..self.clusters).map(|c| (c..n).step_by(self.clusters).collect()).collect();
        let in_cluster: Vec<WeightedIndex<f64>> = members
            .iter()
            .map(|m| WeightedIndex::new(m.iter().map(|&r| weights[r])).expect("positive weights"))
            .collect();

        let mut rng = rng::seeded(self.seed, &[rng::fnv1a(*b"synth")]);
        let mut item_of_rank: Vec<usize> = (0..n).collect();
        item_of_rank.shuffle(&mut rng);
        let width = digits(n);
        let item_name = |r: usize| format!("i{:0width$}", item_of_rank[r]);
        let uwidth = digits(self.n_users).max(5);

        let lengths = Geometric::new(1.0 / (self.mean_history - 4.0)).expect("valid probability");
        let plays = Geometric::new(0.3).expect("valid probability");
        let cap = n / 2;

        let mut interactions = Vec::new();
        let mut users = Vec::with_capacity(self.n_users);
        let mut taken = vec![false; n];
        for u in 0..self.n_users {
            let user_id = format!("u{u:0uwidth$}");
            let gender = if rng.random_bool(self.gender_ratio) { Gender::Female } else { Gender::Male };
            let cluster = rng.random_range(0..self.clusters);
            let niche = rng.random::<f64>() * self.mainstreaminess_spread;
            let len = (5 + lengths.sample(&mut rng) as usize).min(cap);

            let mut ranks = Vec::with_capacity(len);
            let mut attempts = 0usize;
            while ranks.len() < len {
                attempts += 1;
                let r = if attempts > 50 * len {
                    // heavy heads make distinct draws slow near the cap; finish uniformly
                    rng.random_range(0..n)
                } else if rng.random_bool(niche) {
                    rng.random_range(0..n)
                } else if rng.random_bool(self.cluster_affinity) {
                    members[cluster][in_cluster[cluster].sample(&mut rng)]
                } else {
                    global.sample(&mut rng)
                };
                if !taken[r] {
                    taken[r] = true;
                    ranks.push(r);
                }
            }
            for &r in &ranks {
                taken[r] = false;
                interactions.push(Interaction {
                    user_id: user_id.clone(),
                    item_id: item_name(r),
                    play_count: 2 + plays.sample(&mut rng),
                    timestamp: None,
                });
            }
            users.push(UserRecord { user_id, gender });
        }
        let items_by_rank = (0..n).map(item_name).collect();
        Ok(SyntheticData { interactions, users, items_by_rank })
    }
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}

/// `(r + 1)^-exponent` for ranks `0..n`.
pub fn rank_weights(n: usize, exponent: f64) -> Vec<f64> {
    (1..=n).map(|r| (r as f64).powf(-exponent)).collect()
}

/// Draws `draws` ranks from the power law over `n` items.
pub fn sample_ranks(n: usize, exponent: f64, draws: usize, seed: u64) -> Vec<usize> {
    let dist = WeightedIndex::new(rank_weights(n, exponent)).expect("positive weights");
    let mut rng = rng::seeded(seed, &[rng::fnv1a(*b"synth_ranks")]);
    (0..draws).map(|_| dist.sample(&mut rng)).collect()
}
