//! Per-user popularity bias metrics, utility, and the grouped report.
//!
//! Each user contributes five percent deltas between the moments of their
//! history and recommendation popularity distributions, a KL divergence and
//! a Kendall's τ between the decile-binned forms, and NDCG@10. Bias metrics
//! are aggregated by median, NDCG by mean.

mod aggregate;
mod distribution;
mod dump;
mod moments;
mod ranking;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Gender;
use crate::recommenders::Algorithm;

pub use aggregate::{aggregate, group_delta, median, AggregateRow, GroupFilter};
pub use distribution::{kendall_tau_binned, kl_divergence};
pub use dump::{read_per_user, write_per_user};
pub use moments::{moment_summary, percent_delta, MomentSummary};
pub use ranking::ndcg_at_k;
pub use report::{build_report, AlgorithmReport, BiasReport};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("moments of an empty multiset")]
    EmptyInput,
    #[error("holdout is empty")]
    EmptyHoldout,
    #[error("no records in group {0}")]
    EmptyGroup(String),
    #[error("per-user dump line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// The eight report columns, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    PctDeltaMean,
    PctDeltaMedian,
    PctDeltaVariance,
    PctDeltaSkew,
    PctDeltaKurtosis,
    Kl,
    KendallTau,
    NdcgAt10,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::PctDeltaMean,
        Metric::PctDeltaMedian,
        Metric::PctDeltaVariance,
        Metric::PctDeltaSkew,
        Metric::PctDeltaKurtosis,
        Metric::Kl,
        Metric::KendallTau,
        Metric::NdcgAt10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PctDeltaMean => "pct_delta_mean",
            Metric::PctDeltaMedian => "pct_delta_median",
            Metric::PctDeltaVariance => "pct_delta_variance",
            Metric::PctDeltaSkew => "pct_delta_skew",
            Metric::PctDeltaKurtosis => "pct_delta_kurtosis",
            Metric::Kl => "kl",
            Metric::KendallTau => "kendall_tau",
            Metric::NdcgAt10 => "ndcg_at_10",
        }
    }

    pub fn position(self) -> usize {
        Metric::ALL.iter().position(|&m| m == self).unwrap()
    }

    /// NDCG is averaged; every bias metric takes the median.
    pub fn uses_mean(self) -> bool {
        self == Metric::NdcgAt10
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s}"))
    }
}

/// One user's bias and utility measurements for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerUserBiasRecord {
    pub user_id: String,
    pub gender: Gender,
    pub algorithm: Algorithm,
    pub fold: usize,
    /// Mean, median, variance, skewness and kurtosis deltas in percent;
    /// `None` where the history moment is zero or either moment undefined.
    pub pct_delta: [Option<f64>; 5],
    /// KL(history ‖ recommendations) in nats.
    pub kl: f64,
    /// `None` when every bin pair is tied in one of the distributions.
    pub kendall_tau: Option<f64>,
    pub ndcg_at_10: f64,
}

impl PerUserBiasRecord {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Kl => Some(self.kl),
            Metric::KendallTau => self.kendall_tau,
            Metric::NdcgAt10 => Some(self.ndcg_at_10),
            m => self.pct_delta[m.position()],
        }
    }
}
