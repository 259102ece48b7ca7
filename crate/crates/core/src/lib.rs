//! Collaborative-filtering recommenders for implicit feedback data and a
//! per-user popularity bias audit.
//!
//! The pipeline reads listening interactions, filters and splits them
//! ([`dataset`]), derives item popularity and decile bins ([`popularity`]),
//! trains the baseline and collaborative models ([`recommenders`]), and
//! compares each user's history against their recommendations
//! ([`metrics`]). [`harness`] runs the cross-validated experiment end to end
//! and [`cli`] exposes it on the command line together with a synthetic
//! long-tail data generator ([`synth`]).

pub mod cli;
pub mod dataset;
pub mod harness;
pub mod metrics;
pub mod popularity;
pub mod recommenders;
pub mod rng;
pub mod sparse;
pub mod synth;

pub use dataset::{Dataset, Gender, Interaction, UserRecord};
pub use metrics::{BiasReport, PerUserBiasRecord};
pub use popularity::{DecileBins, PopularityIndex};
pub use recommenders::{Algorithm, Hyperparameters, Model, RecommendationList};
