//! Veridicality classification of contest predictions on social media, and
//! crowd-forecast aggregation on top of it.
//!
//! The pipeline runs offline over JSONL corpora: ingest (normalize, dedup,
//! filter), tag contender mentions, extract sparse features, train or apply
//! a three-class log-linear model, then aggregate positive-veridicality
//! counts into per-contest winner forecasts, baselines, surprise reports and
//! per-account reliability rankings.

pub mod analysis;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod forecaster;
mod io_util;
pub mod optim;
pub mod pipeline;
pub mod runner;
pub mod sentiment;
pub mod tagging;

pub use error::{Error, Result};
