//! Measuring how consistently a ranking system answers semantically
//! identical queries.
//!
//! The central metric is the Ranking Distance Score ([`metrics::rds`]), a
//! log-discounted distance between two ranked lists that also penalizes items
//! present in only one of them. Around it sit the pieces needed to run a
//! robustness study on search logs:
//!
//! - [`normalize`] turns raw queries into TPS keys (tokenize, filter, stem, sort);
//! - [`ingest`] parses weekly logs and applies the data filters;
//! - [`pairs`] builds semantically identical query pairs and scores them;
//! - [`taxonomy`] labels a pair with the kind of surface difference it shows;
//! - [`ensemble`] averages positions across snapshots and compares RDS;
//! - [`report`] aggregates results into histograms, trends and correlations;
//! - [`synth`] generates logs and perturbations with known ground truth.

pub mod ensemble;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod normalize;
pub mod pairs;
pub mod report;
pub mod synth;
pub mod taxonomy;
mod tsv;

pub use error::{Error, Result};
pub use metrics::{ItemId, MetricOutcome, RankedList, RdsResult};
pub use normalize::{NormalizationConfig, TpsKey};
pub use pairs::{PairSource, QueryPair};
pub use taxonomy::TaxonomyLabel;
