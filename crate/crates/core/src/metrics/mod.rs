//! Foreground-restricted Rand index and its reporting.

mod bootstrap;
mod clustering;
mod report;

pub use bootstrap::{aggregate, bootstrap_ci, Aggregation, BootstrapConfig, ConfidenceInterval};
pub use clustering::{
    align_prediction, evaluate_page, rand_index, rand_index_bruteforce, ContingencyTable,
    MissingPolicy, PageScore, PixelClustering, RandIndex, BRUTE_FORCE_LIMIT,
};
pub use report::{Aggregate, EvalReport, PageEntry, ReportConfig, REPORT_SCHEMA_VERSION};

use thiserror::Error;

use crate::geometry::Size;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("label maps differ in size: ground truth {gt:?}, prediction {pred:?}")]
    SizeMismatch { gt: Size, pred: Size },
    #[error("clusterings differ in length: {gt} vs {pred}")]
    LengthMismatch { gt: usize, pred: usize },
    #[error("the Rand index needs at least 2 elements, got {0}")]
    TooFewElements(usize),
    #[error("brute-force pair enumeration is limited to {limit} elements, got {0}", limit = BRUTE_FORCE_LIMIT)]
    TooLargeForBruteForce(usize),
    #[error("bootstrap needs at least 2 pages, got {0}")]
    TooFewPages(usize),
    #[error("bootstrap needs at least one replicate")]
    NoReplicates,
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("fresh cluster ids exceed the 32-bit id space")]
    IdSpaceExhausted,
}
