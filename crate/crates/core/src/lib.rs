//! Per-instance algorithm selection for explicit-rating recommenders.
//!
//! The pipeline trains a pool of base rating predictors, clusters instances
//! in a PCA-reduced feature space, learns which predictor is best inside each
//! cluster, and routes unseen instances to that predictor. Oracle analyses
//! over the instance × algorithm error matrix quantify how much a perfect
//! selector could gain.
//!
//! Module map:
//! - [`data`]: MovieLens-format parsing, feature encoding, rating statistics, folds
//! - [`algorithms`]: the 14 base predictors behind [`algorithms::fit`] / [`algorithms::TrainedModel::predict`]
//! - [`perf`]: error matrix, effectiveness profiles, oracle MAE
//! - [`cluster`]: PCA, k-means, elbow selection, KNN cluster assignment
//! - [`selector`]: per-cluster routing table and the mean-ensemble baseline
//! - [`stats`]: MAE and the paired t-test
//! - [`experiment`]: cross-validated runs and report files
//! - [`config`]: the flat key-value run configuration

pub mod algorithms;
pub mod cluster;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod perf;
pub mod selector;
pub mod stats;

pub use error::{Error, Result};

/// Mixes a stream key into a base seed (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
