//! Growth targeting for commercial cooler allocation.
//!
//! The crate covers the whole workflow: reading transactional sales data,
//! labeling clients by post-installation volume growth at several
//! thresholds, engineering client features, training a histogram gradient
//! boosted tree classifier, explaining it with exact tree Shapley values,
//! selecting features by iterative SHAP elimination, evaluating ranking
//! quality, and simulating the return of allocating coolers by model score
//! versus historical volume.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod allocsim;
pub mod cli;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod gbdt;
pub mod geometry;
pub mod ingest;
pub mod labeling;
pub mod pipeline;
pub mod stats;
pub mod syndata;

pub use error::{Error, Result};
