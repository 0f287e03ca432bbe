//! Histogram gradient-boosted trees for binary classification.
//!
//! Logistic loss, Newton leaf values, learned missing-value directions, class
//! weighting and two growth policies: level by level up to `max_depth`, or
//! best-leaf-first up to `max_leaves`.

pub mod binning;
mod learner;
mod model;

use serde::{Deserialize, Serialize};

pub use self::learner::{fit, fit_rows};
pub use self::model::{Node, Tree, TreeEnsemble, MODEL_FORMAT, MODEL_FORMAT_VERSION};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthPolicy {
    DepthWise,
    LeafWise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    /// Leaf budget for leaf-wise growth.
    pub max_leaves: usize,
    /// Depth limit for both policies.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub l2_leaf_reg: f64,
    pub n_bins: usize,
    pub growth_policy: GrowthPolicy,
    /// Weight applied to positive rows; negatives weigh 1.
    pub pos_class_weight: f64,
    pub seed: u64,
    /// Fraction of features sampled for each tree.
    pub feature_subsample: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_trees: 100,
            learning_rate: 0.1,
            max_leaves: 31,
            max_depth: 6,
            min_samples_leaf: 20,
            l2_leaf_reg: 1.0,
            n_bins: 64,
            growth_policy: GrowthPolicy::DepthWise,
            pos_class_weight: 1.0,
            seed: 0,
            feature_subsample: 1.0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(m));
        if self.n_trees < 1 {
            return fail("n_trees must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return fail("learning_rate must lie in (0, 1]");
        }
        if !(2..=256).contains(&self.n_bins) {
            return fail("n_bins must lie in [2, 256]");
        }
        if self.max_depth < 1 {
            return fail("max_depth must be at least 1");
        }
        if self.max_leaves < 2 {
            return fail("max_leaves must be at least 2");
        }
        if self.min_samples_leaf < 1 {
            return fail("min_samples_leaf must be at least 1");
        }
        if !(self.l2_leaf_reg >= 0.0 && self.l2_leaf_reg.is_finite()) {
            return fail("l2_leaf_reg must be finite and non-negative");
        }
        if !(self.pos_class_weight >= 0.0 && self.pos_class_weight.is_finite()) {
            return fail("pos_class_weight must be finite and non-negative");
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return fail("feature_subsample must lie in (0, 1]");
        }
        Ok(())
    }
}
