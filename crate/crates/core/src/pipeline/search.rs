use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cv::{CvContext, CvReport};
use crate::error::{Error, Result};
use crate::gbdt::{GbdtConfig, GrowthPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealRange {
    pub min: f64,
    pub max: f64,
}

impl IntRange {
    pub fn point(v: usize) -> Self {
        IntRange { min: v, max: v }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

impl RealRange {
    pub fn point(v: f64) -> Self {
        RealRange { min: v, max: v }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    fn sample_log(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min.ln()..=self.max.ln()).exp()
        }
    }
}

/// Ranges for seeded random hyperparameter search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub n_trees: IntRange,
    /// Sampled log-uniformly.
    pub learning_rate: RealRange,
    pub max_leaves: IntRange,
    pub max_depth: IntRange,
    pub min_samples_leaf: IntRange,
    /// Sampled log-uniformly.
    pub l2_leaf_reg: RealRange,
    pub feature_subsample: RealRange,
    pub pos_class_weight: RealRange,
    pub growth_policy: Vec<GrowthPolicy>,
    pub n_bins: usize,
    pub trial_budget: usize,
    pub seed: u64,
    /// Configurations evaluated before any sampled ones; they count against
    /// the budget.
    pub seed_configs: Vec<GbdtConfig>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            n_trees: IntRange { min: 50, max: 200 },
            learning_rate: RealRange { min: 0.03, max: 0.3 },
            max_leaves: IntRange { min: 8, max: 32 },
            max_depth: IntRange { min: 2, max: 6 },
            min_samples_leaf: IntRange { min: 10, max: 50 },
            l2_leaf_reg: RealRange { min: 0.1, max: 10.0 },
            feature_subsample: RealRange { min: 0.5, max: 1.0 },
            pos_class_weight: RealRange::point(1.0),
            growth_policy: vec![GrowthPolicy::DepthWise, GrowthPolicy::LeafWise],
            n_bins: 64,
            trial_budget: 20,
            seed: 0,
            seed_configs: Vec::new(),
        }
    }
}

impl SearchSpace {
    /// A space containing only `config`.
    pub fn point(config: &GbdtConfig, trial_budget: usize) -> Self {
        SearchSpace {
            n_trees: IntRange::point(config.n_trees),
            learning_rate: RealRange::point(config.learning_rate),
            max_leaves: IntRange::point(config.max_leaves),
            max_depth: IntRange::point(config.max_depth),
            min_samples_leaf: IntRange::point(config.min_samples_leaf),
            l2_leaf_reg: RealRange::point(config.l2_leaf_reg),
            feature_subsample: RealRange::point(config.feature_subsample),
            pos_class_weight: RealRange::point(config.pos_class_weight),
            growth_policy: vec![config.growth_policy],
            n_bins: config.n_bins,
            trial_budget,
            seed: config.seed,
            seed_configs: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ints = [
            ("n_trees", self.n_trees),
            ("max_leaves", self.max_leaves),
            ("max_depth", self.max_depth),
            ("min_samples_leaf", self.min_samples_leaf),
        ];
        for (name, r) in ints {
            if r.min > r.max {
                return Err(Error::config(format!("{name} range is empty")));
            }
        }
        let reals = [
            ("learning_rate", self.learning_rate, true),
            ("l2_leaf_reg", self.l2_leaf_reg, true),
            ("feature_subsample", self.feature_subsample, false),
            ("pos_class_weight", self.pos_class_weight, false),
        ];
        for (name, r, log) in reals {
            if !(r.min <= r.max) || !r.min.is_finite() || !r.max.is_finite() {
                return Err(Error::config(format!("{name} range is empty or not finite")));
            }
            if log && r.min <= 0.0 {
                return Err(Error::config(format!("{name} is log-sampled and needs min > 0")));
            }
        }
        if self.growth_policy.is_empty() {
            return Err(Error::config("growth_policy list is empty"));
        }
        if self.trial_budget < 1 {
            return Err(Error::config("trial_budget must be at least 1"));
        }
        Ok(())
    }

    /// The configurations tried, in evaluation order.
    pub fn trial_configs(&self) -> Result<Vec<GbdtConfig>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out: Vec<GbdtConfig> = self.seed_configs.iter().take(self.trial_budget).cloned().collect();
        while out.len() < self.trial_budget {
            let policy = self.growth_policy[rng.random_range(0..self.growth_policy.len())];
            out.push(GbdtConfig {
                n_trees: self.n_trees.sample(&mut rng),
                learning_rate: self.learning_rate.sample_log(&mut rng),
                max_leaves: self.max_leaves.sample(&mut rng),
                max_depth: self.max_depth.sample(&mut rng),
                min_samples_leaf: self.min_samples_leaf.sample(&mut rng),
                l2_leaf_reg: self.l2_leaf_reg.sample_log(&mut rng),
                n_bins: self.n_bins,
                growth_policy: policy,
                pos_class_weight: self.pos_class_weight.sample(&mut rng),
                seed: self.seed,
                feature_subsample: self.feature_subsample.sample(&mut rng),
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_config: GbdtConfig,
    pub best_trial: usize,
    pub trials: Vec<CvReport>,
}

/// Evaluates every trial configuration by CV mean AUC on `features` and
/// returns the first best. Failed trials are kept in the log.
pub fn tune(ctx: &CvContext, space: &SearchSpace, features: &[String]) -> Result<TuneResult> {
    let configs = space.trial_configs()?;
    let mut trials: Vec<CvReport> = Vec::with_capacity(configs.len());
    let mut best: Option<usize> = None;
    for (id, config) in configs.into_iter().enumerate() {
        let report = ctx.evaluate(&config, features, id, "tune")?;
        if let Some(err) = &report.error {
            log::warn!("trial {id} failed: {err}");
        } else if best.is_none_or(|b: usize| report.mean_auc > trials[b].mean_auc) {
            best = Some(id);
        }
        log::info!("trial {id}: mean CV AUC {:.4}", report.mean_auc);
        trials.push(report);
    }
    let best_trial = best.ok_or_else(|| Error::Infeasible("every tuning trial failed".into()))?;
    Ok(TuneResult {
        best_config: trials[best_trial].config.clone(),
        best_trial,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_space_repeats_config() {
        let cfg = GbdtConfig {
            learning_rate: 0.07,
            l2_leaf_reg: 3.3,
            ..GbdtConfig::default()
        };
        let configs = SearchSpace::point(&cfg, 4).trial_configs().unwrap();
        assert_eq!(configs.len(), 4);
        assert!(configs.iter().all(|c| *c == cfg));
    }

    #[test]
    fn sampling_is_seeded_and_in_range() {
        let s = SearchSpace::default();
        let a = s.trial_configs().unwrap();
        assert_eq!(a, s.trial_configs().unwrap());
        for c in &a {
            assert!(c.learning_rate >= 0.03 && c.learning_rate <= 0.3);
            assert!((2..=6).contains(&c.max_depth));
            c.validate().unwrap();
        }
    }
}
