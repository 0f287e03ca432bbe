//! Model development protocol: stratified holdout, cross-validated random
//! search, SHAP-based recursive feature elimination, and a final refit
//! scored once on the holdout.
//!
//! Holdout rows are removed before any statistic is fitted. Caps and the
//! correlation filter are refit inside every CV training fold, and every
//! fitted statistic records the rows it saw in a [`Lineage`] log.

mod cv;
mod rfe;
mod search;
mod split;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use self::cv::{CvContext, CvReport, CvSettings, FoldMetric, Lineage, LineageEntry};
pub use self::rfe::{shap_rfe, EliminationRound, RfeResult, RfeSettings};
pub use self::search::{tune, IntRange, RealRange, SearchSpace, TuneResult};
pub use self::split::{complement, stratified_kfold, stratified_split};

use crate::error::{Error, Result};
use crate::eval::{metric_report, MetricReport, DEFAULT_KS};
use crate::features::{
    apply_caps, build_features, correlation_filter, fit_caps, CapSet, FeatureMatrix, FilterReport,
    WindowConfig,
};
use crate::gbdt::{fit_rows, GbdtConfig, TreeEnsemble};
use crate::ingest::DatasetBundle;
use crate::labeling::{label_clients, GrowthThresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub test_fraction: f64,
    pub split_seed: u64,
    pub cv: CvSettings,
    pub space: SearchSpace,
    pub rfe: RfeSettings,
    /// Upper bound on tune + eliminate cycles.
    pub outer_rounds_limit: usize,
    /// Minimum number of labeled clients.
    pub min_clients: usize,
    /// Features never offered to the model.
    pub exclude_features: Vec<String>,
    /// K values reported as precision@K on the holdout.
    pub ks: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            test_fraction: 0.20,
            split_seed: 0,
            cv: CvSettings::default(),
            space: SearchSpace::default(),
            rfe: RfeSettings::default(),
            outer_rounds_limit: 3,
            min_clients: 100,
            exclude_features: Vec::new(),
            ks: DEFAULT_KS.to_vec(),
        }
    }
}

impl PipelineConfig {
    /// Points every seed at one value.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split_seed = seed;
        self.cv.seed = seed;
        self.space.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRound {
    pub outer_round: usize,
    pub tuned_config: GbdtConfig,
    pub tune_best_auc: f64,
    pub rfe_best_auc: f64,
    pub n_features_in: usize,
    pub n_features_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub train_clients: Vec<String>,
    pub test_clients: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub best_config: GbdtConfig,
    pub final_features: Vec<String>,
    /// Mean CV AUC of the selected configuration and feature set.
    pub cv_mean_auc: f64,
    pub elimination_history: Vec<EliminationRound>,
    pub outer_rounds: Vec<OuterRound>,
    pub trials: Vec<CvReport>,
    pub final_model: TreeEnsemble,
    pub holdout_metrics: MetricReport,
    /// Caps fitted on the full training split and applied before scoring.
    pub caps: CapSet,
    pub filter: FilterReport,
    pub split: SplitInfo,
    pub lineage: Lineage,
}

impl PipelineResult {
    pub fn write_elimination_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["outer_round", "round", "n_features", "mean_auc", "std_auc", "removed"])?;
        for r in &self.elimination_history {
            w.write_record([
                r.outer_round.to_string(),
                r.round.to_string(),
                r.n_features.to_string(),
                r.mean_auc.to_string(),
                r.std_auc.to_string(),
                r.removed.join(";"),
            ])?;
        }
        w.flush().map_err(|e| Error::io("elimination_history.csv", e))?;
        Ok(())
    }
}

/// Runs the protocol on a feature matrix with one binary label per row.
pub fn run_on_matrix(
    matrix: &FeatureMatrix,
    labels: &[u8],
    config: &PipelineConfig,
) -> Result<PipelineResult> {
    if labels.len() != matrix.n_rows() {
        return Err(Error::input("label count does not match matrix rows"));
    }
    if matrix.n_rows() < config.min_clients {
        return Err(Error::input(format!(
            "{} labeled clients, fewer than the required {}",
            matrix.n_rows(),
            config.min_clients
        )));
    }
    if config.outer_rounds_limit < 1 {
        return Err(Error::config("outer_rounds_limit must be at least 1"));
    }
    let (train_idx, test_idx) = stratified_split(labels, config.test_fraction, config.split_seed)?;
    // The holdout is cut away here; nothing below sees those rows until scoring.
    let train = matrix.select_rows(&train_idx);
    let train_labels: Vec<u8> = train_idx.iter().map(|&r| labels[r]).collect();

    let ctx = CvContext::new(&train, &train_labels, train_idx.clone(), &config.cv)?;

    let caps = if config.cv.apply_caps {
        fit_caps(&train, None)
    } else {
        CapSet::default()
    };
    let train_capped = apply_caps(&train, &caps);
    let filter = correlation_filter(&train_capped, &train_labels, None, config.cv.r_max)?;
    let mut features: Vec<String> = filter
        .surviving
        .iter()
        .filter(|f| !config.exclude_features.contains(f))
        .cloned()
        .collect();
    if features.is_empty() {
        return Err(Error::Infeasible("no features survive filtering".into()));
    }

    let mut history = Vec::new();
    let mut outer = Vec::new();
    let mut trials = Vec::new();
    let mut best: Option<(GbdtConfig, Vec<String>, f64)> = None;
    for round in 0..config.outer_rounds_limit {
        let tuned = tune(&ctx, &config.space, &features)?;
        let tune_auc = tuned.trials[tuned.best_trial].mean_auc;
        let (sel_features, sel_auc) = if features.len() >= 2 {
            let rfe = shap_rfe(&ctx, &tuned.best_config, &features, &config.rfe, round)?;
            history.extend(rfe.rounds.iter().cloned());
            (rfe.best_features, rfe.best_auc)
        } else {
            (features.clone(), tune_auc)
        };
        outer.push(OuterRound {
            outer_round: round,
            tuned_config: tuned.best_config.clone(),
            tune_best_auc: tune_auc,
            rfe_best_auc: sel_auc,
            n_features_in: features.len(),
            n_features_out: sel_features.len(),
        });
        trials.extend(tuned.trials);
        let improved = match &best {
            None => true,
            Some((_, _, auc)) => sel_auc >= auc + config.rfe.epsilon,
        };
        if !improved {
            break;
        }
        let unchanged = sel_features.len() == features.len();
        best = Some((tuned.best_config, sel_features.clone(), sel_auc));
        features = sel_features;
        if unchanged {
            // Elimination kept everything, so another cycle would repeat this one.
            break;
        }
    }
    let (best_config, final_features, cv_mean_auc) = best.expect("at least one outer round");

    let all: Vec<usize> = (0..train.n_rows()).collect();
    let final_model = fit_rows(&train_capped, &train_labels, &all, &final_features, &best_config)?;

    let mut lineage = ctx.lineage();
    lineage.record("final_caps", None, train_idx.clone());
    lineage.record("final_correlation_filter", None, train_idx.clone());
    lineage.record("final_fit", None, train_idx.clone());

    let test = apply_caps(&matrix.select_rows(&test_idx), &caps);
    let test_labels: Vec<u8> = test_idx.iter().map(|&r| labels[r]).collect();
    let scores = final_model.predict_proba(&test)?;
    let holdout_metrics = metric_report(&scores, &test_labels, test.client_ids(), &config.ks)?;
    log::info!(
        "final CV AUC {cv_mean_auc:.4}, holdout AUC {:.4} on {} clients",
        holdout_metrics.auc,
        test_idx.len()
    );

    let ids = matrix.client_ids();
    Ok(PipelineResult {
        best_config,
        final_features,
        cv_mean_auc,
        elimination_history: history,
        outer_rounds: outer,
        trials,
        final_model,
        holdout_metrics,
        caps,
        filter,
        split: SplitInfo {
            train_clients: train_idx.iter().map(|&r| ids[r].clone()).collect(),
            test_clients: test_idx.iter().map(|&r| ids[r].clone()).collect(),
        },
        lineage,
    })
}

/// Labels, featurizes and runs the protocol for one growth threshold.
/// Clients without enough pre-period volume are left out.
pub fn run_full_pipeline(
    bundle: &DatasetBundle,
    tau: f64,
    windows: &WindowConfig,
    config: &PipelineConfig,
) -> Result<PipelineResult> {
    let thresholds = GrowthThresholds::new(vec![tau])?;
    let labeled = label_clients(bundle, &thresholds);
    let eligible: Vec<_> = labeled.iter().filter(|c| c.eligible).collect();
    let features = build_features(bundle, windows)?;
    let ids: Vec<String> = eligible.iter().map(|c| c.client_id.clone()).collect();
    let rows = features.rows_for_clients(&ids)?;
    let matrix = features.select_rows(&rows);
    let labels: Vec<u8> = eligible.iter().map(|c| c.labels[0]).collect();
    run_on_matrix(&matrix, &labels, config)
}
