use std::collections::{BTreeMap, HashSet};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{complement, stratified_kfold};
use crate::error::Result;
use crate::eval::{auc, threshold_metrics};
use crate::explain::{shap_values_rows, ImportanceRanking};
use crate::features::{apply_caps, correlation_filter, fit_caps, CapSet, FeatureMatrix, FilterReport};
use crate::gbdt::{fit_rows, GbdtConfig};
use crate::stats::{mean, population_std, sigmoid};

/// Rows that fed one fitted statistic or model evaluation. Row indices refer
/// to the matrix given to the pipeline and are kept in memory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageEntry {
    pub stage: String,
    pub fold: Option<usize>,
    pub n_rows: usize,
    #[serde(skip)]
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub entries: Vec<LineageEntry>,
}

impl Lineage {
    pub fn record(&mut self, stage: &str, fold: Option<usize>, rows: Vec<usize>) {
        self.entries.push(LineageEntry {
            stage: stage.to_string(),
            fold,
            n_rows: rows.len(),
            rows,
        });
    }

    /// Entries whose rows intersect `rows`.
    pub fn touching(&self, rows: &[usize]) -> Vec<&LineageEntry> {
        let set: HashSet<usize> = rows.iter().copied().collect();
        self.entries
            .iter()
            .filter(|e| e.rows.iter().any(|r| set.contains(r)))
            .collect()
    }

    pub fn stages(&self) -> Vec<&str> {
        let mut s: Vec<&str> = self.entries.iter().map(|e| e.stage.as_str()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetric {
    pub fold: usize,
    pub auc: f64,
    pub precision_at_half: Option<f64>,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub trial_id: usize,
    pub fold_metrics: Vec<FoldMetric>,
    /// Zero for failed trials.
    pub mean_auc: f64,
    pub std_auc: f64,
    pub feature_set: Vec<String>,
    pub config: GbdtConfig,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSettings {
    pub k_folds: usize,
    pub seed: u64,
    pub r_max: f64,
    pub apply_caps: bool,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            k_folds: 5,
            seed: 0,
            r_max: crate::features::DEFAULT_R_MAX,
            apply_caps: true,
        }
    }
}

struct Fold {
    train: Vec<usize>,
    val: Vec<usize>,
    /// Full training matrix with this fold's caps applied.
    matrix: FeatureMatrix,
    surviving: HashSet<String>,
    caps: CapSet,
    filter: FilterReport,
}

/// Stratified folds over a training matrix with fold-local preprocessing
/// fitted once and reused by every evaluation.
pub struct CvContext {
    labels: Vec<u8>,
    origin: Vec<usize>,
    folds: Vec<Fold>,
    lineage: Mutex<BTreeMap<(String, Option<usize>), LineageEntry>>,
}

impl CvContext {
    /// `origin[i]` is the caller's row index for local row `i`; lineage is
    /// reported in those indices.
    pub fn new(
        matrix: &FeatureMatrix,
        labels: &[u8],
        origin: Vec<usize>,
        settings: &CvSettings,
    ) -> Result<Self> {
        let fold_rows = stratified_kfold(labels, settings.k_folds, settings.seed)?;
        let folds = fold_rows
            .into_par_iter()
            .map(|val| -> Result<Fold> {
                let train = complement(labels.len(), &val);
                let caps = if settings.apply_caps {
                    fit_caps(matrix, Some(&train))
                } else {
                    CapSet::default()
                };
                let capped = apply_caps(matrix, &caps);
                let filter = correlation_filter(&capped, labels, Some(&train), settings.r_max)?;
                Ok(Fold {
                    surviving: filter.surviving.iter().cloned().collect(),
                    train,
                    val,
                    matrix: capped,
                    caps,
                    filter,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ctx = CvContext {
            labels: labels.to_vec(),
            origin,
            folds,
            lineage: Mutex::new(BTreeMap::new()),
        };
        for (i, f) in ctx.folds.iter().enumerate() {
            ctx.record("caps", Some(i), &f.train);
            ctx.record("correlation_filter", Some(i), &f.train);
        }
        Ok(ctx)
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn fold_caps(&self, fold: usize) -> &CapSet {
        &self.folds[fold].caps
    }

    pub fn fold_filter(&self, fold: usize) -> &FilterReport {
        &self.folds[fold].filter
    }

    fn record(&self, stage: &str, fold: Option<usize>, local_rows: &[usize]) {
        let mut map = self.lineage.lock().unwrap();
        map.entry((stage.to_string(), fold)).or_insert_with(|| {
            let rows: Vec<usize> = local_rows.iter().map(|&r| self.origin[r]).collect();
            LineageEntry {
                stage: stage.to_string(),
                fold,
                n_rows: rows.len(),
                rows,
            }
        });
    }

    pub fn lineage(&self) -> Lineage {
        Lineage {
            entries: self.lineage.lock().unwrap().values().cloned().collect(),
        }
    }

    fn run_fold(
        &self,
        i: usize,
        config: &GbdtConfig,
        features: &[String],
        stage: &str,
        with_shap: bool,
    ) -> Result<(FoldMetric, Vec<f64>)> {
        let fold = &self.folds[i];
        self.record(stage, Some(i), &fold.train);
        self.record(&format!("{stage}_validation"), Some(i), &fold.val);
        let used: Vec<String> = features
            .iter()
            .filter(|f| fold.surviving.contains(*f))
            .cloned()
            .collect();
        let model = fit_rows(&fold.matrix, &self.labels, &fold.train, &used, config)?;
        let margins = model.predict_margin_rows(&fold.matrix, &fold.val)?;
        let y: Vec<u8> = fold.val.iter().map(|&r| self.labels[r]).collect();
        let probs: Vec<f64> = margins.iter().map(|&m| sigmoid(m)).collect();
        let metric = FoldMetric {
            fold: i,
            auc: auc(&margins, &y)?,
            precision_at_half: threshold_metrics(&probs, &y, 0.5)?.precision,
            n_features: used.len(),
        };
        let mut abs_sum = vec![0.0; features.len()];
        if with_shap {
            let pos: BTreeMap<&str, usize> = features
                .iter()
                .enumerate()
                .map(|(j, f)| (f.as_str(), j))
                .collect();
            let slots: Vec<usize> = model.feature_names.iter().map(|f| pos[f.as_str()]).collect();
            for e in shap_values_rows(&model, &fold.matrix, &fold.val)? {
                for (k, phi) in e.phi.iter().enumerate() {
                    abs_sum[slots[k]] += phi.abs();
                }
            }
        }
        Ok((metric, abs_sum))
    }

    fn run_all(
        &self,
        config: &GbdtConfig,
        features: &[String],
        stage: &str,
        with_shap: bool,
    ) -> Result<Vec<(FoldMetric, Vec<f64>)>> {
        (0..self.k())
            .into_par_iter()
            .map(|i| self.run_fold(i, config, features, stage, with_shap))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }

    fn report(
        config: &GbdtConfig,
        features: &[String],
        trial_id: usize,
        fold_metrics: Vec<FoldMetric>,
    ) -> CvReport {
        let aucs: Vec<f64> = fold_metrics.iter().map(|m| m.auc).collect();
        CvReport {
            trial_id,
            mean_auc: mean(&aucs).unwrap_or(0.0),
            std_auc: population_std(&aucs).unwrap_or(0.0),
            fold_metrics,
            feature_set: features.to_vec(),
            config: config.clone(),
            error: None,
        }
    }

    /// Mean CV AUC of `config` on `features`. A failing fit yields a report
    /// with `error` set rather than an error.
    pub fn evaluate(
        &self,
        config: &GbdtConfig,
        features: &[String],
        trial_id: usize,
        stage: &str,
    ) -> Result<CvReport> {
        Ok(match self.run_all(config, features, stage, false) {
            Ok(folds) => Self::report(
                config,
                features,
                trial_id,
                folds.into_iter().map(|(m, _)| m).collect(),
            ),
            Err(e) => CvReport {
                trial_id,
                fold_metrics: Vec::new(),
                mean_auc: 0.0,
                std_auc: 0.0,
                feature_set: features.to_vec(),
                config: config.clone(),
                error: Some(e.to_string()),
            },
        })
    }

    /// CV evaluation plus mean |SHAP| pooled over all validation rows.
    /// Features a fold's filter removed count as zero attribution there.
    pub fn evaluate_with_shap(
        &self,
        config: &GbdtConfig,
        features: &[String],
        stage: &str,
    ) -> Result<(CvReport, ImportanceRanking)> {
        let folds = self.run_all(config, features, stage, true)?;
        let mut total = vec![0.0; features.len()];
        let mut n = 0usize;
        let mut metrics = Vec::with_capacity(folds.len());
        for (i, (m, sums)) in folds.into_iter().enumerate() {
            for (t, s) in total.iter_mut().zip(&sums) {
                *t += s;
            }
            n += self.folds[i].val.len();
            metrics.push(m);
        }
        let ranking = ImportanceRanking::from_scores(
            features.iter().cloned().zip(total.into_iter().map(|t| t / n as f64)),
        );
        Ok((Self::report(config, features, 0, metrics), ranking))
    }
}
