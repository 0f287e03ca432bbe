//! Exact tree Shapley attributions and global importance.
//!
//! Attributions are in margin (log-odds) space with respect to the
//! tree-path conditional expectation, where an absent feature sends a row down
//! both children weighted by the training cover recorded at each split.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gbdt::{Node, Tree, TreeEnsemble};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub client_id: String,
    pub base_value: f64,
    /// Aligned with the model's feature names.
    pub phi: Vec<f64>,
    pub model_output: f64,
}

#[derive(Debug, Clone, Copy)]
struct PathElem {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: usize) {
    let d = path.len();
    path.push(PathElem {
        feature,
        zero,
        one,
        weight: if d == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..d).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (d + 1) as f64;
        path[i].weight = zero * path[i].weight * (d - i) as f64 / (d + 1) as f64;
    }
}

fn unwind(path: &mut Vec<PathElem>, index: usize) {
    let d = path.len() - 1;
    let PathElem { zero, one, .. } = path[index];
    let mut next = path[d].weight;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * (d + 1) as f64 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (d - i) as f64 / (d + 1) as f64;
        } else {
            path[i].weight = path[i].weight * (d + 1) as f64 / (zero * (d - i) as f64);
        }
    }
    for i in index..d {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

/// Total path weight with element `index` removed, without mutating `path`.
fn unwound_sum(path: &[PathElem], index: usize) -> f64 {
    let d = path.len() - 1;
    let PathElem { zero, one, .. } = path[index];
    let mut next = path[d].weight;
    let mut total = 0.0;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = next * (d + 1) as f64 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (d - i) as f64 / (d + 1) as f64;
        } else {
            total += path[i].weight / zero * (d + 1) as f64 / (d - i) as f64;
        }
    }
    total
}

struct Walker<'a, F: Fn(usize) -> f64> {
    tree: &'a Tree,
    x: F,
}

impl<F: Fn(usize) -> f64> Walker<'_, F> {
    fn recurse(
        &self,
        node: usize,
        mut path: Vec<PathElem>,
        zero: f64,
        one: f64,
        feature: usize,
        phi: &mut [f64],
    ) {
        extend(&mut path, zero, one, feature);
        match &self.tree.nodes[node] {
            Node::Leaf { value, .. } => {
                // element 0 is the synthetic root entry
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    phi[path[i].feature] += w * (path[i].one - path[i].zero) * value;
                }
            }
            Node::Split {
                feature: f,
                threshold,
                missing_left,
                left,
                right,
                cover,
            } => {
                let v = (self.x)(*f);
                let go_left = if v.is_nan() { *missing_left } else { v <= *threshold };
                let (hot, cold) = if go_left { (*left, *right) } else { (*right, *left) };
                let (mut in_zero, mut in_one) = (1.0, 1.0);
                if let Some(k) = (1..path.len()).find(|&k| path[k].feature == *f) {
                    in_zero = path[k].zero;
                    in_one = path[k].one;
                    unwind(&mut path, k);
                }
                let hot_frac = self.tree.nodes[hot].cover() / cover;
                let cold_frac = self.tree.nodes[cold].cover() / cover;
                self.recurse(hot, path.clone(), hot_frac * in_zero, in_one, *f, phi);
                self.recurse(cold, path, cold_frac * in_zero, 0.0, *f, phi);
            }
        }
    }
}

/// Adds one tree's attributions for the row `x` into `phi`.
pub fn tree_shap(tree: &Tree, x: impl Fn(usize) -> f64, phi: &mut [f64]) {
    if tree.nodes.len() == 1 {
        return;
    }
    let walker = Walker { tree, x };
    walker.recurse(0, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, usize::MAX, phi);
}

/// Margin of an ensemble when no feature is known.
pub fn expected_margin(model: &TreeEnsemble) -> f64 {
    model.base_score + model.trees.iter().map(Tree::expected_value).sum::<f64>()
}

pub fn shap_values(model: &TreeEnsemble, matrix: &FeatureMatrix) -> Result<Vec<ShapExplanation>> {
    let rows: Vec<usize> = (0..matrix.n_rows()).collect();
    shap_values_rows(model, matrix, &rows)
}

/// Explanations for the given matrix rows, in the given order.
pub fn shap_values_rows(
    model: &TreeEnsemble,
    matrix: &FeatureMatrix,
    rows: &[usize],
) -> Result<Vec<ShapExplanation>> {
    let cols = model.column_map(matrix)?;
    let base_value = expected_margin(model);
    let m = model.feature_names.len();
    Ok(rows
        .par_iter()
        .map(|&r| {
            let row = matrix.row(r);
            let x = |f: usize| row[cols[f]];
            let mut phi = vec![0.0; m];
            for t in &model.trees {
                tree_shap(t, x, &mut phi);
            }
            ShapExplanation {
                client_id: matrix.client_ids()[r].clone(),
                base_value,
                phi,
                model_output: model.margin_with(x),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub mean_abs_shap: f64,
}

/// Features sorted by decreasing mean |SHAP|, ties by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceRanking {
    pub fn from_scores(scores: impl IntoIterator<Item = (String, f64)>) -> Self {
        let mut entries: Vec<ImportanceEntry> = scores
            .into_iter()
            .map(|(feature, mean_abs_shap)| ImportanceEntry {
                feature,
                mean_abs_shap,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.mean_abs_shap
                .total_cmp(&a.mean_abs_shap)
                .then_with(|| a.feature.cmp(&b.feature))
        });
        ImportanceRanking { entries }
    }

    pub fn features(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.feature.clone()).collect()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "mean_abs_shap"])?;
        for e in &self.entries {
            w.write_record([e.feature.clone(), e.mean_abs_shap.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("importance.csv", e))?;
        Ok(())
    }
}

pub fn mean_abs_importance(
    feature_names: &[String],
    explanations: &[ShapExplanation],
) -> Result<ImportanceRanking> {
    if explanations.is_empty() {
        return Err(Error::input("importance needs at least one explanation"));
    }
    if let Some(e) = explanations.iter().find(|e| e.phi.len() != feature_names.len()) {
        return Err(Error::input(format!(
            "explanation for {} has {} values, expected {}",
            e.client_id,
            e.phi.len(),
            feature_names.len()
        )));
    }
    let n = explanations.len() as f64;
    Ok(ImportanceRanking::from_scores(feature_names.iter().enumerate().map(
        |(j, name)| {
            let s: f64 = explanations.iter().map(|e| e.phi[j].abs()).sum();
            (name.clone(), s / n)
        },
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub client_id: String,
    /// `None` when the feature value was missing.
    pub value: Option<f64>,
    pub shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFeature {
    pub rank: usize,
    pub feature: String,
    pub mean_abs_shap: f64,
    pub points: Vec<SummaryPoint>,
}

/// Data for a beeswarm-style summary chart of the top features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub base_value: f64,
    pub features: Vec<SummaryFeature>,
}

impl ShapSummary {
    /// Recomputes the ranking from the exported points.
    pub fn rerank(&self) -> ImportanceRanking {
        ImportanceRanking::from_scores(self.features.iter().map(|f| {
            let s: f64 = f.points.iter().map(|p| p.shap.abs()).sum();
            (f.feature.clone(), s / f.points.len().max(1) as f64)
        }))
    }
}

/// `explanations[i]` must describe the matrix row with the same client id.
pub fn summary_export(
    feature_names: &[String],
    explanations: &[ShapExplanation],
    matrix: &FeatureMatrix,
    top_k: usize,
) -> Result<ShapSummary> {
    let ranking = mean_abs_importance(feature_names, explanations)?;
    let rows = matrix.rows_for_clients(
        &explanations
            .iter()
            .map(|e| e.client_id.clone())
            .collect::<Vec<_>>(),
    )?;
    let mut features = Vec::new();
    for (rank, entry) in ranking.entries.iter().take(top_k).enumerate() {
        let j = feature_names.iter().position(|n| *n == entry.feature).unwrap();
        let col = matrix.column_index(&entry.feature);
        let points = explanations
            .iter()
            .zip(&rows)
            .map(|(e, &r)| SummaryPoint {
                client_id: e.client_id.clone(),
                value: col.and_then(|c| matrix.get(r, c)),
                shap: e.phi[j],
            })
            .collect();
        features.push(SummaryFeature {
            rank: rank + 1,
            feature: entry.feature.clone(),
            mean_abs_shap: entry.mean_abs_shap,
            points,
        });
    }
    Ok(ShapSummary {
        base_value: explanations[0].base_value,
        features,
    })
}

/// Writes `shap_summary.json` and `importance.csv` into `dir`.
pub fn write_summary_files(
    dir: &Path,
    summary: &ShapSummary,
    ranking: &ImportanceRanking,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("shap_summary.json");
    std::fs::write(&json, serde_json::to_vec_pretty(summary)?).map_err(|e| Error::io(&json, e))?;
    let csv_path = dir.join("importance.csv");
    let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    ranking.write_csv(f)
}
