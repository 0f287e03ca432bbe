//! Correlation-based feature filtering.
//!
//! First a leakage guard drops features whose correlation with the label
//! exceeds `r_max` in absolute value. The remaining features are then visited
//! in order of decreasing label correlation and a feature is dropped when it
//! correlates above `r_max` with a feature already kept.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};
use crate::stats::pearson;

pub const DEFAULT_R_MAX: f64 = 0.80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDrop {
    pub kept: String,
    pub dropped: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDrop {
    pub feature: String,
    /// `None` when the feature has no variance on the fitting rows.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub dropped_pairwise: Vec<PairDrop>,
    pub dropped_target: Vec<TargetDrop>,
    /// Surviving features in the matrix's column order.
    pub surviving: Vec<String>,
}

/// Runs the filter on `rows` (all rows when `None`). `labels` is indexed by
/// matrix row.
pub fn correlation_filter(
    matrix: &FeatureMatrix,
    labels: &[u8],
    rows: Option<&[usize]>,
    r_max: f64,
) -> Result<FilterReport> {
    if labels.len() != matrix.n_rows() {
        return Err(Error::input("label count does not match matrix rows"));
    }
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..matrix.n_rows()).collect();
            &all
        }
    };
    let y: Vec<f64> = rows.iter().map(|&r| f64::from(labels[r])).collect();
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }
    let columns: Vec<Vec<f64>> = (0..matrix.n_cols())
        .into_par_iter()
        .map(|c| matrix.column_subset(c, rows))
        .collect();
    let target_r: Vec<Option<f64>> = columns.par_iter().map(|col| pearson(col, &y)).collect();

    let names = matrix.feature_names();
    let mut report = FilterReport::default();
    let mut candidates = Vec::new();
    for (c, r) in target_r.iter().enumerate() {
        match r {
            None => report.dropped_target.push(TargetDrop {
                feature: names[c].clone(),
                r: None,
            }),
            Some(r) if r.abs() > r_max => report.dropped_target.push(TargetDrop {
                feature: names[c].clone(),
                r: Some(*r),
            }),
            Some(r) => candidates.push((c, r.abs())),
        }
    }
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut kept: Vec<usize> = Vec::new();
    for (c, _) in candidates {
        let hit = kept
            .par_iter()
            .map(|&k| pearson(&columns[k], &columns[c]).map(|r| (k, r)))
            .find_first(|found| matches!(found, Some((_, r)) if r.abs() > r_max));
        match hit.flatten() {
            Some((k, r)) => report.dropped_pairwise.push(PairDrop {
                kept: names[k].clone(),
                dropped: names[c].clone(),
                r,
            }),
            None => kept.push(c),
        }
    }
    kept.sort_unstable();
    report.surviving = kept.into_iter().map(|c| names[c].clone()).collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: &[(&str, Vec<f64>)]) -> FeatureMatrix {
        let n = cols[0].1.len();
        let mut values = Vec::new();
        for r in 0..n {
            values.extend(cols.iter().map(|(_, v)| v[r]));
        }
        FeatureMatrix::from_rows(
            (0..n).map(|i| format!("c{i}")).collect(),
            cols.iter().map(|(n, _)| n.to_string()).collect(),
            values,
        )
        .unwrap()
    }

    #[test]
    fn duplicate_pair_keeps_one() {
        let x = vec![1.0, 2.0, 3.0, 1.5, 0.5, 2.5];
        let y = [0, 1, 1, 0, 0, 0];
        let m = matrix(&[("a", x.clone()), ("b", x)]);
        let rep = correlation_filter(&m, &y, None, 0.8).unwrap();
        assert_eq!(rep.surviving, vec!["a".to_string()]);
        assert_eq!(rep.dropped_pairwise.len(), 1);
        assert_eq!(rep.dropped_pairwise[0].kept, "a");
        assert_eq!(rep.dropped_pairwise[0].r, 1.0);
    }

    #[test]
    fn label_copy_is_leakage() {
        let y = [0u8, 1, 1, 0, 1, 0];
        let leak: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let m = matrix(&[("leak", leak), ("ok", vec![3.0, 1.0, 2.0, 2.0, 1.0, 5.0])]);
        let rep = correlation_filter(&m, &y, None, 0.8).unwrap();
        assert_eq!(rep.dropped_target[0].feature, "leak");
        assert_eq!(rep.surviving, vec!["ok".to_string()]);
    }

    #[test]
    fn constant_feature_dropped_with_undefined_r() {
        let m = matrix(&[("k", vec![1.0; 4]), ("v", vec![1.0, 2.0, 4.0, 3.0])]);
        let rep = correlation_filter(&m, &[0, 0, 1, 1], None, 0.99).unwrap();
        assert_eq!(rep.dropped_target[0], TargetDrop { feature: "k".into(), r: None });
        assert_eq!(rep.surviving, vec!["v".to_string()]);
    }

    #[test]
    fn single_class_is_an_error() {
        let m = matrix(&[("v", vec![1.0, 2.0])]);
        assert!(correlation_filter(&m, &[1, 1], None, 0.8).is_err());
    }
}
