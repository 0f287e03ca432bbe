//! Upper-tail outlier capping at `Q3 + 1.5 * IQR`.

use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use crate::stats::quantile_sorted;

/// Minimum number of observed values needed to fit a cap.
pub const MIN_VALUES_FOR_CAP: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapRule {
    pub feature_name: String,
    pub q3: f64,
    pub iqr: f64,
    pub cap: f64,
}

impl CapRule {
    pub fn from_values(feature_name: &str, values: &[f64]) -> Option<CapRule> {
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
        if sorted.len() < MIN_VALUES_FOR_CAP {
            return None;
        }
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&sorted, 0.25)?;
        let q3 = quantile_sorted(&sorted, 0.75)?;
        let iqr = (q3 - q1).max(0.0);
        Some(CapRule {
            feature_name: feature_name.to_string(),
            q3,
            iqr,
            cap: q3 + 1.5 * iqr,
        })
    }

    pub fn apply(&self, v: f64) -> f64 {
        if v > self.cap {
            self.cap
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CapSet {
    pub rules: Vec<CapRule>,
    /// Features left uncapped because too few values were observed.
    pub disabled: Vec<String>,
}

/// Fits one rule per feature on the given rows (all rows when `None`).
pub fn fit_caps(matrix: &FeatureMatrix, rows: Option<&[usize]>) -> CapSet {
    let mut out = CapSet::default();
    for (c, name) in matrix.feature_names().iter().enumerate() {
        let values = match rows {
            Some(rows) => matrix.column_subset(c, rows),
            None => matrix.column(c),
        };
        match CapRule::from_values(name, &values) {
            Some(rule) => out.rules.push(rule),
            None => out.disabled.push(name.clone()),
        }
    }
    out
}

/// Replaces values above each feature's cap by the cap. Missing values and
/// the lower tail are untouched; features without a rule pass through.
pub fn apply_caps(matrix: &FeatureMatrix, caps: &CapSet) -> FeatureMatrix {
    let mut out = matrix.clone();
    for rule in &caps.rules {
        let Some(c) = matrix.column_index(&rule.feature_name) else {
            continue;
        };
        for r in 0..out.n_rows() {
            let v = out.raw(r, c);
            if !v.is_nan() && v > rule.cap {
                out.set(r, c, rule.cap);
            }
        }
    }
    out
}
