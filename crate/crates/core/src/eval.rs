//! Ranking and classification metrics.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::input("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::input("scores contain NaN"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::input("labels must be 0 or 1"));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann-Whitney statistic with ties counted
/// one half. Counting is done in integers, so the result is the exact ratio.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut negs_below, mut wins2): (u128, u128) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut n) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        wins2 += 2 * p * negs_below + p * n;
        negs_below += n;
        i = j;
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok(wins2 as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `None` when nothing is predicted positive.
    pub precision: Option<f64>,
    /// `None` when there are no positives.
    pub recall: Option<f64>,
    /// Zero when precision or recall is zero or undefined.
    pub f1: f64,
}

/// Confusion counts with "predicted positive" meaning `score >= threshold`.
pub fn threshold_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ThresholdMetrics> {
    check_inputs(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p > 0.0 && r > 0.0 => 2.0 * p * r / (p + r),
        _ => 0.0,
    };
    if precision.is_none() {
        log::warn!(
            "no predictions at or above {threshold} among {} rows; precision undefined",
            scores.len()
        );
    }
    Ok(ThresholdMetrics {
        threshold,
        tp,
        fp,
        tn,
        fn_,
        precision,
        recall,
        f1,
    })
}

/// Row indices ordered by descending score, ties by ascending client id.
pub fn rank_by_score(scores: &[f64], client_ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => client_ids[a].cmp(&client_ids[b]),
        o => o,
    });
    order
}

/// Share of positives among the `k` best-scored rows. `k` above the row
/// count is clamped with a warning.
pub fn precision_at_k(scores: &[f64], labels: &[u8], client_ids: &[String], k: usize) -> Result<f64> {
    check_inputs(scores, labels)?;
    if client_ids.len() != scores.len() {
        return Err(Error::input("client ids and scores differ in length"));
    }
    if k == 0 {
        return Err(Error::input("K must be at least 1"));
    }
    if scores.is_empty() {
        return Err(Error::input("precision@K on an empty population"));
    }
    let k_used = if k > scores.len() {
        log::warn!("K={k} exceeds population {}; using {}", scores.len(), scores.len());
        scores.len()
    } else {
        k
    };
    let order = rank_by_score(scores, client_ids);
    let hits = order[..k_used].iter().filter(|&&i| labels[i] == 1).count();
    Ok(hits as f64 / k_used as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub precision_at_half: Option<f64>,
    pub recall_at_half: Option<f64>,
    pub f1: f64,
    pub precision_at_k: BTreeMap<usize, f64>,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub const DEFAULT_KS: [usize; 2] = [100, 500];

pub fn metric_report(
    scores: &[f64],
    labels: &[u8],
    client_ids: &[String],
    ks: &[usize],
) -> Result<MetricReport> {
    let auc = auc(scores, labels)?;
    let t = threshold_metrics(scores, labels, 0.5)?;
    let precision_at_k = ks
        .iter()
        .map(|&k| Ok((k, precision_at_k(scores, labels, client_ids, k)?)))
        .collect::<Result<_>>()?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    Ok(MetricReport {
        auc,
        precision_at_half: t.precision,
        recall_at_half: t.recall,
        f1: t.f1,
        precision_at_k,
        n_pos,
        n_neg: labels.len() - n_pos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_basics() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn hand_confusion() {
        let s = [0.9, 0.8, 0.7, 0.6, 0.2, 0.1];
        let y = [1, 1, 1, 0, 1, 0];
        let m = threshold_metrics(&s, &y, 0.5).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (3, 1, 1));
        assert_eq!(m.precision, Some(0.75));
        assert_eq!(m.recall, Some(0.75));
        assert!((m.f1 - 0.75).abs() < 1e-15);
        assert_eq!(threshold_metrics(&s, &y, 0.0).unwrap().recall, Some(1.0));
        let none = threshold_metrics(&s, &y, 2.0).unwrap();
        assert_eq!((none.precision, none.f1), (None, 0.0));
    }

    #[test]
    fn precision_at_k_tie_break() {
        let ids: Vec<String> = ["c", "a", "b"].iter().map(|s| s.to_string()).collect();
        // all tied: order a, b, c
        assert_eq!(precision_at_k(&[1.0; 3], &[0, 1, 0], &ids, 1).unwrap(), 1.0);
        assert_eq!(precision_at_k(&[1.0; 3], &[0, 1, 0], &ids, 10).unwrap(), 1.0 / 3.0);
    }
}
